//! Central finite-difference checks for the score network.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::Result;
use crate::net::{MlpScoreNet, ParamGrad};

/// Central differences of `empirical_sm_loss` with respect to every parameter.
pub fn finite_difference_grad(net: &MlpScoreNet, batch: ArrayView2<'_, f64>, step: f64) -> Result<ParamGrad> {
    let mut g = ParamGrad::zeros_like(net);
    let mut probe = net.clone();
    for l in 0..net.params().len() {
        let (r, c) = net.params()[l].dim();
        for i in 0..r {
            for j in 0..c {
                let orig = net.params()[l][[i, j]];
                probe.params_mut()[l][[i, j]] = orig + step;
                let lp = probe.empirical_sm_loss(batch)?;
                probe.params_mut()[l][[i, j]] = orig - step;
                let lm = probe.empirical_sm_loss(batch)?;
                probe.params_mut()[l][[i, j]] = orig;
                g.layers[l][[i, j]] = (lp - lm) / (2.0 * step);
            }
        }
    }
    Ok(g)
}

/// Largest elementwise relative difference, with entries below 1% of the
/// largest reference magnitude compared on that floor instead.
pub fn max_rel_diff(a: &ParamGrad, reference: &ParamGrad) -> f64 {
    let scale = reference.max_abs().max(1e-8);
    a.layers
        .iter()
        .zip(&reference.layers)
        .flat_map(|(x, y)| x.iter().zip(y.iter()))
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-2 * scale))
        .fold(0.0, f64::max)
}

/// Relative error of `analytic` against finite differences of the loss.
pub fn gradient_check(net: &MlpScoreNet, batch: ArrayView2<'_, f64>, analytic: &ParamGrad) -> Result<f64> {
    let fd = finite_difference_grad(net, batch, 1e-5)?;
    Ok(max_rel_diff(analytic, &fd))
}

/// Central differences of the network output with respect to its input;
/// column `k` is the derivative along `e_k`.
pub fn finite_difference_jacobian(net: &MlpScoreNet, x: ArrayView1<'_, f64>, step: f64) -> Result<Array2<f64>> {
    let d = x.len();
    let mut jac = Array2::zeros((net.dims()[net.dims().len() - 1], d));
    for k in 0..d {
        let mut xp: Array1<f64> = x.to_owned();
        let mut xm = x.to_owned();
        xp[k] += step;
        xm[k] -= step;
        let col = (net.forward(xp.view())? - net.forward(xm.view())?) / (2.0 * step);
        jac.column_mut(k).assign(&col);
    }
    Ok(jac)
}
