//! Dense symmetric linear algebra.
//!
//! Everything here works on small matrices (D up to a few hundred), so the
//! eigensolver is a plain cyclic Jacobi iteration.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative asymmetry (Frobenius) tolerated when wrapping a matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// A symmetric `D x D` information-type matrix.
///
/// The stored entries are exactly symmetric: construction mirrors the upper
/// triangle after validating the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct InfoMatrix(Array2<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Spectral,
    Frobenius,
}

impl InfoMatrix {
    /// Wraps `a`, checking it is square, finite and symmetric to
    /// [`SYMMETRY_TOL`].
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        let asym = relative_asymmetry(a.view());
        if asym > SYMMETRY_TOL {
            return Err(Error::Asymmetric { asymmetry: asym });
        }
        Ok(Self::mirror_upper(a))
    }

    /// Mirrors the upper triangle into the lower one without checks.
    pub(crate) fn mirror_upper(mut a: Array2<f64>) -> Self {
        let n = a.nrows();
        for i in 0..n {
            for j in 0..i {
                a[[i, j]] = a[[j, i]];
            }
        }
        InfoMatrix(a)
    }

    pub fn zeros(dim: usize) -> Self {
        InfoMatrix(Array2::zeros((dim, dim)))
    }

    pub fn identity(dim: usize) -> Self {
        InfoMatrix(Array2::eye(dim))
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        InfoMatrix(Array2::eye(dim) * c)
    }

    pub fn from_diag(d: &[f64]) -> Self {
        InfoMatrix(Array2::from_diag(&ArrayView1::from(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().sum()
    }

    pub fn add(&self, other: &InfoMatrix) -> Result<InfoMatrix> {
        check_same_dim(self, other)?;
        Ok(InfoMatrix(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &InfoMatrix) -> Result<InfoMatrix> {
        check_same_dim(self, other)?;
        Ok(InfoMatrix(&self.0 - &other.0))
    }

    pub fn scale(&self, c: f64) -> InfoMatrix {
        InfoMatrix(&self.0 * c)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(self.0.view())
    }

    pub fn eigen(&self) -> SymEigen {
        jacobi_eigen(self.0.view())
    }

    /// Returns `Some(c)` if the matrix equals `c * I` exactly.
    pub fn as_scalar_identity(&self) -> Option<f64> {
        let c = self.0[[0, 0]];
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { c } else { 0.0 };
                if self.0[[i, j]] != want {
                    return None;
                }
            }
        }
        Some(c)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.outer_iter().map(|r| r.to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for InfoMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut a = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                a[[i, j]] = v;
            }
        }
        InfoMatrix::new(a)
    }
}

impl From<InfoMatrix> for Vec<Vec<f64>> {
    fn from(m: InfoMatrix) -> Self {
        m.to_rows()
    }
}

fn check_same_dim(a: &InfoMatrix, b: &InfoMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `||A - A^T||_F / ||A||_F`, zero for the zero matrix.
pub fn relative_asymmetry(a: ArrayView2<'_, f64>) -> f64 {
    let n = a.nrows();
    let mut num = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = a[[i, j]] - a[[j, i]];
            num += d * d;
        }
    }
    let den = frobenius(a);
    if den == 0.0 {
        0.0
    } else {
        num.sqrt() / den
    }
}

/// Eigendecomposition of a symmetric matrix: `A = V diag(values) V^T`.
///
/// Eigenvalues are sorted ascending; `vectors` holds them column-wise.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl SymEigen {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Rebuilds `V f(diag) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.axis_iter_mut(Axis(1)).enumerate() {
            col *= f(self.values[j]);
        }
        let mut out = scaled.dot(&self.vectors.t());
        for i in 0..n {
            for j in 0..i {
                out[[i, j]] = out[[j, i]];
            }
        }
        out
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Only the upper triangle of `a` is trusted.
pub fn jacobi_eigen(a: ArrayView2<'_, f64>) -> SymEigen {
    let n = a.nrows();
    let mut m = a.to_owned();
    for i in 0..n {
        for j in 0..i {
            m[[i, j]] = m[[j, i]];
        }
    }
    let mut v = Array2::<f64>::eye(n);

    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]].abs();
            }
        }
        if off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                // Once the rotation would not change the diagonal in floating
                // point, the off-diagonal entry is dropped outright.
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[[p, q]] = 0.0;
                    m[[q, p]] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    SymEigen { values, vectors }
}

/// `(1/N) sum_i v_i v_i^T` over the rows of `vs`.
pub fn mean_outer(vs: ArrayView2<'_, f64>) -> Result<InfoMatrix> {
    let mut acc = OuterAccumulator::new(vs.ncols());
    acc.push_rows(vs)?;
    acc.finish()
}

/// Streaming sum of outer products, for sample sets that are produced in
/// chunks. Chunks must be pushed in a fixed order for reproducible sums.
#[derive(Debug, Clone)]
pub struct OuterAccumulator {
    sum: Array2<f64>,
    count: usize,
}

impl OuterAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: Array2::zeros((dim, dim)),
            count: 0,
        }
    }

    pub fn push_rows(&mut self, rows: ArrayView2<'_, f64>) -> Result<()> {
        if rows.ncols() != self.sum.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.sum.ncols(),
                got: rows.ncols(),
            });
        }
        if rows.nrows() == 0 {
            return Ok(());
        }
        self.sum += &rows.t().dot(&rows);
        self.count += rows.nrows();
        Ok(())
    }

    pub fn push(&mut self, v: ArrayView1<'_, f64>) -> Result<()> {
        let d = self.sum.ncols();
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
        for i in 0..d {
            for j in i..d {
                self.sum[[i, j]] += v[i] * v[j];
            }
        }
        self.count += 1;
        Ok(())
    }

    /// Adds another accumulator's sums. Merge order fixes the rounding.
    pub fn merge(&mut self, other: &OuterAccumulator) -> Result<()> {
        if other.sum.ncols() != self.sum.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.sum.ncols(),
                got: other.sum.ncols(),
            });
        }
        self.sum += &other.sum;
        self.count += other.count;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> Result<InfoMatrix> {
        if self.count == 0 {
            return Err(Error::EmptySampleSet);
        }
        let n = self.count as f64;
        Ok(InfoMatrix::mirror_upper(self.sum / n))
    }
}

/// Default pseudoinverse cutoff: `D * eps` (relative to the largest
/// eigenvalue magnitude).
pub fn default_pinv_rtol(dim: usize) -> f64 {
    dim as f64 * f64::EPSILON
}

/// Moore-Penrose pseudoinverse of a symmetric matrix via its
/// eigendecomposition. Eigenvalues with `|lambda| <= rtol * max|lambda|` are
/// treated as zero; `rtol = None` selects [`default_pinv_rtol`].
pub fn sym_pinv(a: &InfoMatrix, rtol: Option<f64>) -> Result<InfoMatrix> {
    pinv_array(a.view(), rtol).map(InfoMatrix)
}

/// Same as [`sym_pinv`] on a raw array; rejects asymmetric input.
pub fn pinv_array(a: ArrayView2<'_, f64>, rtol: Option<f64>) -> Result<Array2<f64>> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    let asym = relative_asymmetry(a);
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric { asymmetry: asym });
    }
    let rtol = rtol.unwrap_or_else(|| default_pinv_rtol(r));
    if rtol < 0.0 || !rtol.is_finite() {
        return Err(Error::InvalidArgument(format!("rtol must be >= 0, got {rtol}")));
    }
    let eig = jacobi_eigen(a);
    let cutoff = rtol * eig.max_abs();
    Ok(eig.reconstruct_with(|l| if l.abs() <= cutoff || l == 0.0 { 0.0 } else { 1.0 / l }))
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(a: &InfoMatrix) -> f64 {
    a.eigen().max_abs()
}

pub fn matrix_norm(a: &InfoMatrix, norm: Norm) -> f64 {
    match norm {
        Norm::Spectral => spectral_norm(a),
        Norm::Frobenius => a.frobenius_norm(),
    }
}

/// `||est - reference|| / ||reference||`.
pub fn rel_error(est: &InfoMatrix, reference: &InfoMatrix, norm: Norm) -> Result<f64> {
    let diff = est.sub(reference)?;
    let den = matrix_norm(reference, norm);
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(matrix_norm(&diff, norm) / den)
}

/// Largest singular value of an arbitrary rectangular matrix.
pub fn operator_norm(a: ArrayView2<'_, f64>) -> f64 {
    let gram = if a.nrows() <= a.ncols() {
        a.dot(&a.t())
    } else {
        a.t().dot(&a)
    };
    jacobi_eigen(gram.view()).max_abs().sqrt()
}

/// Lower Cholesky factor of an SPD matrix.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse and log-determinant of an SPD matrix from its Cholesky factor.
pub fn spd_inverse_logdet(a: ArrayView2<'_, f64>) -> Result<(Array2<f64>, f64)> {
    let l = cholesky(a)?;
    let n = l.nrows();
    let logdet = 2.0 * l.diag().iter().map(|v| v.ln()).sum::<f64>();
    // Invert L by forward substitution, then A^-1 = L^-T L^-1.
    let mut linv = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        linv[[j, j]] = 1.0 / l[[j, j]];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[[i, k]] * linv[[k, j]];
            }
            linv[[i, j]] = s / l[[i, i]];
        }
    }
    let inv = InfoMatrix::mirror_upper(linv.t().dot(&linv)).into_array();
    Ok((inv, logdet))
}

/// Orthogonal factor of the QR decomposition of a square matrix, with the
/// sign convention `diag(R) > 0`. Gram-Schmidt with one reorthogonalisation
/// pass.
pub fn qr_orthogonal(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::NotSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    let mut q = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut v = m.column(j).to_owned();
        for _pass in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let r = qk.dot(&v);
                v.scaled_add(-r, &qk);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("rank-deficient matrix in QR".into()));
        }
        q.column_mut(j).assign(&(v / norm));
    }
    Ok(q)
}
