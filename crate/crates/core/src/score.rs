use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Anything that maps a point `x` in `R^D` to a score vector in `R^D`:
/// trained networks, ground-truth prior scores, ad-hoc closures.
pub trait ScoreModel: Sync {
    fn dim(&self) -> usize;

    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>>;

    /// Scores for every row of `xs`.
    fn score_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_cols(xs, self.dim())?;
        let mut out = Array2::zeros(xs.raw_dim());
        for (x, mut row) in xs.outer_iter().zip(out.outer_iter_mut()) {
            row.assign(&self.score(x)?);
        }
        Ok(out)
    }
}

impl<S: ScoreModel + ?Sized> ScoreModel for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        (**self).score(x)
    }
    fn score_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        (**self).score_batch(xs)
    }
}

/// Adapts a closure into a [`ScoreModel`].
pub struct FnScore<F> {
    dim: usize,
    f: F,
}

impl<F> FnScore<F>
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> ScoreModel for FnScore<F>
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_len(x, self.dim)?;
        Ok((self.f)(x))
    }
}

pub(crate) fn check_len(x: ArrayView1<'_, f64>, dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_cols(xs: ArrayView2<'_, f64>, dim: usize) -> Result<()> {
    if xs.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: xs.ncols(),
        });
    }
    Ok(())
}
