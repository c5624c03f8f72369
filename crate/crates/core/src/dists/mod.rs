//! Class distributions: multivariate Gaussian and normal-inverse-Gaussian,
//! their channel-subset marginals and conditionals, and the Bessel/GIG
//! machinery they are built on.

pub mod bessel;
mod bessel_reference;
pub mod gauss;
pub mod gig;
pub mod nig;

pub use gauss::{gauss_conditional, GaussClassParams};
pub use gig::{ig_sample, GigParams, GigSampler};
pub use nig::{GhConditional, NigClassParams};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Validate a lower-triangular precision factor: square, finite entries,
/// strictly positive diagonal, zero strict upper triangle.
pub(crate) fn check_chol_factor(l: &DMatrix<f64>) -> Result<()> {
    let d = l.nrows();
    if l.ncols() != d {
        return Err(Error::Parameter("triangular factor must be square".into()));
    }
    for i in 0..d {
        for j in 0..d {
            let v = l[(i, j)];
            if !v.is_finite() {
                return Err(Error::Parameter("non-finite factor entry".into()));
            }
            if j > i && v != 0.0 {
                return Err(Error::Parameter(
                    "factor has nonzero entries above the diagonal".into(),
                ));
            }
        }
        if !(l[(i, i)] > 0.0) {
            return Err(Error::Parameter(format!(
                "factor diagonal must be positive, got {} at {i}",
                l[(i, i)]
            )));
        }
    }
    Ok(())
}

pub(crate) fn select_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub(crate) fn select_mat(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub(crate) fn std_normal_vec(d: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}
