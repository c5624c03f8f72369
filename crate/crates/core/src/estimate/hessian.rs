//! Approximate Hessian of the Q function and its positive-definite
//! conditioning into a Newton scaling matrix.
//!
//! Only the expected complete-data curvature is used (the score-product
//! terms are dropped), so the Hessian is block-diagonal: one block per
//! class plus one MRF block. Class blocks are obtained by central finite
//! differences of the analytic gradients in the packed coordinates; for the
//! Gaussian family the gradient is a closed function of the sufficient
//! statistics, so differencing costs no extra data passes. The MRF block is
//! the exact analytic curvature of the local log-conditionals.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimate::gradient::{gauss_grad_from_stats, gauss_stats, nig_class_grad};
use crate::estimate::model::{ClassParams, MixtureModel};
use crate::mrf::{potts_conditional, MrfParams, PosteriorField};
use crate::volume::{Neighborhood, VolumeGrid};

const FD_STEP: f64 = 1e-5;

/// Which conditioning fallback produced the scaling matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingTier {
    /// S = −H⁻¹ (H negative definite).
    Inverse,
    /// S = diag(−H_ii) (all diagonal entries negative).
    NegDiag,
    /// Diagonal with non-positive curvature entries shifted to ε.
    ShiftedDiag,
}

impl ScalingTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScalingTier::Inverse => "inverse",
            ScalingTier::NegDiag => "neg-diag",
            ScalingTier::ShiftedDiag => "shifted-diag",
        }
    }
}

fn tri_from_slice(vals: &[f64], d: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = if i == j { vals[idx].exp() } else { vals[idx] };
            idx += 1;
        }
    }
    l
}

/// Central-difference Hessian of a gradient function over a packed segment,
/// symmetrized.
fn fd_hessian(theta: &[f64], mut grad: impl FnMut(&[f64]) -> DVector<f64>) -> DMatrix<f64> {
    let p = theta.len();
    let mut h = DMatrix::zeros(p, p);
    let mut work = theta.to_vec();
    for i in 0..p {
        let step = FD_STEP * theta[i].abs().max(1.0);
        work[i] = theta[i] + step;
        let gp = grad(&work);
        work[i] = theta[i] - step;
        let gm = grad(&work);
        work[i] = theta[i];
        let col = (gp - gm) / (2.0 * step);
        h.column_mut(i).copy_from(&col);
    }
    (&h + h.transpose()) * 0.5
}

/// Analytic curvature of the MRF Q term over the free coordinates
/// (α_2..α_K, then β for spatial models).
fn mrf_hessian(post: &PosteriorField, mrf: &MrfParams, spatial: bool) -> DMatrix<f64> {
    let k = mrf.k();
    let n = post.probs.len() / k;
    let p_free = k - 1 + usize::from(spatial);
    let mut h = DMatrix::zeros(p_free, p_free);
    let zeros_row = vec![0.0f64; k];

    // For one site the log-conditional curvature is −Cov_p(v) with
    // v = (indicator of α_2..α_K, neighbor count), independent of which
    // class the posterior weight sits on.
    let mut accumulate = |p: &[f64], counts: &[u32], weight: f64| {
        let p_dot_c: f64 = (0..k).map(|c| p[c] * counts[c] as f64).sum();
        for l in 1..k {
            for m in 1..k {
                let cov = if l == m { p[l] * (1.0 - p[l]) } else { -p[l] * p[m] };
                h[(l - 1, m - 1)] -= weight * cov;
            }
            if spatial {
                let cov = p[l] * (counts[l] as f64 - p_dot_c);
                h[(l - 1, p_free - 1)] -= weight * cov;
                h[(p_free - 1, l - 1)] -= weight * cov;
            }
        }
        if spatial {
            let c2: f64 = (0..k).map(|c| p[c] * (counts[c] as f64).powi(2)).sum();
            h[(p_free - 1, p_free - 1)] -= weight * (c2 - p_dot_c * p_dot_c);
        }
    };

    match &post.stats {
        Some(stats) => {
            let inv_j = 1.0 / stats.j() as f64;
            let mut counts = vec![0u32; k];
            for j in 0..stats.j() {
                for rank in 0..n {
                    let c8 = stats.counts(j, rank);
                    for c in 0..k {
                        counts[c] = c8[c] as u32;
                    }
                    let p = potts_conditional(mrf, &counts, &zeros_row);
                    accumulate(&p, &counts, inv_j);
                }
            }
        }
        None => {
            let pi = mrf.class_prior();
            let counts = vec![0u32; k];
            accumulate(&pi, &counts, n as f64);
        }
    }
    h
}

/// Block-diagonal approximate Hessian of Q in the packed coordinates.
pub fn approx_hessian(
    model: &MixtureModel,
    grid: &VolumeGrid,
    nb: &Neighborhood,
    post: &PosteriorField,
) -> Result<DMatrix<f64>> {
    let chans: Vec<usize> = (0..model.channels()).collect();
    let d = model.channels();
    let k = model.k();
    let theta = model.to_theta();
    let mut h = DMatrix::zeros(model.n_params(), model.n_params());

    for c in 0..k {
        let block = model.class_block(c);
        let seg: Vec<f64> = theta.as_slice()[block.clone()].to_vec();
        let hb = match model.class(c) {
            ClassParams::Gaussian(_) => {
                let (w, s, s2) = gauss_stats(grid, nb, &post.probs, k, c, &chans);
                fd_hessian(&seg, |t| {
                    let mean = DVector::from_column_slice(&t[..d]);
                    let chol = tri_from_slice(&t[d..], d);
                    gauss_grad_from_stats(&mean, &chol, w, &s, &s2)
                })
            }
            ClassParams::Nig(_) => {
                let tri = d * (d + 1) / 2;
                fd_hessian(&seg, |t| {
                    let loc = DVector::from_column_slice(&t[..d]);
                    let chol = tri_from_slice(&t[d..d + tri], d);
                    let skew = DVector::from_column_slice(&t[d + tri..2 * d + tri]);
                    let kurt = t[2 * d + tri].exp();
                    let p = crate::dists::NigClassParams::new(loc, chol, skew, kurt)
                        .expect("packed coordinates are always valid");
                    nig_class_grad(&p, grid, nb, &post.probs, k, c, &chans)
                })
            }
        };
        if hb.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite Hessian block for class {c}")));
        }
        h.view_mut((block.start, block.start), (block.len(), block.len()))
            .copy_from(&hb);
    }

    let mb = model.mrf_block();
    if !mb.is_empty() {
        let hm = mrf_hessian(post, model.mrf(), model.spatial);
        if hm.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite MRF Hessian block".into()));
        }
        h.view_mut((mb.start, mb.start), (mb.len(), mb.len()))
            .copy_from(&hm);
    }
    Ok(h)
}

/// Positive-definite Newton scaling from a possibly indefinite Hessian:
/// try S = −H⁻¹, then the negated diagonal, then the negated diagonal with
/// non-positive entries shifted up to ε = 10⁻⁶·max|H_ii|.
pub fn condition_scaling(h: &DMatrix<f64>) -> (DMatrix<f64>, ScalingTier) {
    let p = h.nrows();
    if let Some(chol) = Cholesky::new(-h) {
        return (chol.inverse(), ScalingTier::Inverse);
    }
    let neg_diag: Vec<f64> = (0..p).map(|i| -h[(i, i)]).collect();
    if neg_diag.iter().all(|&v| v > 0.0) {
        return (
            DMatrix::from_diagonal(&DVector::from_vec(neg_diag)),
            ScalingTier::NegDiag,
        );
    }
    let max_abs = (0..p).map(|i| h[(i, i)].abs()).fold(0.0f64, f64::max);
    let eps = if max_abs > 0.0 { 1e-6 * max_abs } else { 1e-6 };
    let shifted: Vec<f64> = neg_diag.iter().map(|&v| if v >= eps { v } else { eps }).collect();
    (
        DMatrix::from_diagonal(&DVector::from_vec(shifted)),
        ScalingTier::ShiftedDiag,
    )
}
