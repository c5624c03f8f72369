//! Analytic gradients of the expected complete-data pseudolikelihood and
//! the Q function evaluated on fixed posteriors.
//!
//! The data term Σ_i Σ_k w_ik log f_k(x_i) is differentiated in the packed
//! unconstrained coordinates (factor diagonal in log scale, κ in log scale).
//! For the Gaussian family everything reduces to the weighted sufficient
//! statistics (W, s, S2); the NIG family needs per-voxel Bessel ratios. The
//! MRF term is the Monte Carlo average over retained Gibbs samples of the
//! local log-conditional gradients.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dists::bessel::log_bessel_k_pair;
use crate::dists::NigClassParams;
use crate::error::{Error, Result};
use crate::estimate::model::{ClassParams, MixtureModel};
use crate::mrf::{potts_conditional, LikelihoodTable, MrfParams, PosteriorField};
use crate::volume::{Neighborhood, VolumeGrid};

/// Chunk size of the deterministic parallel reductions: per-chunk partials
/// are computed in parallel and then summed in fixed order, so results do
/// not depend on the worker count.
const CHUNK: usize = 2048;

/// Posterior weights at or below this value are treated as exact zeros so
/// that −∞ log terms from impossible classes never poison the sums.
const WEIGHT_FLOOR: f64 = 1e-300;

/// Per-site log data terms t_ik = log f_k(x over `chans`), rank-indexed.
pub fn likelihood_table(
    classes: &[ClassParams],
    grid: &VolumeGrid,
    nb: &Neighborhood,
    chans: &[usize],
) -> Result<LikelihoodTable> {
    let k = classes.len();
    let n = nb.len();
    let mut loglik = vec![0.0f64; n * k];
    loglik
        .par_chunks_mut(CHUNK * k)
        .enumerate()
        .for_each(|(ci, chunk)| {
            for (local, row) in chunk.chunks_mut(k).enumerate() {
                let rank = ci * CHUNK + local;
                let x = grid.voxel_channels(nb.site(rank), chans);
                for (c, class) in classes.iter().enumerate() {
                    row[c] = class.logpdf(&x).unwrap_or(f64::NAN);
                }
            }
        });
    if loglik.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("non-finite log-likelihood entry".into()));
    }
    LikelihoodTable::from_raw(loglik, k)
}

/// Weighted sufficient statistics (W, s, S2) of one class.
pub(crate) fn gauss_stats(
    grid: &VolumeGrid,
    nb: &Neighborhood,
    probs: &[f64],
    k_total: usize,
    class: usize,
    chans: &[usize],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let d = chans.len();
    let n = nb.len();
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<(f64, DVector<f64>, DMatrix<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut w = 0.0;
            let mut s = DVector::zeros(d);
            let mut s2 = DMatrix::zeros(d, d);
            for rank in ci * CHUNK..((ci + 1) * CHUNK).min(n) {
                let wi = probs[rank * k_total + class];
                if wi <= WEIGHT_FLOOR {
                    continue;
                }
                let x = grid.voxel_channels(nb.site(rank), chans);
                w += wi;
                s.axpy(wi, &x, 1.0);
                s2.syger(wi, &x, &x, 1.0);
            }
            (w, s, s2)
        })
        .collect();
    let mut w = 0.0;
    let mut s = DVector::zeros(d);
    let mut s2 = DMatrix::zeros(d, d);
    for (pw, ps, ps2) in partials {
        w += pw;
        s += ps;
        s2 += ps2;
    }
    // syger fills only the lower triangle; mirror it.
    for i in 0..d {
        for j in 0..i {
            s2[(j, i)] = s2[(i, j)];
        }
    }
    (w, s, s2)
}

/// Gradient of the weighted Gaussian log-likelihood in packed coordinates
/// (mean, factor with log diagonal), written purely from sufficient stats.
pub(crate) fn gauss_grad_from_stats(
    mean: &DVector<f64>,
    chol: &DMatrix<f64>,
    w: f64,
    s: &DVector<f64>,
    s2: &DMatrix<f64>,
) -> DVector<f64> {
    let d = mean.len();
    let q = chol * chol.transpose();
    let grad_mu = &q * (s - mean * w);
    let m = s2 - s * mean.transpose() - mean * s.transpose() + mean * mean.transpose() * w;
    let ml = &m * chol;
    let mut out = Vec::with_capacity(d + d * (d + 1) / 2);
    out.extend(grad_mu.iter());
    for i in 0..d {
        for j in 0..=i {
            if i == j {
                // d/d(log L_ii) = L_ii · (W/L_ii − (M L)_ii) = W − (M L)_ii L_ii.
                out.push(w - ml[(i, i)] * chol[(i, i)]);
            } else {
                out.push(-ml[(i, j)]);
            }
        }
    }
    DVector::from_vec(out)
}

/// Gradient of the weighted NIG log-likelihood of one class in packed
/// coordinates (location, factor with log diagonal, skew, log κ).
pub(crate) fn nig_class_grad(
    p: &NigClassParams,
    grid: &VolumeGrid,
    nb: &Neighborhood,
    probs: &[f64],
    k_total: usize,
    class: usize,
    chans: &[usize],
) -> DVector<f64> {
    let d = p.dim();
    let order = -((d + 1) as f64) / 2.0;
    let chol = p.chol().clone();
    let loc = p.loc().clone();
    let skew = p.skew().clone();
    let kurt = p.kurt();
    let lt_g = chol.tr_mul(&skew); // Lᵀγ
    let q_g = &chol * &lt_g; // Qγ
    let a = lt_g.norm_squared() + 2.0;
    let n = nb.len();
    let n_chunks = n.div_ceil(CHUNK);

    // Per-voxel terms with their weight-proportional parts deferred:
    // ∇λ = −Qγ − 2c_b Qr, ∇γ = Qr + 2c_a Qγ, ∇lnκ = ½ + √(κ/2) + κ c_b,
    // ∇L = diag(1/L_ii) + r(Lᵀγ + 2c_b Lᵀr)ᵀ + γ(Lᵀr + 2c_a Lᵀγ)ᵀ.
    // Partial = (∇λ, ∇γ, ∇lnκ, ∇L matrix part, total weight).
    let partials: Vec<(DVector<f64>, DVector<f64>, f64, DMatrix<f64>, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut g_loc = DVector::zeros(d);
            let mut g_skew = DVector::zeros(d);
            let mut g_lkurt = 0.0;
            let mut g_l = DMatrix::zeros(d, d);
            let mut w_sum = 0.0;
            let mut ca_sum = 0.0;
            for rank in ci * CHUNK..((ci + 1) * CHUNK).min(n) {
                let wi = probs[rank * k_total + class];
                if wi <= WEIGHT_FLOOR {
                    continue;
                }
                let x = grid.voxel_channels(nb.site(rank), chans);
                let r = &x - &loc;
                let u = chol.tr_mul(&r); // Lᵀr
                let b = u.norm_squared() + kurt;
                let s = (a * b).sqrt();
                let (lk0, lk1) = log_bessel_k_pair(order, s);
                let rho = (lk1 - lk0).exp();
                let common = order / s - rho;
                let cb = common * a / (2.0 * s) + order / (2.0 * b);
                let ca = common * b / (2.0 * s) - order / (2.0 * a);
                let q_r = &chol * &u; // Qr
                g_loc.axpy(-2.0 * cb * wi, &q_r, 1.0);
                g_skew.axpy(wi, &q_r, 1.0);
                g_lkurt += wi * kurt * cb;
                let col1 = &lt_g + &u * (2.0 * cb);
                let col2 = &u + &lt_g * (2.0 * ca);
                g_l.ger(wi, &r, &col1, 1.0);
                g_l.ger(wi, &skew, &col2, 1.0);
                w_sum += wi;
                ca_sum += wi * ca;
            }
            // Weight-proportional pieces, folded once per chunk.
            g_loc.axpy(-w_sum, &q_g, 1.0);
            g_skew.axpy(2.0 * ca_sum, &q_g, 1.0);
            g_lkurt += w_sum * (0.5 + (kurt / 2.0).sqrt());
            (g_loc, g_skew, g_lkurt, g_l, w_sum)
        })
        .collect();

    let mut g_loc = DVector::zeros(d);
    let mut g_skew = DVector::zeros(d);
    let mut g_lkurt = 0.0;
    let mut g_l = DMatrix::zeros(d, d);
    let mut w_total = 0.0;
    for (pl, ps, pk, pm, pw) in partials {
        g_loc += pl;
        g_skew += ps;
        g_lkurt += pk;
        g_l += pm;
        w_total += pw;
    }

    let mut out = Vec::with_capacity(d + d * (d + 1) / 2 + d + 1);
    out.extend(g_loc.iter());
    for i in 0..d {
        for j in 0..=i {
            let base = g_l[(i, j)] + if i == j { w_total / chol[(i, i)] } else { 0.0 };
            out.push(if i == j { base * chol[(i, i)] } else { base });
        }
    }
    out.extend(g_skew.iter());
    out.push(g_lkurt);
    DVector::from_vec(out)
}

/// Gradient of the Q function's data term with respect to the packed class
/// parameters; the MRF block of the returned vector is zero.
pub fn data_term_gradient(
    model: &MixtureModel,
    grid: &VolumeGrid,
    nb: &Neighborhood,
    post: &PosteriorField,
) -> Result<DVector<f64>> {
    let chans: Vec<usize> = (0..model.channels()).collect();
    let k = model.k();
    let mut grad = DVector::zeros(model.n_params());
    for c in 0..k {
        let block = model.class_block(c);
        let g = match model.class(c) {
            ClassParams::Gaussian(p) => {
                let (w, s, s2) = gauss_stats(grid, nb, &post.probs, k, c, &chans);
                gauss_grad_from_stats(p.mean(), p.chol(), w, &s, &s2)
            }
            ClassParams::Nig(p) => nig_class_grad(p, grid, nb, &post.probs, k, c, &chans),
        };
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite data-term gradient in class {c}"
            )));
        }
        grad.rows_mut(block.start, block.len()).copy_from(&g);
    }
    Ok(grad)
}

/// Gradient of the MRF Q term: (dα with dα[0] forced to 0, dβ).
///
/// Uses the retained neighbor-count samples when present; without them the
/// non-spatial reduction (zero counts, a single exact term) applies.
pub fn mrf_gradient(post: &PosteriorField, mrf: &MrfParams) -> Result<(DVector<f64>, f64)> {
    let k = mrf.k();
    let n = post.probs.len() / k;
    let zeros_row = vec![0.0f64; k];
    let mut d_alpha = DVector::zeros(k);
    let mut d_beta = 0.0f64;
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
                    let w = &post.probs[rank * k..(rank + 1) * k];
                    let mut p_dot_c = 0.0;
                    let mut w_dot_c = 0.0;
                    for c in 0..k {
                        d_alpha[c] += inv_j * (p[c] - w[c]);
                        p_dot_c += p[c] * counts[c] as f64;
                        w_dot_c += w[c] * counts[c] as f64;
                    }
                    d_beta += inv_j * (p_dot_c - w_dot_c);
                }
            }
        }
        None => {
            let pi = mrf.class_prior();
            for rank in 0..n {
                let w = &post.probs[rank * k..(rank + 1) * k];
                for c in 0..k {
                    d_alpha[c] += pi[c] - w[c];
                }
            }
        }
    }
    d_alpha[0] = 0.0;
    if d_alpha.iter().any(|v| !v.is_finite()) || !d_beta.is_finite() {
        return Err(Error::Numeric("non-finite MRF gradient".into()));
    }
    Ok((d_alpha, d_beta))
}

/// Full packed gradient: data term plus the MRF block.
pub fn full_gradient(
    model: &MixtureModel,
    grid: &VolumeGrid,
    nb: &Neighborhood,
    post: &PosteriorField,
) -> Result<DVector<f64>> {
    let mut grad = data_term_gradient(model, grid, nb, post)?;
    let (d_alpha, d_beta) = mrf_gradient(post, model.mrf())?;
    let block = model.mrf_block();
    for l in 1..model.k() {
        grad[block.start + l - 1] = d_alpha[l];
    }
    if model.spatial {
        grad[block.end - 1] = d_beta;
    }
    Ok(grad)
}

/// Q function at a candidate model, holding the posteriors (and the retained
/// neighbor samples) fixed: Σ_i Σ_k w_ik log f_k(x_i) plus the Monte Carlo
/// average of Σ_i Σ_k w_ik log π(Z_i = k | neighbors).
pub fn q_function(
    model: &MixtureModel,
    grid: &VolumeGrid,
    nb: &Neighborhood,
    post: &PosteriorField,
) -> Result<f64> {
    let k = model.k();
    let n = nb.len();
    let chans: Vec<usize> = (0..model.channels()).collect();
    let table = likelihood_table(&model.classes, grid, nb, &chans)?;

    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = 0.0;
            for rank in ci * CHUNK..((ci + 1) * CHUNK).min(n) {
                let row = table.row(rank);
                let w = &post.probs[rank * k..(rank + 1) * k];
                for c in 0..k {
                    if w[c] > WEIGHT_FLOOR {
                        acc += w[c] * row[c];
                    }
                }
            }
            acc
        })
        .collect();
    let mut q: f64 = partials.iter().sum();

    match &post.stats {
        Some(stats) if model.spatial => {
            let zeros_row = vec![0.0f64; k];
            let inv_j = 1.0 / stats.j() as f64;
            let mut counts = vec![0u32; k];
            for j in 0..stats.j() {
                for rank in 0..n {
                    let c8 = stats.counts(j, rank);
                    for c in 0..k {
                        counts[c] = c8[c] as u32;
                    }
                    let p = potts_conditional(model.mrf(), &counts, &zeros_row);
                    let w = &post.probs[rank * k..(rank + 1) * k];
                    for c in 0..k {
                        if w[c] > WEIGHT_FLOOR {
                            q += inv_j * w[c] * p[c].ln();
                        }
                    }
                }
            }
        }
        _ => {
            let pi = model.mrf().class_prior();
            let log_pi: Vec<f64> = pi.iter().map(|&p| p.ln()).collect();
            for rank in 0..n {
                let w = &post.probs[rank * k..(rank + 1) * k];
                for c in 0..k {
                    if w[c] > WEIGHT_FLOOR {
                        q += w[c] * log_pi[c];
                    }
                }
            }
        }
    }
    if !q.is_finite() {
        return Err(Error::Numeric("non-finite Q value".into()));
    }
    Ok(q)
}
