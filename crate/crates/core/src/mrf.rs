//! Potts Markov random field prior on the latent label field, blocked
//! checkerboard Gibbs sampling, and Rao-Blackwellized posterior estimation.
//!
//! The full conditional at site i combines the class data terms t_ik with
//! the prior potentials:
//!
//!   P(Z_i = k | rest) ∝ exp(t_ik − α_k − β n_k(i))
//!
//! where n_k(i) counts in-mask neighbors of i currently labeled k. Negative
//! β means spatial attraction. The joint prior (up to the intractable
//! normalizing constant) is exp(−Σ_i α_{z_i} − (β/2) Σ_i n_{z_i}(i)).
//! α is identified by pinning α_0 = 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{mix_seed, sample_categorical, LabelField, Neighborhood};

/// Potts parameters: per-class external potentials α (α_0 pinned to 0) and
/// the interaction strength β shared across classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrfParams {
    pub alpha: Vec<f64>,
    pub beta: f64,
}

impl MrfParams {
    pub fn new(alpha: Vec<f64>, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    /// Uniform potentials, no interaction.
    pub fn flat(k: usize) -> Self {
        Self {
            alpha: vec![0.0; k],
            beta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() {
            return Err(Error::Parameter("alpha must have at least one class".into()));
        }
        if self.alpha.iter().any(|v| !v.is_finite()) || !self.beta.is_finite() {
            return Err(Error::Parameter("non-finite MRF parameter".into()));
        }
        if self.alpha[0] != 0.0 {
            return Err(Error::Parameter(format!(
                "alpha[0] must be pinned to 0, got {}",
                self.alpha[0]
            )));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// Class probabilities of an isolated site: softmax(−α).
    pub fn class_prior(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.alpha.iter().map(|&a| -a).collect();
        softmax_in_place(&mut p);
        p
    }
}

/// Per-site, per-class log data terms t_ik, indexed by in-mask rank.
#[derive(Debug, Clone)]
pub struct LikelihoodTable {
    k: usize,
    loglik: Vec<f64>,
}

impl LikelihoodTable {
    pub fn zeros(n_ranks: usize, k: usize) -> Self {
        Self {
            k,
            loglik: vec![0.0; n_ranks * k],
        }
    }

    pub fn from_raw(loglik: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || loglik.len() % k != 0 {
            return Err(Error::Usage("log-likelihood table shape mismatch".into()));
        }
        Ok(Self { k, loglik })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_ranks(&self) -> usize {
        self.loglik.len() / self.k
    }

    #[inline]
    pub fn row(&self, rank: usize) -> &[f64] {
        &self.loglik[rank * self.k..(rank + 1) * self.k]
    }

    #[inline]
    pub fn row_mut(&mut self, rank: usize) -> &mut [f64] {
        &mut self.loglik[rank * self.k..(rank + 1) * self.k]
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

/// Full-conditional class probabilities given neighbor class counts and a
/// log data-term row (pass zeros for the prior conditional).
pub fn potts_conditional(mrf: &MrfParams, counts: &[u32], data_row: &[f64]) -> Vec<f64> {
    let k = mrf.k();
    debug_assert_eq!(counts.len(), k);
    debug_assert_eq!(data_row.len(), k);
    let mut p: Vec<f64> = (0..k)
        .map(|c| data_row[c] - mrf.alpha[c] - mrf.beta * counts[c] as f64)
        .collect();
    softmax_in_place(&mut p);
    p
}

/// Unnormalized log joint prior of a label configuration.
pub fn potts_log_density_unnorm(labels: &LabelField, nb: &Neighborhood, mrf: &MrfParams) -> f64 {
    let mut total = 0.0;
    for rank in 0..nb.len() {
        let z = labels.get(nb.site(rank));
        let mut same = 0u32;
        for &nbr in nb.neighbors(rank) {
            if labels.get(nbr as usize) == z {
                same += 1;
            }
        }
        total -= mrf.alpha[z as usize] + 0.5 * mrf.beta * same as f64;
    }
    total
}

/// Deterministic per-(seed, sweep, site) RNG stream.
pub fn stream_rng(seed: u64, sweep: u64, rank: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, sweep.wrapping_add(0x706f747473), rank))
}

fn neighbor_counts(labels: &LabelField, nb: &Neighborhood, rank: usize, counts: &mut [u32]) {
    counts.fill(0);
    for &nbr in nb.neighbors(rank) {
        let z = labels.get(nbr as usize);
        if (z as usize) < counts.len() {
            counts[z as usize] += 1;
        }
    }
}

/// One blocked Gibbs sweep: all black sites, then all white sites. Sites of
/// one color are conditionally independent given the other, so each phase is
/// sampled in parallel; results are bit-reproducible because every site owns
/// its own counter-based RNG stream.
pub fn gibbs_sweep(
    labels: &mut LabelField,
    nb: &Neighborhood,
    table: &LikelihoodTable,
    mrf: &MrfParams,
    seed: u64,
    sweep: u64,
) {
    let k = mrf.k();
    for phase in [nb.black_ranks(), nb.white_ranks()] {
        let updates: Vec<(usize, u8)> = phase
            .par_iter()
            .map(|&rank32| {
                let rank = rank32 as usize;
                let mut counts = vec![0u32; k];
                neighbor_counts(labels, nb, rank, &mut counts);
                let p = potts_conditional(mrf, &counts, table.row(rank));
                let mut rng = stream_rng(seed, sweep, rank as u64);
                let u: f64 = rng.gen();
                (nb.site(rank), sample_categorical(&p, u))
            })
            .collect();
        for (site, label) in updates {
            labels.set(site, label);
        }
    }
}

/// Neighbor class counts retained from each post-burn-in sweep, consumed by
/// the MRF score, gradient and Hessian computations.
#[derive(Debug, Clone)]
pub struct GibbsSampleStats {
    j: usize,
    k: usize,
    n: usize,
    /// Layout: sample-major, then rank, then class.
    counts: Vec<u8>,
}

impl GibbsSampleStats {
    pub fn j(&self) -> usize {
        self.j
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_ranks(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn counts(&self, sample: usize, rank: usize) -> &[u8] {
        let off = (sample * self.n + rank) * self.k;
        &self.counts[off..off + self.k]
    }
}

/// Marginal posterior label probabilities per in-mask site.
#[derive(Debug, Clone)]
pub struct PosteriorField {
    /// Rank-major, class-minor; rows sum to 1.
    pub probs: Vec<f64>,
    /// Label state after the final sweep, reusable as a warm start.
    pub final_labels: LabelField,
    pub sample_count: usize,
    pub stats: Option<GibbsSampleStats>,
}

impl PosteriorField {
    pub fn k(&self) -> usize {
        self.final_labels.k()
    }

    #[inline]
    pub fn row(&self, rank: usize) -> &[f64] {
        let k = self.k();
        &self.probs[rank * k..(rank + 1) * k]
    }
}

/// Rao-Blackwellized posterior estimation by blocked Gibbs.
///
/// Runs `burnin` discarded sweeps followed by `sweeps` retained ones; after
/// each retained sweep the exact full-conditional probabilities are
/// accumulated instead of the sampled indicator, which sharply reduces the
/// variance for small sweep counts. With β = 0 the conditionals do not
/// depend on the neighbors and a single retained sweep is already exact.
#[allow(clippy::too_many_arguments)]
pub fn estimate_posteriors(
    nb: &Neighborhood,
    table: &LikelihoodTable,
    mrf: &MrfParams,
    init: Option<&LabelField>,
    sweeps: usize,
    burnin: usize,
    seed: u64,
    keep_stats: bool,
) -> Result<PosteriorField> {
    let k = mrf.k();
    let n = nb.len();
    if table.k() != k || table.n_ranks() != n {
        return Err(Error::Usage("likelihood table shape mismatch".into()));
    }
    if sweeps == 0 {
        return Err(Error::Usage("at least one retained sweep required".into()));
    }

    let mut labels = match init {
        Some(l) => {
            if l.k() != k || l.labels().len() != nb.n_lattice() {
                return Err(Error::Usage("warm-start label field shape mismatch".into()));
            }
            l.clone()
        }
        None => {
            // Site-wise argmax of the non-spatial posterior.
            let mut l = LabelField::sentinel(nb.n_lattice(), k);
            for rank in 0..n {
                let row = table.row(rank);
                let mut best = 0usize;
                let mut best_v = f64::NEG_INFINITY;
                for c in 0..k {
                    let v = row[c] - mrf.alpha[c];
                    if v > best_v {
                        best_v = v;
                        best = c;
                    }
                }
                l.set(nb.site(rank), best as u8);
            }
            l
        }
    };

    for sweep in 0..burnin {
        gibbs_sweep(&mut labels, nb, table, mrf, seed, sweep as u64);
    }

    let mut probs = vec![0.0f64; n * k];
    let mut stats_counts = if keep_stats {
        Vec::with_capacity(sweeps * n * k)
    } else {
        Vec::new()
    };
    for s in 0..sweeps {
        gibbs_sweep(&mut labels, nb, table, mrf, seed, (burnin + s) as u64);
        for rank in 0..n {
            let mut counts = vec![0u32; k];
            neighbor_counts(&labels, nb, rank, &mut counts);
            let p = potts_conditional(mrf, &counts, table.row(rank));
            for c in 0..k {
                probs[rank * k + c] += p[c];
            }
            if keep_stats {
                for c in 0..k {
                    stats_counts.push(counts[c].min(255) as u8);
                }
            }
        }
    }
    let inv = 1.0 / sweeps as f64;
    for p in &mut probs {
        *p *= inv;
    }
    Ok(PosteriorField {
        probs,
        final_labels: labels,
        sample_count: sweeps,
        stats: keep_stats.then_some(GibbsSampleStats {
            j: sweeps,
            k,
            n,
            counts: stats_counts,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cube_nb(side: usize) -> Neighborhood {
        let n = side * side * side;
        Neighborhood::from_mask((side, side, side), &vec![true; n])
    }

    #[test]
    fn conditional_matches_hand_value() {
        // Two classes, all six neighbors in class 0, β = −1:
        // P(0) = e⁶ / (1 + e⁶).
        let mrf = MrfParams::new(vec![0.0, 0.0], -1.0).unwrap();
        let p = potts_conditional(&mrf, &[6, 0], &[0.0, 0.0]);
        let expect = (6.0f64).exp() / (1.0 + (6.0f64).exp());
        assert_relative_eq!(p[0], expect, max_relative = 1e-12);
        assert_relative_eq!(p[0], 0.99752738, max_relative = 1e-7);
    }

    #[test]
    fn zero_beta_conditional_is_softmax_of_alpha() {
        let mrf = MrfParams::new(vec![0.0, 1.0, -0.5], 0.0).unwrap();
        let p = potts_conditional(&mrf, &[3, 1, 2], &[0.0, 0.0, 0.0]);
        assert_eq!(p, mrf.class_prior());
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn alpha_pin_enforced() {
        assert!(MrfParams::new(vec![0.5, 0.0], -0.5).is_err());
        assert!(MrfParams::new(vec![0.0, 0.3], -0.5).is_ok());
    }

    #[test]
    fn sweep_is_deterministic() {
        let nb = cube_nb(6);
        let mrf = MrfParams::new(vec![0.0, 0.4], -0.7).unwrap();
        let table = LikelihoodTable::zeros(nb.len(), 2);
        let mut a = LabelField::sentinel(nb.n_lattice(), 2);
        for rank in 0..nb.len() {
            a.set(nb.site(rank), (rank % 2) as u8);
        }
        let mut b = a.clone();
        for sweep in 0..5 {
            gibbs_sweep(&mut a, &nb, &table, &mrf, 99, sweep);
            gibbs_sweep(&mut b, &nb, &table, &mrf, 99, sweep);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn attraction_raises_neighbor_agreement() {
        let nb = cube_nb(8);
        let agreement = |beta: f64| {
            let mrf = MrfParams::new(vec![0.0, 0.0], beta).unwrap();
            let table = LikelihoodTable::zeros(nb.len(), 2);
            let post = estimate_posteriors(&nb, &table, &mrf, None, 20, 30, 7, false).unwrap();
            let labels = &post.final_labels;
            let mut same = 0usize;
            let mut pairs = 0usize;
            for rank in 0..nb.len() {
                let z = labels.get(nb.site(rank));
                for &nbr in nb.neighbors(rank) {
                    pairs += 1;
                    if labels.get(nbr as usize) == z {
                        same += 1;
                    }
                }
            }
            same as f64 / pairs as f64
        };
        let frac_attract = agreement(-0.9);
        let frac_indep = agreement(0.0);
        assert!(
            frac_attract > frac_indep + 0.1,
            "attraction {frac_attract} vs independent {frac_indep}"
        );
    }

    #[test]
    fn zero_beta_posterior_is_exact_softmax() {
        let nb = cube_nb(3);
        let k = 3;
        let mrf = MrfParams::new(vec![0.0, 0.2, -0.1], 0.0).unwrap();
        let mut table = LikelihoodTable::zeros(nb.len(), k);
        for rank in 0..nb.len() {
            let row = table.row_mut(rank);
            for c in 0..k {
                row[c] = ((rank * 7 + c * 3) % 5) as f64 * 0.3 - 1.0;
            }
        }
        let post = estimate_posteriors(&nb, &table, &mrf, None, 1, 0, 1, false).unwrap();
        for rank in 0..nb.len() {
            let expect = potts_conditional(&mrf, &[0, 0, 0], table.row(rank));
            for c in 0..k {
                assert_relative_eq!(post.row(rank)[c], expect[c], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn log_density_prefers_aligned_configs_under_attraction() {
        let nb = cube_nb(4);
        let mrf = MrfParams::new(vec![0.0, 0.0], -0.8).unwrap();
        let mut uniform = LabelField::sentinel(nb.n_lattice(), 2);
        let mut checker = LabelField::sentinel(nb.n_lattice(), 2);
        for rank in 0..nb.len() {
            uniform.set(nb.site(rank), 0);
            checker.set(nb.site(rank), nb.color(rank));
        }
        assert!(
            potts_log_density_unnorm(&uniform, &nb, &mrf)
                > potts_log_density_unnorm(&checker, &nb, &mrf)
        );
    }

    #[test]
    fn stats_counts_are_consistent_with_final_labels() {
        let nb = cube_nb(4);
        let mrf = MrfParams::new(vec![0.0, 0.1], -0.5).unwrap();
        let table = LikelihoodTable::zeros(nb.len(), 2);
        let post = estimate_posteriors(&nb, &table, &mrf, None, 3, 2, 11, true).unwrap();
        let stats = post.stats.as_ref().unwrap();
        assert_eq!(stats.j(), 3);
        // Counts of the last sample must match the retained final labels.
        for rank in 0..nb.len() {
            let mut counts = [0u8; 2];
            for &nbr in nb.neighbors(rank) {
                counts[post.final_labels.get(nbr as usize) as usize] += 1;
            }
            assert_eq!(stats.counts(2, rank), &counts[..]);
        }
    }
}
