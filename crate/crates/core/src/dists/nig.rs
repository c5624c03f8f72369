//! Multivariate normal-inverse-Gaussian class distribution and the
//! generalized hyperbolic law obtained by conditioning on a channel subset.
//!
//! A d-dimensional NIG(λ, Q, γ, κ) variable has the mixture representation
//! X = λ + γV + √V · Q^{-1/2} Z with V ~ IG(κ, √(κ/2)) and Z standard
//! normal. Its density is
//!
//!   f(x) = √(κ |Q|) (2π)^{-(d+1)/2} exp((x−λ)ᵀQγ + √(2κ))
//!          · 2 K_ν(√(ab)) (b/a)^{ν/2}
//!
//! with ν = −(d+1)/2, a = γᵀQγ + 2 and b = (x−λ)ᵀQ(x−λ) + κ. Marginals over
//! channel subsets stay NIG with the same κ; conditionals are generalized
//! hyperbolic with a GIG mixing law, which is what the predictor consumes.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::dists::bessel::log_bessel_k;
use crate::dists::gig::{ig_sample, GigParams, GigSampler};
use crate::dists::{check_chol_factor, select_mat, select_vec, std_normal_vec};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct NigClassParams {
    loc: DVector<f64>,
    /// Lower-triangular factor L of the precision Q = L·Lᵀ.
    chol: DMatrix<f64>,
    skew: DVector<f64>,
    kurt: f64,
}

impl NigClassParams {
    pub fn new(
        loc: DVector<f64>,
        chol: DMatrix<f64>,
        skew: DVector<f64>,
        kurt: f64,
    ) -> Result<Self> {
        let d = loc.len();
        if chol.nrows() != d || skew.len() != d {
            return Err(Error::Parameter("NIG parameter dimension mismatch".into()));
        }
        if loc.iter().chain(skew.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite NIG location or skew".into()));
        }
        if !(kurt > 0.0) || !kurt.is_finite() {
            return Err(Error::Parameter(format!(
                "NIG kurtosis must be positive, got {kurt}"
            )));
        }
        check_chol_factor(&chol)?;
        Ok(Self {
            loc,
            chol,
            skew,
            kurt,
        })
    }

    pub fn from_precision(
        loc: DVector<f64>,
        prec: &DMatrix<f64>,
        skew: DVector<f64>,
        kurt: f64,
    ) -> Result<Self> {
        let chol = Cholesky::new(prec.clone())
            .ok_or_else(|| Error::Parameter("precision matrix is not positive definite".into()))?;
        Self::new(loc, chol.l(), skew, kurt)
    }

    pub fn dim(&self) -> usize {
        self.loc.len()
    }

    pub fn loc(&self) -> &DVector<f64> {
        &self.loc
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn skew(&self) -> &DVector<f64> {
        &self.skew
    }

    pub fn kurt(&self) -> f64 {
        self.kurt
    }

    pub fn prec(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    /// Σ = Q⁻¹, the scale matrix of the Gaussian component.
    pub fn scale(&self) -> DMatrix<f64> {
        let d = self.dim();
        Cholesky::new(self.prec())
            .map(|c| c.inverse())
            .unwrap_or_else(|| DMatrix::identity(d, d))
    }

    /// E[V] = √(κ/2) of the mixing variable.
    pub fn mixing_mean(&self) -> f64 {
        (self.kurt / 2.0).sqrt()
    }

    /// Var(V) = √(κ/2)/2 of the mixing variable.
    pub fn mixing_var(&self) -> f64 {
        0.5 * (self.kurt / 2.0).sqrt()
    }

    pub fn mean(&self) -> DVector<f64> {
        &self.loc + &self.skew * self.mixing_mean()
    }

    pub fn cov(&self) -> DMatrix<f64> {
        self.scale() * self.mixing_mean() + (&self.skew * self.skew.transpose()) * self.mixing_var()
    }

    pub fn log_det_prec(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite observation".into()));
        }
        let d = self.dim() as f64;
        let order = -(d + 1.0) / 2.0;
        let r = x - &self.loc;
        let lt_r = self.chol.tr_mul(&r); // Lᵀ r
        let lt_g = self.chol.tr_mul(&self.skew); // Lᵀ γ
        let a = lt_g.norm_squared() + 2.0;
        let b = lt_r.norm_squared() + self.kurt;
        let s = (a * b).sqrt();
        Ok(0.5 * (self.kurt.ln() + self.log_det_prec())
            - 0.5 * (d + 1.0) * LN_2PI
            + lt_r.dot(&lt_g)
            + (2.0 * self.kurt).sqrt()
            + std::f64::consts::LN_2
            + log_bessel_k(order, s)
            + 0.5 * order * (b.ln() - a.ln()))
    }

    /// One draw via the mixture representation.
    pub fn sample(&self, rng: &mut impl Rng) -> Result<DVector<f64>> {
        let v = ig_sample(self.kurt, rng)?;
        let z = std_normal_vec(self.dim(), rng);
        let w = self
            .chol
            .transpose()
            .solve_upper_triangular(&z)
            .expect("factor has positive diagonal");
        Ok(&self.loc + &self.skew * v + w * v.sqrt())
    }

    /// Marginal over the kept channel subset: NIG with precision (Σ_BB)⁻¹
    /// and the same kurtosis.
    pub fn marginal(&self, keep: &[usize]) -> Result<NigClassParams> {
        let scale = self.scale();
        let scale_bb = select_mat(&scale, keep, keep);
        let prec = Cholesky::new(scale_bb)
            .ok_or_else(|| Error::Numeric("singular scale block".into()))?
            .inverse();
        NigClassParams::from_precision(
            select_vec(&self.loc, keep),
            &prec,
            select_vec(&self.skew, keep),
            self.kurt,
        )
    }

    /// Conditional law of the A channels given x_B.
    pub fn conditional(
        &self,
        a_idx: &[usize],
        b_idx: &[usize],
        x_b: &DVector<f64>,
    ) -> Result<GhConditional> {
        if x_b.len() != b_idx.len() {
            return Err(Error::Usage("conditioning vector length mismatch".into()));
        }
        if x_b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite conditioning value".into()));
        }
        let scale = self.scale();
        let scale_bb = select_mat(&scale, b_idx, b_idx);
        let chol_sbb: Cholesky<f64, Dyn> = Cholesky::new(scale_bb)
            .ok_or_else(|| Error::Numeric("singular scale block".into()))?;
        let resid = x_b - select_vec(&self.loc, b_idx);
        let skew_b = select_vec(&self.skew, b_idx);
        let a_hat = skew_b.dot(&chol_sbb.solve(&skew_b)) + 2.0;
        let b_hat = resid.dot(&chol_sbb.solve(&resid)) + self.kurt;
        let order = -((b_idx.len() + 1) as f64) / 2.0;

        let prec = self.prec();
        let q_aa = select_mat(&prec, a_idx, a_idx);
        let q_ab = select_mat(&prec, a_idx, b_idx);
        let chol_qaa: Cholesky<f64, Dyn> = Cholesky::new(q_aa)
            .ok_or_else(|| Error::Numeric("singular Q_AA block".into()))?;
        let loc = select_vec(&self.loc, a_idx) - chol_qaa.solve(&(&q_ab * resid));
        let skew = select_vec(&self.skew, a_idx) + chol_qaa.solve(&(&q_ab * skew_b));

        GhConditional::new(loc, chol_qaa.l(), skew, GigParams::new(order, a_hat, b_hat)?)
    }
}

/// Generalized hyperbolic law GH(λ̃, Q_AA, γ̃, ν̂, â, b̂): the conditional of
/// an NIG class over the predicted channels. Mixture form
/// X = λ̃ + γ̃V + √V · Q_AA^{-1/2} Z with V ~ GIG(ν̂, â, b̂).
#[derive(Debug, Clone, PartialEq)]
pub struct GhConditional {
    loc: DVector<f64>,
    /// Lower-triangular factor of Q_AA.
    chol: DMatrix<f64>,
    skew: DVector<f64>,
    gig: GigParams,
}

impl GhConditional {
    pub fn new(
        loc: DVector<f64>,
        chol: DMatrix<f64>,
        skew: DVector<f64>,
        gig: GigParams,
    ) -> Result<Self> {
        let d = loc.len();
        if chol.nrows() != d || skew.len() != d {
            return Err(Error::Parameter("GH parameter dimension mismatch".into()));
        }
        check_chol_factor(&chol)?;
        Ok(Self {
            loc,
            chol,
            skew,
            gig,
        })
    }

    pub fn dim(&self) -> usize {
        self.loc.len()
    }

    pub fn loc(&self) -> &DVector<f64> {
        &self.loc
    }

    pub fn skew(&self) -> &DVector<f64> {
        &self.skew
    }

    pub fn gig(&self) -> GigParams {
        self.gig
    }

    pub fn mean(&self) -> DVector<f64> {
        &self.loc + &self.skew * self.gig.mean()
    }

    pub fn cov(&self) -> DMatrix<f64> {
        let (m1, m2) = self.gig.moments();
        let d = self.dim();
        let prec = &self.chol * self.chol.transpose();
        let scale = Cholesky::new(prec)
            .map(|c| c.inverse())
            .unwrap_or_else(|| DMatrix::identity(d, d));
        scale * m1 + (&self.skew * self.skew.transpose()) * (m2 - m1 * m1)
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite observation".into()));
        }
        let p = self.dim() as f64;
        let r = x - &self.loc;
        let lt_r = self.chol.tr_mul(&r);
        let lt_g = self.chol.tr_mul(&self.skew);
        let GigParams { order, a, b } = self.gig;
        let a1 = a + lt_g.norm_squared();
        let b1 = b + lt_r.norm_squared();
        let order1 = order - p / 2.0;
        let log_det = 2.0 * self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(0.5 * log_det - 0.5 * p * LN_2PI
            + 0.5 * order * (a.ln() - b.ln())
            - log_bessel_k(order, (a * b).sqrt())
            + lt_r.dot(&lt_g)
            + log_bessel_k(order1, (a1 * b1).sqrt())
            + 0.5 * order1 * (b1.ln() - a1.ln()))
    }

    /// Sampler for the mixing variable, reusable across draws.
    pub fn mixing_sampler(&self) -> GigSampler {
        GigSampler::new(self.gig)
    }

    /// One draw given a prepared mixing sampler.
    pub fn sample_with(&self, mixing: &GigSampler, rng: &mut impl Rng) -> DVector<f64> {
        let v = mixing.sample(rng);
        let z = std_normal_vec(self.dim(), rng);
        let w = self
            .chol
            .transpose()
            .solve_upper_triangular(&z)
            .expect("factor has positive diagonal");
        &self.loc + &self.skew * v + w * v.sqrt()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> DVector<f64> {
        self.sample_with(&self.mixing_sampler(), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn demo() -> NigClassParams {
        let loc = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let prec = DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.4, 0.1, 0.4, 1.5, -0.3, 0.1, -0.3, 1.0],
        );
        let skew = DVector::from_vec(vec![0.3, -0.2, 0.6]);
        NigClassParams::from_precision(loc, &prec, skew, 3.0).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        let loc = DVector::from_vec(vec![0.0]);
        let skew = DVector::zeros(1);
        let l = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(NigClassParams::new(loc.clone(), l.clone(), skew.clone(), 0.0).is_err());
        assert!(NigClassParams::new(loc.clone(), l.clone(), skew.clone(), -1.0).is_err());
        let bad_l = DMatrix::from_row_slice(1, 1, &[-2.0]);
        assert!(NigClassParams::new(loc, bad_l, skew, 1.0).is_err());
    }

    #[test]
    fn chain_rule_joint_equals_marginal_times_conditional() {
        // log f(x) = log f_B(x_B) + log f_{A|B}(x_A | x_B), exactly.
        let p = demo();
        let x = DVector::from_vec(vec![1.1, -0.4, 2.7]);
        let joint = p.logpdf(&x).unwrap();
        let a_idx = [0usize];
        let b_idx = [1usize, 2];
        let x_b = DVector::from_vec(vec![x[1], x[2]]);
        let x_a = DVector::from_vec(vec![x[0]]);
        let marg = p.marginal(&b_idx).unwrap().logpdf(&x_b).unwrap();
        let cond = p.conditional(&a_idx, &b_idx, &x_b).unwrap();
        assert_relative_eq!(joint, marg + cond.logpdf(&x_a).unwrap(), max_relative = 1e-10);
    }

    #[test]
    fn sample_mean_matches_formula() {
        let p = demo();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut mean = DVector::zeros(3);
        for _ in 0..n {
            mean += p.sample(&mut rng).unwrap();
        }
        mean /= n as f64;
        let expect = p.mean();
        let cov = p.cov();
        for i in 0..3 {
            let se = (cov[(i, i)] / n as f64).sqrt();
            assert!(
                (mean[i] - expect[i]).abs() < 4.0 * se,
                "channel {i}: {} vs {}",
                mean[i],
                expect[i]
            );
        }
    }

    #[test]
    fn zero_skew_large_kurt_approaches_gaussian() {
        // With γ = 0 and large κ the law approaches N(λ, √(κ/2) Q⁻¹).
        let kurt = 2.0e6;
        let loc = DVector::from_vec(vec![1.0, -0.5]);
        let prec_gauss = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.8]);
        let ev = (kurt / 2.0f64).sqrt();
        let prec_nig = &prec_gauss * ev;
        let nig =
            NigClassParams::from_precision(loc.clone(), &prec_nig, DVector::zeros(2), kurt).unwrap();
        let gauss = crate::dists::gauss::GaussClassParams::from_precision(loc, &prec_gauss).unwrap();
        for xs in [[1.0, -0.5], [0.2, 0.4], [2.5, -1.8]] {
            let x = DVector::from_vec(xs.to_vec());
            let ln = nig.logpdf(&x).unwrap();
            let lg = gauss.logpdf(&x).unwrap();
            assert!((ln - lg).abs() < 5e-3, "{ln} vs {lg} at {xs:?}");
        }
    }

    #[test]
    fn gh_conditional_sample_moments() {
        let p = demo();
        let cond = p
            .conditional(&[0, 1], &[2], &DVector::from_vec(vec![2.4]))
            .unwrap();
        let mixing = cond.mixing_sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mut mean = DVector::zeros(2);
        for _ in 0..n {
            mean += cond.sample_with(&mixing, &mut rng);
        }
        mean /= n as f64;
        let expect = cond.mean();
        let cov = cond.cov();
        for i in 0..2 {
            let se = (cov[(i, i)] / n as f64).sqrt();
            assert!(
                (mean[i] - expect[i]).abs() < 4.0 * se,
                "channel {i}: {} vs {}",
                mean[i],
                expect[i]
            );
        }
    }

    #[test]
    fn marginal_of_all_channels_is_identity() {
        let p = demo();
        let m = p.marginal(&[0, 1, 2]).unwrap();
        let x = DVector::from_vec(vec![0.9, -1.2, 2.2]);
        assert_relative_eq!(
            m.logpdf(&x).unwrap(),
            p.logpdf(&x).unwrap(),
            max_relative = 1e-10
        );
    }
}
