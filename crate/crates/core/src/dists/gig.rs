//! Inverse Gaussian and generalized inverse Gaussian distributions.
//!
//! The one-parameter IG(κ, δ = √(κ/2)) is the mixing law of the NIG
//! representation; the GIG(ν, a, b) arises as the conditional law of the
//! mixing variable given the predictor channels and drives both the median
//! predictor and the variance-reduced CRPS estimator.

use rand::Rng;
use rand_distr::{Distribution, InverseGaussian};

use crate::dists::bessel::{log_bessel_k, log_bessel_k_pair};
use crate::error::{Error, Result};

/// Parameters of GIG(ν, a, b): density ∝ x^{ν−1} exp(−(a x + b/x)/2), x > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub order: f64,
    pub a: f64,
    pub b: f64,
}

impl GigParams {
    pub fn new(order: f64, a: f64, b: f64) -> Result<Self> {
        if !order.is_finite() || !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Parameter(format!(
                "invalid GIG parameters: order={order}, a={a}, b={b}"
            )));
        }
        Ok(Self { order, a, b })
    }

    /// (E[X], E[X²]) via Bessel ratios in log space.
    pub fn moments(&self) -> (f64, f64) {
        let s = (self.a * self.b).sqrt();
        let (lk0, lk1) = log_bessel_k_pair(self.order, s);
        let lk2 = log_bessel_k(self.order + 2.0, s);
        let r = (self.b / self.a).sqrt();
        let mean = r * (lk1 - lk0).exp();
        let second = r * r * (lk2 - lk0).exp();
        (mean, second)
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }

    /// Unnormalized log density x^{ν−1} exp(−(a x + b/x)/2).
    fn log_kernel(&self, x: f64) -> f64 {
        (self.order - 1.0) * x.ln() - 0.5 * (self.a * x + self.b / x)
    }

    /// Normalized log density.
    pub fn logpdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let s = (self.a * self.b).sqrt();
        let log_norm =
            0.5 * self.order * (self.a / self.b).ln() - (2.0f64).ln() - log_bessel_k(self.order, s);
        log_norm + self.log_kernel(x)
    }

    /// Mode of the density.
    pub fn mode(&self) -> f64 {
        let t = self.order - 1.0;
        (t + (t * t + self.a * self.b).sqrt()) / self.a
    }

    /// One draw via the mode-shifted ratio-of-uniforms sampler.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        GigSampler::new(*self).sample(rng)
    }
}

/// Ratio-of-uniforms sampler for GIG with cached acceptance-region bounds.
///
/// The region {(u, v): 0 < u ≤ √(h(m + v/u))} with h the mode-normalized
/// kernel is enclosed in [0, 1] × [v_lo, v_hi]; the bounds come from
/// bisection on 2 + (x − m) g'(x) = 0 and the box is inflated slightly so
/// rejection stays exact.
#[derive(Debug, Clone)]
pub struct GigSampler {
    params: GigParams,
    mode: f64,
    log_h_mode: f64,
    v_lo: f64,
    v_hi: f64,
}

impl GigSampler {
    pub fn new(params: GigParams) -> Self {
        let m = params.mode();
        let log_h_mode = params.log_kernel(m);
        // g'(x) of the log kernel.
        let gp = |x: f64| (params.order - 1.0) / x - 0.5 * params.a + 0.5 * params.b / (x * x);
        // Roots of phi(x) = 2 + (x - m) g'(x); phi(m) = 2.
        let phi = |x: f64| 2.0 + (x - m) * gp(x);
        let v_at = |x: f64| (x - m) * (0.5 * (params.log_kernel(x) - log_h_mode)).exp();

        // Upper root: double away from the mode until phi < 0.
        let mut hi = m + 0.1 * (m + 1.0);
        let mut guard = 0;
        while phi(hi) > 0.0 && guard < 400 {
            hi = m + 2.0 * (hi - m);
            guard += 1;
        }
        let mut lo = m;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v_hi = v_at(0.5 * (lo + hi)).max(v_at(hi)) * (1.0 + 1e-9) + 1e-300;

        // Lower root in (0, m).
        let mut lo2 = m * 1e-12;
        let mut hi2 = m;
        while phi(lo2) > 0.0 && lo2 > f64::MIN_POSITIVE * 1e10 {
            lo2 *= 1e-3;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo2 + hi2);
            if phi(mid) > 0.0 {
                hi2 = mid;
            } else {
                lo2 = mid;
            }
        }
        let v_lo = v_at(0.5 * (lo2 + hi2)).min(v_at(lo2)) * (1.0 + 1e-9) - 1e-300;

        Self {
            params,
            mode: m,
            log_h_mode,
            v_lo,
            v_hi,
        }
    }

    pub fn params(&self) -> GigParams {
        self.params
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        loop {
            let u: f64 = rng.gen::<f64>();
            if u == 0.0 {
                continue;
            }
            let v = self.v_lo + (self.v_hi - self.v_lo) * rng.gen::<f64>();
            let x = self.mode + v / u;
            if x <= 0.0 || !x.is_finite() {
                continue;
            }
            if 2.0 * u.ln() <= self.params.log_kernel(x) - self.log_h_mode {
                return x;
            }
        }
    }
}

/// One draw from IG(κ, δ = √(κ/2)), the one-parameter mixing law.
///
/// Uses the χ²-root transform with the uniform acceptance branch.
pub fn ig_sample(kurt: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(kurt > 0.0) || !kurt.is_finite() {
        return Err(Error::Parameter(format!("kurtosis must be positive, got {kurt}")));
    }
    let mean = (kurt / 2.0).sqrt();
    let ig = InverseGaussian::new(mean, kurt)
        .map_err(|e| Error::Parameter(format!("inverse Gaussian setup: {e:?}")))?;
    Ok(ig.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ig_mean_matches_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(kurt, delta) in &[(2.0, 1.0), (8.0, 2.0)] {
            let n = 100_000;
            let draws: Vec<f64> = (0..n).map(|_| ig_sample(kurt, &mut rng).unwrap()).collect();
            assert!(draws.iter().all(|&v| v > 0.0));
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - delta).abs() < 3.0 * se,
                "kurt={kurt}: mean {mean} vs {delta} (se {se})"
            );
        }
    }

    #[test]
    fn ig_rejects_nonpositive_kurt() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(ig_sample(0.0, &mut rng).is_err());
        assert!(ig_sample(-1.0, &mut rng).is_err());
    }

    #[test]
    fn gig_moments_ig_special_cases() {
        // ν = -1/2, a = b: mean = 1 by Bessel half-order symmetry.
        let p = GigParams::new(-0.5, 2.0, 2.0).unwrap();
        assert_relative_eq!(p.mean(), 1.0, max_relative = 1e-12);
        // ν = -1/2, a = 8, b = 2: mean = sqrt(b/a) = 0.5.
        let p = GigParams::new(-0.5, 8.0, 2.0).unwrap();
        assert_relative_eq!(p.mean(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn gig_moment_inequality() {
        for &(nu, a, b) in &[(1.0, 1.0, 1.0), (-3.0, 3.0, 5.0), (0.5, 10.0, 0.1)] {
            let p = GigParams::new(nu, a, b).unwrap();
            let (m1, m2) = p.moments();
            assert!(m1 > 0.0 && m2 > 0.0);
            assert!(m2 >= m1 * m1);
        }
    }

    #[test]
    fn gig_sampler_matches_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(nu, a, b) in &[(-0.5, 2.0, 2.0), (-3.0, 3.0, 5.0), (1.0, 1.0, 1.0), (-2.5, 0.5, 40.0)] {
            let p = GigParams::new(nu, a, b).unwrap();
            let sampler = GigSampler::new(p);
            let n = 100_000;
            let draws: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
            assert!(draws.iter().all(|&v| v > 0.0));
            let (m1, m2) = p.moments();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = m2 - m1 * m1;
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - m1).abs() < 4.0 * se,
                "nu={nu},a={a},b={b}: mean {mean} vs {m1} (se {se})"
            );
            let emp_m2 = draws.iter().map(|v| v * v).sum::<f64>() / n as f64;
            let var_m2 = draws.iter().map(|v| (v * v - emp_m2).powi(2)).sum::<f64>() / n as f64;
            let se2 = (var_m2 / n as f64).sqrt();
            assert!(
                (emp_m2 - m2).abs() < 4.0 * se2,
                "nu={nu},a={a},b={b}: m2 {emp_m2} vs {m2}"
            );
        }
    }

    #[test]
    fn gig_logpdf_normalizes() {
        // Trapezoid mass over a generous window.
        let p = GigParams::new(-1.5, 2.0, 3.0).unwrap();
        let (m1, m2) = p.moments();
        let sd = (m2 - m1 * m1).sqrt();
        let lo = 1e-9;
        let hi = m1 + 40.0 * sd;
        let n = 400_000;
        let h = (hi - lo) / n as f64;
        let mut mass = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            mass += w * p.logpdf(x).exp();
        }
        mass *= h;
        assert_relative_eq!(mass, 1.0, max_relative = 1e-6);
    }
}
