//! Modified Bessel function of the second kind, K_ν, evaluated in log space.
//!
//! K_ν enters every NIG/GIG density and moment through ratios such as
//! K_{ν+1}(s)/K_ν(s) with s = √(ab). The argument grows with the squared
//! Mahalanobis distance of outlying voxels, so all evaluation is done on
//! log K_ν to stay finite for s up to (and beyond) 700, and ratios are
//! formed as exp(log K_{ν+1} − log K_ν).
//!
//! Method: Temme's series for s ≤ 2 and the Steed/Thompson-Barnett
//! continued fraction (CF2) for s > 2, both at a base order μ ∈ [−1/2, 1/2],
//! followed by the stable upward recurrence
//! K_{ν+1} = K_{ν−1} + (2ν/s) K_ν carried in log space.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 20_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// log(exp(a) + exp(b)) without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// ln K_ν(x) for real ν and x > 0.
pub fn log_bessel_k(nu: f64, x: f64) -> f64 {
    log_bessel_k_pair(nu, x).0
}

/// (ln K_ν(x), ln K_{ν+1}(x)).
pub fn log_bessel_k_pair(nu: f64, x: f64) -> (f64, f64) {
    assert!(x > 0.0 && x.is_finite(), "bessel argument must be positive");
    assert!(nu.is_finite(), "bessel order must be finite");
    if nu >= 0.0 {
        pair_nonneg(nu, x)
    } else if nu <= -1.0 {
        // K_{-m} = K_m: the pair (K_ν, K_{ν+1}) = (K_m, K_{m-1}).
        let m = -nu;
        let (lo, hi) = pair_nonneg(m - 1.0, x);
        (hi, lo)
    } else {
        // ν in (-1, 0): both orders reflect into [0, 1).
        (pair_nonneg(-nu, x).0, pair_nonneg(nu + 1.0, x).0)
    }
}

/// K_{ν+1}(x) / K_ν(x).
pub fn bessel_k_ratio(nu: f64, x: f64) -> f64 {
    let (lo, hi) = log_bessel_k_pair(nu, x);
    (hi - lo).exp()
}

/// Base evaluation plus upward recurrence, ν ≥ 0.
fn pair_nonneg(nu: f64, x: f64) -> (f64, f64) {
    let n = (nu + 0.5).floor() as usize;
    let mu = nu - n as f64; // in [-1/2, 1/2)
    let (mut lk0, mut lk1) = if x <= 2.0 {
        temme_series(mu, x)
    } else {
        steed_cf2(mu, x)
    };
    // K_{μ+i+1} = K_{μ+i-1} + (2(μ+i)/x) K_{μ+i}; all coefficients positive.
    for i in 1..=n {
        let order = mu + i as f64;
        let next = log_add_exp(lk0, (2.0 * order / x).ln() + lk1);
        lk0 = lk1;
        lk1 = next;
    }
    (lk0, lk1)
}

/// Temme's series for x ≤ 2, |μ| ≤ 1/2. Returns (ln K_μ, ln K_{μ+1}).
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < 1e-15 {
        1.0
    } else {
        pimu / pimu.sin()
    };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < 1e-15 { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let e = e.exp();
    let mut p = 0.5 * e / gampl;
    let mut q = 0.5 / (e * gammi);
    let mut c = 1.0;
    let dsq = x2 * x2;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..=MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= dsq / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln(), (sum1 * 2.0 / x).ln())
}

/// 1/Γ combinations used by the Temme series.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let gampl = (-ln_gamma(1.0 + mu)).exp();
    let gammi = (-ln_gamma(1.0 - mu)).exp();
    let gam2 = 0.5 * (gammi + gampl);
    let gam1 = if mu.abs() < 1e-6 {
        // Limit of (1/Γ(1-μ) - 1/Γ(1+μ))/(2μ) as μ → 0.
        -EULER_GAMMA
    } else {
        (gammi - gampl) / (2.0 * mu)
    };
    (gam1, gam2, gampl, gammi)
}

/// Steed's CF2 for x > 2, |μ| ≤ 1/2. Returns (ln K_μ, ln K_{μ+1}).
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let a1 = 0.25 - mu * mu;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=MAX_ITER {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    let h = a1 * h;
    let lk_mu = 0.5 * (PI / (2.0 * x)).ln() - x - s.ln();
    let lk_mu1 = lk_mu + ((mu + x + 0.5 - h) / x).ln();
    (lk_mu, lk_mu1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn half_order_closed_form() {
        // K_{1/2}(x) = sqrt(pi/(2x)) e^{-x}; K_{3/2}(x) = K_{1/2}(x) (1 + 1/x).
        for &x in &[1e-8, 1e-3, 0.5, 1.0, 2.0, 2.5, 10.0, 100.0, 700.0] {
            let expect = 0.5 * (PI / (2.0 * x)).ln() - x;
            assert_relative_eq!(log_bessel_k(0.5, x), expect, max_relative = 1e-12);
            assert_relative_eq!(
                log_bessel_k(1.5, x),
                expect + (1.0 + 1.0 / x).ln(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn symmetry_in_order() {
        for &nu in &[0.3, 0.5, 1.0, 2.5, 4.7] {
            for &x in &[0.1, 1.0, 3.0, 50.0] {
                assert_relative_eq!(
                    log_bessel_k(-nu, x),
                    log_bessel_k(nu, x),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn recurrence_consistency() {
        // K_{ν+1} = K_{ν-1} + (2ν/x) K_ν at orders computed independently.
        for &nu in &[0.7, 1.3, 2.0, 3.5] {
            for &x in &[0.3, 1.7, 4.0, 80.0] {
                let km1 = log_bessel_k(nu - 1.0, x);
                let k0 = log_bessel_k(nu, x);
                let k1 = log_bessel_k(nu + 1.0, x);
                let rhs = log_add_exp(km1, (2.0 * nu / x).ln() + k0);
                assert_relative_eq!(k1, rhs, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn matches_reference_table() {
        // ln K_ν(x) reference values computed with mpmath (mp.dps = 40).
        let table: &[(f64, f64, f64)] = &super::super::bessel_reference::REFERENCE;
        for &(nu, x, expect) in table {
            let got = log_bessel_k(nu, x);
            assert_relative_eq!(got, expect, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn pair_is_consistent_for_negative_orders() {
        for &nu in &[-3.0, -2.5, -1.0, -0.5, -0.2] {
            for &x in &[0.4, 2.0, 9.0] {
                let (lk, lk1) = log_bessel_k_pair(nu, x);
                assert_relative_eq!(lk, log_bessel_k(nu.abs(), x), max_relative = 1e-12);
                assert_relative_eq!(
                    lk1,
                    log_bessel_k((nu + 1.0).abs(), x),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn finite_over_spec_domain() {
        let mut x = 1e-8;
        while x <= 700.0 {
            for &nu in &[-4.5, -2.5, -0.5, 0.0, 1.0, 3.0] {
                let v = log_bessel_k(nu, x);
                assert!(v.is_finite(), "log K_{nu}({x}) = {v}");
            }
            x *= 10.0;
        }
    }
}
