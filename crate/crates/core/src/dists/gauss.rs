//! Multivariate Gaussian class distribution, parameterized through the
//! lower-triangular factor L of its precision Q = L·Lᵀ.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::dists::{check_chol_factor, select_mat, select_vec, std_normal_vec};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussClassParams {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
}

impl GaussClassParams {
    pub fn new(mean: DVector<f64>, chol: DMatrix<f64>) -> Result<Self> {
        if mean.len() != chol.nrows() {
            return Err(Error::Parameter("mean/factor dimension mismatch".into()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite Gaussian mean".into()));
        }
        check_chol_factor(&chol)?;
        Ok(Self { mean, chol })
    }

    pub fn from_precision(mean: DVector<f64>, prec: &DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(prec.clone())
            .ok_or_else(|| Error::Parameter("precision matrix is not positive definite".into()))?;
        Self::new(mean, chol.l())
    }

    pub fn from_covariance(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Parameter("covariance matrix is not positive definite".into()))?;
        Self::from_precision(mean, &chol.inverse())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Lower-triangular factor of the precision matrix.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn prec(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    pub fn cov(&self) -> DMatrix<f64> {
        let d = self.dim();
        let prec = self.prec();
        Cholesky::new(prec)
            .map(|c| c.inverse())
            .unwrap_or_else(|| DMatrix::identity(d, d))
    }

    pub fn log_det_prec(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite observation".into()));
        }
        let r = x - &self.mean;
        let w = self.chol.tr_mul(&r); // Lᵀ r
        Ok(0.5 * self.log_det_prec() - 0.5 * self.dim() as f64 * LN_2PI - 0.5 * w.norm_squared())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> DVector<f64> {
        let z = std_normal_vec(self.dim(), rng);
        let w = self
            .chol
            .transpose()
            .solve_upper_triangular(&z)
            .expect("factor has positive diagonal");
        &self.mean + w
    }

    /// Marginal over the kept channel subset.
    pub fn marginal(&self, keep: &[usize]) -> Result<GaussClassParams> {
        let cov = self.cov();
        let cov_bb = select_mat(&cov, keep, keep);
        let prec = Cholesky::new(cov_bb)
            .ok_or_else(|| Error::Numeric("singular covariance block".into()))?
            .inverse();
        GaussClassParams::from_precision(select_vec(&self.mean, keep), &prec)
    }

    /// Conditional mean and covariance of the A channels given x_B,
    /// via precision-form (Schur complement) conditioning.
    pub fn conditional(
        &self,
        a_idx: &[usize],
        b_idx: &[usize],
        x_b: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if x_b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite conditioning value".into()));
        }
        let prec = self.prec();
        let q_aa = select_mat(&prec, a_idx, a_idx);
        let q_ab = select_mat(&prec, a_idx, b_idx);
        let chol_aa: Cholesky<f64, Dyn> = Cholesky::new(q_aa)
            .ok_or_else(|| Error::Numeric("singular Q_AA block".into()))?;
        let resid = x_b - select_vec(&self.mean, b_idx);
        let mean = select_vec(&self.mean, a_idx) - chol_aa.solve(&(&q_ab * resid));
        let cov = chol_aa.inverse();
        Ok((mean, cov))
    }
}

/// Free-function form of [`GaussClassParams::conditional`].
pub fn gauss_conditional(
    p: &GaussClassParams,
    a_idx: &[usize],
    b_idx: &[usize],
    x_b: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    p.conditional(a_idx, b_idx, x_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn demo() -> GaussClassParams {
        let mean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let prec = DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.4, 0.1, 0.4, 1.5, -0.3, 0.1, -0.3, 1.0],
        );
        GaussClassParams::from_precision(mean, &prec).unwrap()
    }

    #[test]
    fn logpdf_peak_at_mean() {
        let p = demo();
        let at_mean = p.logpdf(p.mean()).unwrap();
        let off = p.logpdf(&DVector::from_vec(vec![1.2, -2.0, 0.5])).unwrap();
        assert!(at_mean > off);
    }

    #[test]
    fn diagonal_prec_conditional_is_independence() {
        let mean = DVector::from_vec(vec![3.0, -1.0]);
        let prec = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let p = GaussClassParams::from_precision(mean, &prec).unwrap();
        let (m, c) = p
            .conditional(&[0], &[1], &DVector::from_vec(vec![5.0]))
            .unwrap();
        assert_relative_eq!(m[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(c[(0, 0)], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn conditional_cov_is_symmetric_pd() {
        let p = demo();
        let (_, c) = p
            .conditional(&[0, 1], &[2], &DVector::from_vec(vec![0.9]))
            .unwrap();
        assert_relative_eq!(c[(0, 1)], c[(1, 0)], epsilon = 1e-12);
        assert!(Cholesky::new(c).is_some());
    }

    #[test]
    fn sample_moments_match() {
        let p = demo();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut mean = DVector::zeros(3);
        for _ in 0..n {
            mean += p.sample(&mut rng);
        }
        mean /= n as f64;
        let cov = p.cov();
        for i in 0..3 {
            let se = (cov[(i, i)] / n as f64).sqrt();
            assert!((mean[i] - p.mean()[i]).abs() < 4.0 * se);
        }
    }

    #[test]
    fn marginal_consistent_with_cov_block() {
        let p = demo();
        let m = p.marginal(&[0, 2]).unwrap();
        let cov = p.cov();
        let cov_m = m.cov();
        for (i, &ri) in [0usize, 2].iter().enumerate() {
            for (j, &rj) in [0usize, 2].iter().enumerate() {
                assert_relative_eq!(cov_m[(i, j)], cov[(ri, rj)], max_relative = 1e-10);
            }
        }
    }
}
