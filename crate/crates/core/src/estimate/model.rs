//! Mixture model container and the flat unconstrained parameterization used
//! by the EM-gradient optimizer.
//!
//! Per class the packed coordinates are: location (d), then the
//! lower-triangular precision factor row by row with the diagonal stored as
//! its logarithm, then for the NIG family the skew (d) and log kurtosis.
//! The MRF block holds α_2..α_K (α_1 is pinned to 0) and, for spatial
//! models, β. The log reparameterizations keep every unconstrained step
//! inside the valid parameter set.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::{GaussClassParams, NigClassParams};
use crate::error::{Error, Result};
use crate::mrf::MrfParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Nig,
}

/// Channel index sets: A is predicted from B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSplit {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl ChannelSplit {
    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.b.is_empty() {
            return Err(Error::Usage("channel split must have a non-empty B set".into()));
        }
        let mut seen = vec![false; channels];
        for &c in self.a.iter().chain(self.b.iter()) {
            if c >= channels {
                return Err(Error::Usage(format!(
                    "split channel {c} out of range for {channels} channels"
                )));
            }
            if seen[c] {
                return Err(Error::Usage(format!("channel {c} appears twice in the split")));
            }
            seen[c] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Usage("channel split must cover every channel".into()));
        }
        Ok(())
    }
}

/// One mixture component, matching the model family.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassParams {
    Gaussian(GaussClassParams),
    Nig(NigClassParams),
}

impl ClassParams {
    pub fn dim(&self) -> usize {
        match self {
            ClassParams::Gaussian(p) => p.dim(),
            ClassParams::Nig(p) => p.dim(),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ClassParams::Gaussian(_) => Family::Gaussian,
            ClassParams::Nig(_) => Family::Nig,
        }
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        match self {
            ClassParams::Gaussian(p) => p.logpdf(x),
            ClassParams::Nig(p) => p.logpdf(x),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<DVector<f64>> {
        match self {
            ClassParams::Gaussian(p) => Ok(p.sample(rng)),
            ClassParams::Nig(p) => p.sample(rng),
        }
    }

    /// Marginal over a channel subset, staying in the same family.
    pub fn marginal(&self, keep: &[usize]) -> Result<ClassParams> {
        Ok(match self {
            ClassParams::Gaussian(p) => ClassParams::Gaussian(p.marginal(keep)?),
            ClassParams::Nig(p) => ClassParams::Nig(p.marginal(keep)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub family: Family,
    pub spatial: bool,
    pub classes: Vec<ClassParams>,
    pub mrf: MrfParams,
    pub split: ChannelSplit,
}

impl MixtureModel {
    pub fn new(
        family: Family,
        spatial: bool,
        classes: Vec<ClassParams>,
        mrf: MrfParams,
        split: ChannelSplit,
    ) -> Result<Self> {
        let m = Self {
            family,
            spatial,
            classes,
            mrf,
            split,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Parameter("model needs at least one class".into()));
        }
        let d = self.classes[0].dim();
        for (k, c) in self.classes.iter().enumerate() {
            if c.family() != self.family {
                return Err(Error::Parameter(format!(
                    "class {k} does not match the model family"
                )));
            }
            if c.dim() != d {
                return Err(Error::Parameter(format!("class {k} dimension mismatch")));
            }
        }
        self.mrf.validate()?;
        if self.mrf.k() != self.classes.len() {
            return Err(Error::Parameter("MRF class count mismatch".into()));
        }
        if !self.spatial && self.mrf.beta != 0.0 {
            return Err(Error::Parameter(
                "non-spatial model must have beta frozen at 0".into(),
            ));
        }
        self.split.validate(d)?;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn channels(&self) -> usize {
        self.classes[0].dim()
    }

    pub fn mrf(&self) -> &MrfParams {
        &self.mrf
    }

    pub fn class(&self, k: usize) -> &ClassParams {
        &self.classes[k]
    }

    /// Packed length of one class block.
    pub fn class_param_len(&self) -> usize {
        let d = self.channels();
        let tri = d * (d + 1) / 2;
        match self.family {
            Family::Gaussian => d + tri,
            Family::Nig => d + tri + d + 1,
        }
    }

    /// Packed length of the MRF block: K−1 free potentials plus β if spatial.
    pub fn mrf_param_len(&self) -> usize {
        self.k() - 1 + usize::from(self.spatial)
    }

    pub fn n_params(&self) -> usize {
        self.k() * self.class_param_len() + self.mrf_param_len()
    }

    pub fn class_block(&self, k: usize) -> std::ops::Range<usize> {
        let len = self.class_param_len();
        k * len..(k + 1) * len
    }

    pub fn mrf_block(&self) -> std::ops::Range<usize> {
        let start = self.k() * self.class_param_len();
        start..start + self.mrf_param_len()
    }

    pub fn to_theta(&self) -> DVector<f64> {
        let mut theta = Vec::with_capacity(self.n_params());
        for c in &self.classes {
            match c {
                ClassParams::Gaussian(p) => {
                    theta.extend(p.mean().iter());
                    push_tri(&mut theta, p.chol());
                }
                ClassParams::Nig(p) => {
                    theta.extend(p.loc().iter());
                    push_tri(&mut theta, p.chol());
                    theta.extend(p.skew().iter());
                    theta.push(p.kurt().ln());
                }
            }
        }
        for &a in &self.mrf.alpha[1..] {
            theta.push(a);
        }
        if self.spatial {
            theta.push(self.mrf.beta);
        }
        DVector::from_vec(theta)
    }

    /// Rebuild a model of the same shape from a packed parameter vector.
    pub fn with_theta(&self, theta: &DVector<f64>) -> Result<MixtureModel> {
        if theta.len() != self.n_params() {
            return Err(Error::Usage(format!(
                "parameter vector length {} != {}",
                theta.len(),
                self.n_params()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite packed parameter".into()));
        }
        let d = self.channels();
        let mut pos = 0usize;
        let mut take = |n: usize| {
            let s = theta.rows(pos, n).into_owned();
            pos += n;
            s
        };
        let mut classes = Vec::with_capacity(self.k());
        for _ in 0..self.k() {
            match self.family {
                Family::Gaussian => {
                    let mean = take(d);
                    let l = pop_tri(&take(d * (d + 1) / 2), d);
                    classes.push(ClassParams::Gaussian(GaussClassParams::new(mean, l)?));
                }
                Family::Nig => {
                    let loc = take(d);
                    let l = pop_tri(&take(d * (d + 1) / 2), d);
                    let skew = take(d);
                    let kurt = take(1)[0].exp();
                    classes.push(ClassParams::Nig(NigClassParams::new(loc, l, skew, kurt)?));
                }
            }
        }
        let mut alpha = vec![0.0; self.k()];
        let free = take(self.k() - 1);
        alpha[1..].copy_from_slice(free.as_slice());
        let beta = if self.spatial { take(1)[0] } else { 0.0 };
        MixtureModel::new(
            self.family,
            self.spatial,
            classes,
            MrfParams::new(alpha, beta)?,
            self.split.clone(),
        )
    }
}

fn push_tri(theta: &mut Vec<f64>, l: &DMatrix<f64>) {
    for i in 0..l.nrows() {
        for j in 0..=i {
            theta.push(if i == j { l[(i, i)].ln() } else { l[(i, j)] });
        }
    }
}

fn pop_tri(vals: &DVector<f64>, d: usize) -> DMatrix<f64> {
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
