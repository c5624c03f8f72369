//! The Monte Carlo EM-gradient fitting loop.
//!
//! Each iteration: build the per-voxel log data terms, run the warm-started
//! blocked Gibbs chain to get Rao-Blackwellized posteriors, form the packed
//! gradient and block-diagonal approximate Hessian, condition the Newton
//! scaling to be positive definite, and take the step Θ + δ·S∇Q. The step
//! length δ is found by backtracking halving on the mixture coordinates
//! while the MRF coordinates move with a fixed step; acceptance requires
//! the Q function (on the shared posteriors) not to decrease, so every
//! accepted iteration is a generalized EM step.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::estimate::gradient::{full_gradient, likelihood_table, q_function};
use crate::estimate::hessian::{approx_hessian, condition_scaling, ScalingTier};
use crate::estimate::model::MixtureModel;
use crate::mrf::{estimate_posteriors, PosteriorField};
use crate::volume::{mix_seed, LabelField, Neighborhood, VolumeGrid};

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Retained Gibbs sweeps per E-step.
    pub sweeps: usize,
    /// Burn-in sweeps before the first E-step only; later iterations warm
    /// start from the previous chain state with no extra burn-in.
    pub initial_burnin: usize,
    pub max_iters: usize,
    /// Stop when the accepted step's infinity norm, relative to parameter
    /// scale, falls below this.
    pub tol: f64,
    pub max_halvings: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            sweeps: 10,
            initial_burnin: 10,
            max_iters: 500,
            tol: 1e-5,
            max_halvings: 30,
            seed: 0,
        }
    }
}

/// Why the fit loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Step size fell below tolerance.
    Converged,
    /// Iteration budget exhausted.
    MaxIters,
    /// Backtracking could not find a non-decreasing step even after
    /// shrinking the MRF step; the last accepted iterate is returned.
    LineSearchFloor,
    /// A non-finite quantity appeared; the last valid iterate is returned.
    NumericAbort,
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iter: usize,
    pub q: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub tier: ScalingTier,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: MixtureModel,
    pub trace: Vec<TraceRecord>,
    pub stop: StopReason,
    pub final_q: f64,
    pub iterations: usize,
}

/// Backtracking halving on the Q difference: returns the accepted step in
/// (0, 1], or None if the floor is reached. Equality passes, so a zero
/// direction accepts δ = 1 immediately.
pub fn line_search(
    q0: f64,
    max_halvings: usize,
    mut eval: impl FnMut(f64) -> Result<f64>,
) -> Result<Option<f64>> {
    let mut delta = 1.0f64;
    for _ in 0..=max_halvings {
        match eval(delta) {
            Ok(q) if q.is_finite() && q >= q0 => return Ok(Some(delta)),
            Ok(_) => {}
            Err(Error::Numeric(_)) | Err(Error::Parameter(_)) => {}
            Err(e) => return Err(e),
        }
        delta *= 0.5;
    }
    Ok(None)
}

/// Split a packed step into mixture and MRF parts scaled separately.
fn combined_step(
    theta: &DVector<f64>,
    dir: &DVector<f64>,
    mrf_block: std::ops::Range<usize>,
    delta_mix: f64,
    delta_mrf: f64,
) -> DVector<f64> {
    let mut out = theta.clone();
    for i in 0..theta.len() {
        let d = if mrf_block.contains(&i) { delta_mrf } else { delta_mix };
        out[i] += d * dir[i];
    }
    out
}

pub fn em_gradient_fit(
    grid: &VolumeGrid,
    init: MixtureModel,
    opts: &FitOptions,
) -> Result<FitResult> {
    init.validate()?;
    if grid.channels() != init.channels() {
        return Err(Error::Usage(format!(
            "grid has {} channels, model expects {}",
            grid.channels(),
            init.channels()
        )));
    }
    let nb = Neighborhood::from_mask(grid.dims(), grid.mask());
    if nb.is_empty() {
        return Err(Error::Usage("mask selects no voxels".into()));
    }
    let chans: Vec<usize> = (0..init.channels()).collect();

    let mut model = init;
    let mut warm: Option<LabelField> = None;
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxIters;
    let mut last_q = f64::NAN;
    let mut iterations = 0;

    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        let e_step = (|| -> Result<(PosteriorField, f64)> {
            let table = likelihood_table(&model.classes, grid, &nb, &chans)?;
            let post = estimate_posteriors(
                &nb,
                &table,
                model.mrf(),
                warm.as_ref(),
                opts.sweeps,
                if iter == 0 { opts.initial_burnin } else { 0 },
                mix_seed(opts.seed, 0x656d2d67696262, iter as u64),
                true,
            )?;
            let q0 = q_function(&model, grid, &nb, &post)?;
            Ok((post, q0))
        })();
        let (post, q0) = match e_step {
            Ok(v) => v,
            Err(Error::Numeric(_)) => {
                stop = StopReason::NumericAbort;
                break;
            }
            Err(e) => return Err(e),
        };
        warm = Some(post.final_labels.clone());
        last_q = q0;

        let m_step = (|| -> Result<(DVector<f64>, ScalingTier, DVector<f64>)> {
            let grad = full_gradient(&model, grid, &nb, &post)?;
            let h = approx_hessian(&model, grid, &nb, &post)?;
            let (s, tier) = condition_scaling(&h);
            let dir = &s * &grad;
            Ok((grad, tier, dir))
        })();
        let (grad, tier, dir) = match m_step {
            Ok(v) => v,
            Err(Error::Numeric(_)) => {
                stop = StopReason::NumericAbort;
                break;
            }
            Err(e) => return Err(e),
        };
        let grad_norm = grad.amax();
        if grad_norm < 1e-10 {
            trace.push(TraceRecord {
                iter,
                q: q0,
                grad_norm,
                step: 0.0,
                tier,
                accepted: true,
            });
            stop = StopReason::Converged;
            break;
        }

        let theta0 = model.to_theta();
        let mrf_block = model.mrf_block();

        // Backtracking on the mixture coordinates with a fixed MRF step;
        // on floor exhaustion, shrink the MRF step once and retry.
        let mut accepted: Option<(MixtureModel, f64)> = None;
        for &mrf_step in &[1.0, 0.5] {
            let base = &model;
            let found = line_search(q0, opts.max_halvings, |delta| {
                let theta_c = combined_step(&theta0, &dir, mrf_block.clone(), delta, mrf_step);
                let cand = base.with_theta(&theta_c)?;
                q_function(&cand, grid, &nb, &post)
            })?;
            if let Some(delta) = found {
                let theta_c = combined_step(&theta0, &dir, mrf_block.clone(), delta, mrf_step);
                accepted = Some((model.with_theta(&theta_c)?, delta));
                break;
            }
        }
        let Some((next, delta)) = accepted else {
            trace.push(TraceRecord {
                iter,
                q: q0,
                grad_norm,
                step: 0.0,
                tier,
                accepted: false,
            });
            stop = StopReason::LineSearchFloor;
            break;
        };

        let theta_new = next.to_theta();
        let mut step_norm = 0.0f64;
        for i in 0..theta0.len() {
            let rel = (theta_new[i] - theta0[i]).abs() / theta0[i].abs().max(1.0);
            step_norm = step_norm.max(rel);
        }
        model = next;
        trace.push(TraceRecord {
            iter,
            q: q0,
            grad_norm,
            step: delta,
            tier,
            accepted: true,
        });
        if step_norm < opts.tol {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(FitResult {
        model,
        trace,
        stop,
        final_q: last_q,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_newton_accepts_full_step() {
        // Q(x) = −½(x−3)², current x = 0, Newton direction = 3.
        let q = |x: f64| -0.5 * (x - 3.0) * (x - 3.0);
        let got = line_search(q(0.0), 30, |delta| Ok(q(delta * 3.0))).unwrap();
        assert_eq!(got, Some(1.0));
    }

    #[test]
    fn overscaled_direction_backtracks_to_reciprocal() {
        let q = |x: f64| -0.5 * (x - 3.0) * (x - 3.0);
        let got = line_search(q(0.0), 30, |delta| Ok(q(delta * 300.0)))
            .unwrap()
            .unwrap();
        // δ·300 must land within (0, 6) to improve; first such δ is 1/64.
        assert_relative_eq!(got, 1.0 / 64.0);
    }

    #[test]
    fn zero_direction_accepts_immediately() {
        let got = line_search(5.0, 30, |_| Ok(5.0)).unwrap();
        assert_eq!(got, Some(1.0));
    }

    #[test]
    fn floor_exhaustion_returns_none() {
        let got = line_search(0.0, 10, |_| Ok(-1.0)).unwrap();
        assert_eq!(got, None);
    }
}
