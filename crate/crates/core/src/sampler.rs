//! Generation-time integrators over the rectified-flow schedule.
//!
//! Both samplers start from a seeded standard-normal draw at `t = 1` and
//! walk a uniform descending grid `t_k = (steps - k) / steps`. The ODE
//! sampler takes plain Euler steps along the predicted velocity; the SDE
//! sampler is Euler-Maruyama for the reverse SDE with diffusion
//! `g_t = a * t`:
//!
//! ```text
//! mean_k = x - dt * v_hat + (g_t^2 dt / 2) * s_hat
//! x_next = mean_k + sqrt(g_t^2 dt) * z,   z ~ N(0, I)
//! ```
//!
//! With `a = 0` every correction and noise term is exactly zero, so the SDE
//! path degenerates to the ODE path through the same code. The SDE sampler
//! records `(t_k, x_k, mean_k, g_t^2 dt)` per step; those records are
//! sufficient to recompute every transition log-density exactly, which is
//! what the clipped-surrogate loss consumes.
//!
//! No gradient ever flows through sampling: outputs are plain detached
//! vectors.

use rand::SeedableRng;

use crate::error::{CoreError, CoreResult};
use crate::mlp::Denoiser;
use crate::rng::{normal_vec, SeededRng};
use crate::scalar::{real, Real};
use crate::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig<R: Real> {
    /// Euler steps over [0, 1]; at most 1000 so grid times stay at or
    /// above the default `t_floor`.
    pub steps: usize,
    /// Diffusion slope `a` in `g_t = a * t`; zero gives the ODE.
    pub noise_scale: R,
    pub seed: u64,
}

impl<R: Real> SamplerConfig<R> {
    pub fn ode(steps: usize, seed: u64) -> Self {
        SamplerConfig { steps, noise_scale: R::zero(), seed }
    }

    pub fn sde(steps: usize, noise_scale: R, seed: u64) -> Self {
        SamplerConfig { steps, noise_scale, seed }
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.steps == 0 || self.steps > 1000 {
            return Err(CoreError::invalid(format!(
                "sampler steps must lie in 1..=1000, got {}",
                self.steps
            )));
        }
        if !(self.noise_scale >= R::zero()) || !self.noise_scale.is_finite() {
            return Err(CoreError::invalid(format!(
                "noise scale must be finite and non-negative, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

/// One recorded SDE transition: state and Gaussian parameters of the step
/// taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeStep<R: Real> {
    pub t: R,
    pub x: Vec<R>,
    pub mean: Vec<R>,
    /// Per-component transition variance `g_t^2 dt`.
    pub var: R,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrajectory<R: Real> {
    pub steps: Vec<SdeStep<R>>,
    pub final_x: Vec<R>,
    pub dt: R,
}

impl<R: Real> RolloutTrajectory<R> {
    /// State the transition at `k` landed on.
    pub fn next_state(&self, k: usize) -> &[R] {
        if k + 1 < self.steps.len() {
            &self.steps[k + 1].x
        } else {
            &self.final_x
        }
    }
}

fn grid_t<R: Real>(k: usize, steps: usize) -> R {
    real((steps - k) as f64 / steps as f64)
}

/// Deterministic Euler integration of the probability-flow ODE.
pub fn ode_sample<R: Real>(
    model: &impl Denoiser<R>,
    schedule: &Schedule<R>,
    cfg: &SamplerConfig<R>,
    cond: Option<usize>,
) -> CoreResult<Vec<R>> {
    Ok(ode_sample_with_path(model, schedule, cfg, cond)?.0)
}

/// As [`ode_sample`], also returning the visited `(t_k, x_k)` states.
pub fn ode_sample_with_path<R: Real>(
    model: &impl Denoiser<R>,
    schedule: &Schedule<R>,
    cfg: &SamplerConfig<R>,
    cond: Option<usize>,
) -> CoreResult<(Vec<R>, Vec<(R, Vec<R>)>)> {
    cfg.validate()?;
    schedule.validate()?;
    let dim = model.data_dim();
    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    let mut x: Vec<R> = normal_vec(&mut rng, dim);
    let dt: R = real(1.0 / cfg.steps as f64);
    let mut path = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let t = grid_t::<R>(k, cfg.steps).max(schedule.t_floor);
        path.push((t, x.clone()));
        let x_hat = model.predict(&x, t, cond)?;
        let v = schedule.x_to_velocity(&x_hat, &x, t)?;
        for i in 0..dim {
            x[i] = x[i] - dt * v[i];
        }
    }
    Ok((x, path))
}

/// Euler-Maruyama integration of the reverse SDE, recording the Gaussian
/// parameters of every transition.
pub fn sde_sample<R: Real>(
    model: &impl Denoiser<R>,
    schedule: &Schedule<R>,
    cfg: &SamplerConfig<R>,
    cond: Option<usize>,
) -> CoreResult<(Vec<R>, RolloutTrajectory<R>)> {
    cfg.validate()?;
    schedule.validate()?;
    let dim = model.data_dim();
    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    let mut x: Vec<R> = normal_vec(&mut rng, dim);
    let dt: R = real(1.0 / cfg.steps as f64);
    let half: R = real(0.5);
    let mut steps = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let t = grid_t::<R>(k, cfg.steps).max(schedule.t_floor);
        let x_hat = model.predict(&x, t, cond)?;
        let v = schedule.x_to_velocity(&x_hat, &x, t)?;
        let s = schedule.score_from_xpred(&x_hat, &x, t)?;
        let g = cfg.noise_scale * t;
        let var = g * g * dt;
        let corr = half * var;
        let mean: Vec<R> = (0..dim).map(|i| x[i] - dt * v[i] + corr * s[i]).collect();
        steps.push(SdeStep { t, x: x.clone(), mean: mean.clone(), var });
        let sd = var.sqrt();
        let z: Vec<R> = normal_vec(&mut rng, dim);
        for i in 0..dim {
            x[i] = mean[i] + sd * z[i];
        }
    }
    Ok((x.clone(), RolloutTrajectory { steps, final_x: x, dt }))
}

/// Test double: a denoiser that always predicts one fixed point.
#[derive(Debug, Clone)]
pub struct ConstDenoiser<R: Real> {
    pub target: Vec<R>,
}

impl<R: Real> Denoiser<R> for ConstDenoiser<R> {
    fn data_dim(&self) -> usize {
        self.target.len()
    }

    fn predict(&self, _x_t: &[R], _t: R, _cond: Option<usize>) -> CoreResult<Vec<R>> {
        Ok(self.target.clone())
    }
}
