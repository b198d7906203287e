//! Projected pseudo-gradient equilibrium seeking with step-size backoff.
//!
//! Outer round `l` uses `γ = η^l γ̄` and runs the synchronous update
//! `x_i ← Π_{𝓧_i}[x_i + γ ∇_{x_i} u_i(x)]` until successive iterates differ by
//! less than `tol` in the ∞-norm or `t_out` steps have elapsed. The KKT
//! certificate is then evaluated; the search stops once every player's
//! residual is below `tol`.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::check_unique_class;
use crate::certificate::{optimality_test, OptimalityCertificate};
use crate::error::{GameError, Result};
use crate::game::{GameSpec, JointStrategy};
use crate::projection::project;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma_bar: f64,
    pub eta: f64,
    pub tol: f64,
    pub t_out: usize,
    pub max_outer: usize,
    pub active_tol: f64,
    /// Start each outer round from the previous round's iterate instead of `x0`.
    pub warm_start: bool,
    /// Solve even when the game is outside the class with a guaranteed unique equilibrium.
    pub best_effort: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma_bar: 1.0,
            eta: 0.5,
            tol: 1e-5,
            t_out: 20_000,
            max_outer: 40,
            active_tol: 1e-7,
            warm_start: false,
            best_effort: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_bar > 0.0) || !self.gamma_bar.is_finite() {
            return Err(GameError::InvalidSpec(format!("gamma_bar must be positive, got {}", self.gamma_bar)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(GameError::InvalidSpec(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.tol > 0.0) {
            return Err(GameError::InvalidSpec(format!("tol must be positive, got {}", self.tol)));
        }
        if self.t_out == 0 || self.max_outer == 0 {
            return Err(GameError::InvalidSpec("t_out and max_outer must be at least 1".into()));
        }
        if !(self.active_tol > 0.0) {
            return Err(GameError::InvalidSpec(format!("active_tol must be positive, got {}", self.active_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub strategy: JointStrategy,
    pub certificate: OptimalityCertificate,
    pub outer_iterations: usize,
    pub inner_iterations_total: usize,
    pub final_step: f64,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
    /// Step size used in each outer round.
    pub step_history: Vec<f64>,
}

/// One synchronous projected-gradient step for every player.
pub fn projected_step(spec: &GameSpec, x: &JointStrategy, gamma: f64) -> Result<JointStrategy> {
    let grads = spec.all_profit_gradients(x)?;
    let blocks = grads
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let target = x.player(i) + g * gamma;
            project(&target, spec.constraints(i))
        })
        .collect::<Result<Vec<DVector<f64>>>>()?;
    Ok(JointStrategy::from_blocks_unchecked(blocks, spec.n_stages(), spec.n_categories()))
}

/// Random feasible start: uniform draws in each player's bounding box, projected onto its set.
pub fn random_start(spec: &GameSpec, seed: u64) -> Result<JointStrategy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = spec
        .all_constraints()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let bbox = crate::feasibility::bounding_box(c, i)?;
            let draw = DVector::from_fn(c.dim(), |j, _| {
                let (lo, hi) = (bbox.lower[j], bbox.upper[j]);
                if hi > lo {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            });
            project(&draw, c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JointStrategy::from_blocks_unchecked(blocks, spec.n_stages(), spec.n_categories()))
}

/// Computes a Nash equilibrium of `spec`.
///
/// Exhausting `max_outer` is not an error: the report carries the iterate
/// with the smallest certificate residual and `converged = false`.
pub fn solve_ne(spec: &GameSpec, config: &SolverConfig, x0: Option<&JointStrategy>) -> Result<SolveReport> {
    config.validate()?;
    if !config.best_effort && !check_unique_class(spec) {
        return Err(GameError::NotUniqueClass);
    }
    let started = Instant::now();
    let x0 = match x0 {
        Some(x) => {
            spec.check_feasible(x, config.active_tol)?;
            x.clone()
        }
        None => spec.default_start()?,
    };

    let mut best: Option<(JointStrategy, OptimalityCertificate)> = None;
    let mut inner_total = 0;
    let mut step_history = Vec::new();
    let mut start = x0.clone();
    let mut gamma = config.gamma_bar;

    for outer in 0..config.max_outer {
        step_history.push(gamma);
        let mut x = start.clone();
        for _ in 0..config.t_out {
            let next = projected_step(spec, &x, gamma)?;
            inner_total += 1;
            let diff = next.max_abs_diff(&x);
            x = next;
            if diff < config.tol {
                break;
            }
        }
        let certificate = optimality_test(spec, &x, config.active_tol)?;
        let done = certificate.all_below(config.tol);
        let better = best.as_ref().is_none_or(|(_, c)| certificate.max_residual < c.max_residual);
        if done {
            return Ok(SolveReport {
                strategy: x,
                certificate,
                outer_iterations: outer + 1,
                inner_iterations_total: inner_total,
                final_step: gamma,
                converged: true,
                wall_time: started.elapsed().as_secs_f64(),
                step_history,
            });
        }
        if config.warm_start {
            start = x.clone();
        }
        if better {
            best = Some((x, certificate));
        }
        gamma *= config.eta;
    }

    let (strategy, certificate) = best.expect("at least one outer round ran");
    Ok(SolveReport {
        strategy,
        certificate,
        outer_iterations: config.max_outer,
        inner_iterations_total: inner_total,
        final_step: step_history.last().copied().unwrap_or(config.gamma_bar),
        converged: false,
        wall_time: started.elapsed().as_secs_f64(),
        step_history,
    })
}
