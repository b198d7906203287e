//! Centrally planned strategies: the system optimum, which minimises total
//! loss plus participation cost, and the proportionally fair allocation,
//! which maximises `Σ_i log u_i`. Both run projected-gradient ascent with
//! Barzilai–Borwein trial steps and Armijo backtracking along the projection
//! arc over the product of the players' feasible sets.

use nalgebra::DVector;

use crate::error::{GameError, Result};
use crate::game::{CostModel, GameSpec, JointStrategy};
use crate::projection::project;
use crate::solver::random_start;

/// Profits at or below this make the log objective undefined.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedConfig {
    /// Stop when `‖x − Π(x + ∇J)‖_∞` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Trial step of the first iteration; later trials use Barzilai–Borwein estimates.
    pub initial_step: f64,
    /// Sufficient-increase constant of the Armijo test.
    pub armijo: f64,
    pub shrink: f64,
    /// Random restarts tried when the start has a nonpositive profit.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for CentralizedConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 200_000,
            initial_step: 1.0,
            armijo: 1e-4,
            shrink: 0.5,
            restarts: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CentralizedKind {
    SystemOptimum,
    ProportionalFair,
}

#[derive(Debug, Clone)]
pub struct CentralizedSolution {
    pub strategy: JointStrategy,
    pub objective_value: f64,
    pub kind: CentralizedKind,
    /// Projected-gradient residual at the returned point.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `Welf(x) = Σ_i u_i(x)`.
pub fn welfare(spec: &GameSpec, x: &JointStrategy) -> Result<f64> {
    Ok(spec.profits(x)?.iter().sum())
}

/// `Welf(x_so) / Welf(x_ne)`.
pub fn price_of_anarchy(spec: &GameSpec, so: &JointStrategy, ne: &JointStrategy) -> Result<f64> {
    let w_ne = welfare(spec, ne)?;
    if w_ne <= 0.0 {
        return Err(GameError::UndefinedPoa(w_ne));
    }
    Ok(welfare(spec, so)? / w_ne)
}

/// `−Σ_k Ψ_k − Σ_i Σ_k c_{i,k}`.
pub fn system_objective(spec: &GameSpec, x: &JointStrategy) -> Result<f64> {
    Ok(-spec.total_loss(x)? - spec.total_cost(x)?)
}

/// Gradient of [`system_objective`], one block per player.
pub fn system_gradient(spec: &GameSpec, x: &JointStrategy) -> Result<Vec<DVector<f64>>> {
    spec.check_dims(x)?;
    let m = spec.n_categories();
    let mut grads = vec![DVector::zeros(spec.block_dim()); spec.n_players()];
    for k in 0..spec.n_stages() {
        let total_phi: f64 = (0..spec.n_players()).map(|j| spec.participation(x, j, k)).sum();
        let s = total_phi + spec.fictitious()[k];
        let loss_slope = spec.stage_prizes()[k] * spec.fictitious()[k] / (s * s);
        let total = spec.stage_total(x, k);
        for (i, g) in grads.iter_mut().enumerate() {
            let w = spec.weight(i, k);
            for j in 0..m {
                let cost = match spec.cost() {
                    CostModel::Linear { beta } => beta[k],
                    CostModel::DynamicPrice { alpha, offsets, mask } => 2.0 * alpha[k] * mask[j] * total[j] + offsets[k][j],
                };
                g[k * m + j] = loss_slope * w[j] - cost;
            }
        }
    }
    Ok(grads)
}

/// `∂u_i / ∂x_j` for any pair of players.
pub fn cross_profit_gradient(spec: &GameSpec, x: &JointStrategy, i: usize, j: usize) -> Result<DVector<f64>> {
    if i == j {
        return spec.profit_gradient(x, i);
    }
    spec.check_dims(x)?;
    let m = spec.n_categories();
    let mut g = DVector::zeros(spec.block_dim());
    for k in 0..spec.n_stages() {
        let phi_i = spec.participation(x, i, k);
        let total_phi: f64 = (0..spec.n_players()).map(|l| spec.participation(x, l, k)).sum();
        let s = total_phi + spec.fictitious()[k];
        let slope = -spec.stage_prizes()[k] * phi_i / (s * s);
        let w = spec.weight(j, k);
        for c in 0..m {
            let cost = match spec.cost() {
                CostModel::Linear { .. } => 0.0,
                CostModel::DynamicPrice { alpha, mask, .. } => alpha[k] * mask[c] * x.get(i, k, c),
            };
            g[k * m + c] = slope * w[c] - cost;
        }
    }
    Ok(g)
}

/// `Σ_i log u_i`, or `None` when some profit is at or below the floor.
pub fn log_welfare(spec: &GameSpec, x: &JointStrategy) -> Result<Option<f64>> {
    let profits = spec.profits(x)?;
    if profits.iter().any(|&u| u <= POSITIVITY_FLOOR) {
        return Ok(None);
    }
    Ok(Some(profits.iter().map(|u| u.ln()).sum()))
}

fn log_welfare_gradient(spec: &GameSpec, x: &JointStrategy) -> Result<Vec<DVector<f64>>> {
    let profits = spec.profits(x)?;
    let n = spec.n_players();
    (0..n)
        .map(|j| {
            let mut g = DVector::zeros(spec.block_dim());
            for (i, &u) in profits.iter().enumerate() {
                g.axpy(1.0 / u, &cross_profit_gradient(spec, x, i, j)?, 1.0);
            }
            Ok(g)
        })
        .collect()
}

fn project_all(spec: &GameSpec, x: &JointStrategy, grads: &[DVector<f64>], step: f64) -> Result<JointStrategy> {
    let blocks = grads
        .iter()
        .enumerate()
        .map(|(i, g)| project(&(x.player(i) + g * step), spec.constraints(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(JointStrategy::from_blocks_unchecked(blocks, spec.n_stages(), spec.n_categories()))
}

fn inner_product(grads: &[DVector<f64>], a: &JointStrategy, b: &JointStrategy) -> f64 {
    grads
        .iter()
        .enumerate()
        .map(|(i, g)| g.dot(&(a.player(i) - b.player(i))))
        .sum()
}

struct Ascent {
    x: JointStrategy,
    value: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn projected_ascent<F, G>(spec: &GameSpec, x0: JointStrategy, config: &CentralizedConfig, objective: F, gradient: G) -> Result<Ascent>
where
    F: Fn(&JointStrategy) -> Result<Option<f64>>,
    G: Fn(&JointStrategy) -> Result<Vec<DVector<f64>>>,
{
    let mut x = x0;
    let mut value = objective(&x)?.ok_or_else(|| GameError::Domain("objective undefined at the start point".into()))?;
    let mut grads = gradient(&x)?;
    let mut step = config.initial_step;
    let mut iterations = 0;
    for iter in 0..config.max_iter {
        iterations = iter + 1;
        let residual = project_all(spec, &x, &grads, 1.0)?.max_abs_diff(&x);
        if residual < config.tol {
            return Ok(Ascent { x, value, residual, iterations: iter, converged: true });
        }
        let mut accepted = None;
        for _ in 0..200 {
            let trial = project_all(spec, &x, &grads, step)?;
            let predicted = inner_product(&grads, &trial, &x);
            if let Some(v) = objective(&trial)? {
                // near the optimum the gain drops below the objective's rounding level
                let slack = 8.0 * f64::EPSILON * value.abs().max(1.0);
                if v >= value + config.armijo * predicted - slack {
                    accepted = Some((trial, v));
                    break;
                }
            }
            step *= config.shrink;
        }
        let Some((trial, v)) = accepted else { break };
        if trial.max_abs_diff(&x) == 0.0 {
            break;
        }
        let next_grads = gradient(&trial)?;
        // Barzilai–Borwein step for the next trial; curvature is read off the gradient change
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..spec.n_players() {
            let s = trial.player(i) - x.player(i);
            ss += s.norm_squared();
            sy -= s.dot(&(&next_grads[i] - &grads[i]));
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { step / config.shrink };
        x = trial;
        value = v;
        grads = next_grads;
    }
    let residual = project_all(spec, &x, &grads, 1.0)?.max_abs_diff(&x);
    Ok(Ascent {
        converged: residual < config.tol,
        x,
        value,
        residual,
        iterations,
    })
}

/// Maximises `−Σ Ψ_k − Σ Σ c_{i,k}`; `x0` defaults to the projection of zero.
pub fn solve_system_optimum(
    spec: &GameSpec,
    config: &CentralizedConfig,
    x0: Option<&JointStrategy>,
) -> Result<CentralizedSolution> {
    let start = match x0 {
        Some(x) => x.clone(),
        None => spec.default_start()?,
    };
    let run = projected_ascent(
        spec,
        start,
        config,
        |x| system_objective(spec, x).map(Some),
        |x| system_gradient(spec, x),
    )?;
    Ok(CentralizedSolution {
        strategy: run.x,
        objective_value: run.value,
        kind: CentralizedKind::SystemOptimum,
        kkt_residual: run.residual,
        iterations: run.iterations,
        converged: run.converged,
    })
}

/// Maximises `Σ_i log u_i` over points where every profit stays positive.
///
/// Starts from `x0` when given (typically the equilibrium), otherwise from
/// the projection of zero, then from seeded random points.
pub fn solve_proportional_fair(
    spec: &GameSpec,
    config: &CentralizedConfig,
    x0: Option<&JointStrategy>,
) -> Result<CentralizedSolution> {
    let mut candidates = Vec::new();
    if let Some(x) = x0 {
        candidates.push(x.clone());
    }
    candidates.push(spec.default_start()?);
    let mut start = None;
    for c in candidates {
        if log_welfare(spec, &c)?.is_some() {
            start = Some(c);
            break;
        }
    }
    let mut attempt = 0;
    while start.is_none() && attempt < config.restarts {
        let c = random_start(spec, config.seed.wrapping_add(attempt as u64))?;
        if log_welfare(spec, &c)?.is_some() {
            start = Some(c);
        }
        attempt += 1;
    }
    let start = start.ok_or_else(|| {
        GameError::Domain(
            "no start point with strictly positive profits for every player; proportional fairness needs u_i > 0".into(),
        )
    })?;
    let run = projected_ascent(spec, start, config, |x| log_welfare(spec, x), |x| log_welfare_gradient(spec, x))?;
    Ok(CentralizedSolution {
        strategy: run.x,
        objective_value: run.value,
        kind: CentralizedKind::ProportionalFair,
        kkt_residual: run.residual,
        iterations: run.iterations,
        converged: run.converged,
    })
}
