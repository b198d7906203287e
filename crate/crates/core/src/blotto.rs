//! Semi-analytical equilibrium of the lossy Blotto game.
//!
//! Players split budgets `R_i` over `K` battlefields with linear unit costs
//! `β_k`. Fixing the set `𝓞` of (player, battlefield) pairs held at zero, the
//! stationarity conditions on the support collapse to one monotone scalar
//! equation `f̃(t) = 0`; back-substitution then gives the strategy. The
//! configurations are searched in a fixed order and each candidate must pass
//! the KKT certificate before it is accepted.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::certificate::optimality_test;
use crate::error::{GameError, Result};
use crate::game::{CostModel, GameSpec, JointStrategy, PlayerConstraints};
use crate::rootfind::brent;
use crate::solver::{solve_ne, SolveReport, SolverConfig};

/// Support entries may undershoot zero by this much before a candidate is rejected.
const NEGATIVITY_SLACK: f64 = 1e-10;
const BUDGET_TOL: f64 = 1e-8;
const CERTIFICATE_TOL: f64 = 1e-6;
const ACTIVE_TOL: f64 = 1e-7;
/// Beyond this many (player, battlefield) pairs the search is not recommended.
pub const ENUMERATION_ADVISORY: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct BlottoSpec {
    pub budgets: Vec<f64>,
    pub prizes: Vec<f64>,
    pub unit_costs: Vec<f64>,
    pub fictitious: Vec<f64>,
}

impl BlottoSpec {
    pub fn new(budgets: Vec<f64>, prizes: Vec<f64>, unit_costs: Vec<f64>, fictitious: Vec<f64>) -> Result<Self> {
        let spec = Self {
            budgets,
            prizes,
            unit_costs,
            fictitious,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.prizes.len();
        if self.budgets.is_empty() || k == 0 {
            return Err(GameError::InvalidSpec("Blotto game needs at least one player and one battlefield".into()));
        }
        if self.unit_costs.len() != k || self.fictitious.len() != k {
            return Err(GameError::Dimension(format!(
                "{k} prizes but {} unit costs and {} fictitious participations",
                self.unit_costs.len(),
                self.fictitious.len()
            )));
        }
        if let Some(i) = self.budgets.iter().position(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(GameError::InvalidSpec(format!("budget of player {i} must be positive")));
        }
        if let Some(k) = self.fictitious.iter().position(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(GameError::InvalidSpec(format!("fictitious participation of battlefield {k} must be positive")));
        }
        if let Some(k) = self.prizes.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(GameError::InvalidSpec(format!("prize of battlefield {k} must be nonnegative")));
        }
        if self.unit_costs.iter().any(|b| !b.is_finite()) {
            return Err(GameError::InvalidSpec("unit costs must be finite".into()));
        }
        Ok(())
    }

    pub fn n_players(&self) -> usize {
        self.budgets.len()
    }

    pub fn n_battlefields(&self) -> usize {
        self.prizes.len()
    }

    /// The equivalent game with scalar allocations, `w = 1` and linear costs.
    pub fn to_game_spec(&self) -> Result<GameSpec> {
        let k = self.n_battlefields();
        GameSpec::new(
            self.prizes.clone(),
            self.fictitious.clone(),
            DVector::from_element(1, 1.0),
            CostModel::linear(self.unit_costs.clone()),
            self.budgets.iter().map(|&r| PlayerConstraints::budget(k, r)).collect(),
        )
    }

    fn scale(&self) -> f64 {
        self.budgets.iter().sum::<f64>() + self.fictitious.iter().sum::<f64>()
    }
}

/// The set of (player, battlefield) pairs allocated exactly zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    n_players: usize,
    n_battlefields: usize,
    zero: Vec<bool>,
}

impl Configuration {
    pub fn interior(n_players: usize, n_battlefields: usize) -> Self {
        Self {
            n_players,
            n_battlefields,
            zero: vec![false; n_players * n_battlefields],
        }
    }

    pub fn from_zero_set(n_players: usize, n_battlefields: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut cfg = Self::interior(n_players, n_battlefields);
        for &(i, k) in pairs {
            if i >= n_players || k >= n_battlefields {
                return Err(GameError::Dimension(format!("pair ({i}, {k}) outside {n_players}×{n_battlefields}")));
            }
            cfg.zero[i * n_battlefields + k] = true;
        }
        Ok(cfg)
    }

    fn from_indices(n_players: usize, n_battlefields: usize, indices: &[usize]) -> Self {
        let mut cfg = Self::interior(n_players, n_battlefields);
        for &idx in indices {
            cfg.zero[idx] = true;
        }
        cfg
    }

    pub fn is_zero(&self, i: usize, k: usize) -> bool {
        self.zero[i * self.n_battlefields + k]
    }

    pub fn zero_set(&self) -> Vec<(usize, usize)> {
        (0..self.zero.len())
            .filter(|&idx| self.zero[idx])
            .map(|idx| (idx / self.n_battlefields, idx % self.n_battlefields))
            .collect()
    }

    pub fn size(&self) -> usize {
        self.zero.iter().filter(|&&z| z).count()
    }

    /// `n_k`: number of players active on battlefield `k`.
    pub fn participants(&self, k: usize) -> usize {
        (0..self.n_players).filter(|&i| !self.is_zero(i, k)).count()
    }

    /// Number of battlefields player `i` leaves empty.
    pub fn zeroed_for(&self, i: usize) -> usize {
        (0..self.n_battlefields).filter(|&k| self.is_zero(i, k)).count()
    }

    /// Every player keeps at least one battlefield.
    pub fn is_feasible(&self) -> bool {
        (0..self.n_players).all(|i| self.zeroed_for(i) < self.n_battlefields)
    }
}

/// Feasible configurations by increasing size, lexicographic within a size.
pub struct ConfigurationIter {
    n_players: usize,
    n_battlefields: usize,
    size: usize,
    indices: Vec<usize>,
    started: bool,
}

impl ConfigurationIter {
    pub fn new(n_players: usize, n_battlefields: usize) -> Self {
        Self {
            n_players,
            n_battlefields,
            size: 0,
            indices: Vec::new(),
            started: false,
        }
    }

    /// Advances `indices` to the next combination of `size` out of `n`.
    fn advance(&mut self) -> bool {
        let n = self.n_players * self.n_battlefields;
        if !self.started {
            self.started = true;
            return true;
        }
        let s = self.size;
        let mut pos = s;
        while pos > 0 {
            pos -= 1;
            if self.indices[pos] < n - s + pos {
                self.indices[pos] += 1;
                for later in pos + 1..s {
                    self.indices[later] = self.indices[later - 1] + 1;
                }
                return true;
            }
        }
        if s == n {
            return false;
        }
        self.size += 1;
        self.indices = (0..self.size).collect();
        true
    }
}

impl Iterator for ConfigurationIter {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        while self.advance() {
            let cfg = Configuration::from_indices(self.n_players, self.n_battlefields, &self.indices);
            if cfg.is_feasible() {
                return Some(cfg);
            }
        }
        None
    }
}

/// `(2^K − 1)^N`, saturating.
pub fn configuration_count(n_players: usize, n_battlefields: usize) -> u128 {
    let per_player = if n_battlefields >= 127 { u128::MAX } else { (1u128 << n_battlefields) - 1 };
    (0..n_players).fold(1u128, |acc, _| acc.saturating_mul(per_player))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlottoSolution {
    /// Rows are players, columns battlefields.
    pub strategy: DMatrix<f64>,
    pub configuration: Configuration,
    /// `t̄_k = Φ_k + ε_k`.
    pub t_bar: DVector<f64>,
    pub nu: DVector<f64>,
    pub t_nu_root: f64,
    pub verified: bool,
    pub max_residual: f64,
    /// Evaluations of `f̃` over every configuration tried.
    pub f_evaluations: usize,
    pub configurations_tried: usize,
}

impl BlottoSolution {
    pub fn to_joint_strategy(&self) -> Result<JointStrategy> {
        let k = self.strategy.ncols();
        let blocks = (0..self.strategy.nrows())
            .map(|i| self.strategy.row(i).transpose())
            .collect();
        JointStrategy::new(blocks, k, 1)
    }
}

fn check_prizes(spec: &BlottoSpec) -> Result<()> {
    if let Some(k) = spec.prizes.iter().position(|&w| w <= 0.0) {
        return Err(GameError::Domain(format!(
            "battlefield {k} has zero prize; the closed form needs W_k > 0"
        )));
    }
    Ok(())
}

fn check_shape(cfg: &Configuration, spec: &BlottoSpec) -> Result<()> {
    if cfg.n_players != spec.n_players() || cfg.n_battlefields != spec.n_battlefields() {
        return Err(GameError::Dimension(format!(
            "configuration is {}×{}, game is {}×{}",
            cfg.n_players,
            cfg.n_battlefields,
            spec.n_players(),
            spec.n_battlefields()
        )));
    }
    Ok(())
}

/// `t̄_k(t)`: positive root of `Δ t̄² − W(n_k − 1) t̄ − W ε = 0` with `Δ = t + n_k β_k`.
fn t_bar_at(t: f64, k: usize, n_k: usize, spec: &BlottoSpec) -> f64 {
    if n_k == 0 {
        return spec.fictitious[k];
    }
    let w = spec.prizes[k];
    let w_tilde = w * (n_k as f64 - 1.0);
    let delta = t + n_k as f64 * spec.unit_costs[k];
    (w_tilde + (w_tilde * w_tilde + 4.0 * w * spec.fictitious[k] * delta).sqrt()) / (2.0 * delta)
}

/// `f̃(t) = Σ_{k: n_k > 0} (t̄_k(t) − ε_k) − Σ_i R_i`.
pub fn f_tilde(t: f64, cfg: &Configuration, spec: &BlottoSpec) -> Result<f64> {
    check_shape(cfg, spec)?;
    let mut total = -spec.budgets.iter().sum::<f64>();
    for k in 0..spec.n_battlefields() {
        let n_k = cfg.participants(k);
        if n_k == 0 {
            continue;
        }
        let delta = t + n_k as f64 * spec.unit_costs[k];
        if !(delta > 0.0) {
            return Err(GameError::Domain(format!(
                "t = {t} leaves battlefield {k} outside the domain (t + n_k β_k = {delta})"
            )));
        }
        total += t_bar_at(t, k, n_k, spec) - spec.fictitious[k];
    }
    Ok(total)
}

/// Domain boundary `max_k (−n_k β_k)` over supported battlefields.
fn domain_floor(cfg: &Configuration, spec: &BlottoSpec) -> f64 {
    (0..spec.n_battlefields())
        .filter_map(|k| {
            let n_k = cfg.participants(k);
            (n_k > 0).then(|| -(n_k as f64) * spec.unit_costs[k])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Unique zero of `f̃` with `|f̃| < 1e-12 (ΣR + Σε)`; also returns the evaluation count.
pub fn find_root_counted(cfg: &Configuration, spec: &BlottoSpec) -> Result<(f64, usize)> {
    check_shape(cfg, spec)?;
    if !cfg.is_feasible() {
        return Err(GameError::Domain("configuration leaves some player without a battlefield".into()));
    }
    let scale = spec.scale();
    let ftol = 1e-12 * scale;
    let floor = domain_floor(cfg, spec);
    let mut evals = 0;
    let mut eval = |t: f64| -> Result<f64> {
        evals += 1;
        f_tilde(t, cfg, spec)
    };

    let mut offset = 1e-12 * floor.abs().max(1.0);
    let mut lo = floor + offset;
    let mut f_lo = eval(lo)?;
    let mut shrinks = 0;
    while f_lo <= 0.0 && f_lo.abs() > ftol {
        // cannot happen for valid data: f̃ blows up at the domain floor
        shrinks += 1;
        if shrinks > 40 {
            return Err(GameError::Numerical(format!(
                "f̃ stays negative at the domain floor {floor}; the game violates the root-existence hypotheses"
            )));
        }
        offset *= 0.1;
        lo = floor + offset;
        f_lo = eval(lo)?;
    }
    if f_lo.abs() <= ftol {
        return Ok((lo, evals));
    }

    let mut hi = lo.max(0.0) + 1.0;
    let mut f_hi = eval(hi)?;
    let mut doublings = 0;
    while f_hi >= 0.0 {
        if f_hi.abs() <= ftol {
            return Ok((hi, evals));
        }
        doublings += 1;
        if doublings > 2000 {
            return Err(GameError::Numerical("could not bracket the root of f̃".into()));
        }
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = eval(hi)?;
    }
    let root = brent(&mut eval, lo, hi, f_lo, f_hi, ftol, 500)?;
    Ok((root.x, evals))
}

pub fn find_root(cfg: &Configuration, spec: &BlottoSpec) -> Result<f64> {
    find_root_counted(cfg, spec).map(|(t, _)| t)
}

/// Closed-form candidate for `cfg`; `None` when it fails sign, budget or certificate checks.
pub fn solve_configuration(cfg: &Configuration, spec: &BlottoSpec) -> Result<Option<BlottoSolution>> {
    spec.validate()?;
    check_prizes(spec)?;
    let game = spec.to_game_spec()?;
    let mut evals = 0;
    solve_configuration_with(cfg, spec, &game, &mut evals)
}

fn solve_configuration_with(
    cfg: &Configuration,
    spec: &BlottoSpec,
    game: &GameSpec,
    evals: &mut usize,
) -> Result<Option<BlottoSolution>> {
    let (n, kk) = (spec.n_players(), spec.n_battlefields());
    let (t, used) = find_root_counted(cfg, spec)?;
    *evals += used;
    let t_bar = DVector::from_fn(kk, |k, _| t_bar_at(t, k, cfg.participants(k), spec));

    let mut nu = DVector::zeros(n);
    for i in 0..n {
        let (mut sum_t, mut sum_sq, mut sum_beta_sq) = (0.0, 0.0, 0.0);
        for k in (0..kk).filter(|&k| !cfg.is_zero(i, k)) {
            let sq = t_bar[k] * t_bar[k] / spec.prizes[k];
            sum_t += t_bar[k];
            sum_sq += sq;
            sum_beta_sq += spec.unit_costs[k] * sq;
        }
        nu[i] = (sum_t - spec.budgets[i] - sum_beta_sq) / sum_sq;
    }

    let mut strategy = DMatrix::zeros(n, kk);
    for i in 0..n {
        for k in 0..kk {
            if cfg.is_zero(i, k) {
                continue;
            }
            let v = t_bar[k] - (nu[i] + spec.unit_costs[k]) * t_bar[k] * t_bar[k] / spec.prizes[k];
            if v < -NEGATIVITY_SLACK {
                return Ok(None);
            }
            strategy[(i, k)] = v.max(0.0);
        }
        let gap = spec.budgets[i] - strategy.row(i).sum();
        if gap.abs() > BUDGET_TOL {
            return Ok(None);
        }
        // absorb rounding in the largest entry so the budget holds exactly
        let (_, k_max) = strategy.row(i).iamax_full();
        strategy[(i, k_max)] += gap;
    }

    let blocks = (0..n).map(|i| strategy.row(i).transpose()).collect();
    let joint = JointStrategy::new(blocks, kk, 1)?;
    let certificate = match optimality_test(game, &joint, ACTIVE_TOL) {
        Ok(c) => c,
        Err(GameError::InfeasibleStrategy { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if certificate.max_residual >= CERTIFICATE_TOL {
        return Ok(None);
    }
    Ok(Some(BlottoSolution {
        strategy,
        configuration: cfg.clone(),
        t_bar,
        nu,
        t_nu_root: t,
        verified: true,
        max_residual: certificate.max_residual,
        f_evaluations: *evals,
        configurations_tried: 0,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub struct EnumerationOptions {
    /// Stop after this many candidates; `None` means the full `(2^K − 1)^N`.
    pub max_configurations: Option<usize>,
}


/// Whether the configuration search is expected to be slower than iterating.
pub fn recommend_iterative(spec: &BlottoSpec) -> bool {
    spec.n_players() * spec.n_battlefields() > ENUMERATION_ADVISORY
}

pub fn solve_semi_analytical(spec: &BlottoSpec) -> Result<BlottoSolution> {
    solve_semi_analytical_with(spec, EnumerationOptions::default())
}

/// Returns the first configuration, in search order, whose candidate verifies.
pub fn solve_semi_analytical_with(spec: &BlottoSpec, options: EnumerationOptions) -> Result<BlottoSolution> {
    spec.validate()?;
    check_prizes(spec)?;
    let game = spec.to_game_spec()?;
    let cap = configuration_count(spec.n_players(), spec.n_battlefields());
    let cap = options
        .max_configurations
        .map_or(cap, |m| cap.min(m as u128));
    let mut evals = 0;
    let mut tried = 0usize;
    for cfg in ConfigurationIter::new(spec.n_players(), spec.n_battlefields()) {
        if tried as u128 >= cap {
            break;
        }
        tried += 1;
        let candidate = match solve_configuration_with(&cfg, spec, &game, &mut evals) {
            Ok(c) => c,
            // a configuration whose root cannot be located is simply not the equilibrium
            Err(GameError::Numerical(_)) | Err(GameError::Domain(_)) => None,
            Err(e) => return Err(e),
        };
        if let Some(mut sol) = candidate {
            sol.f_evaluations = evals;
            sol.configurations_tried = tried;
            return Ok(sol);
        }
    }
    let hint = if recommend_iterative(spec) {
        "the game is large; use the iterative solver".to_string()
    } else {
        "boundary equilibria may need the iterative solver".to_string()
    };
    Err(GameError::NoVerifiedConfiguration { tried, hint })
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub semi_analytical_seconds: f64,
    pub iterative_seconds: f64,
    pub semi_analytical_evaluations: usize,
    pub iterative_inner_steps: usize,
    pub agreement: f64,
    pub semi_analytical: BlottoSolution,
    pub iterative: SolveReport,
}

/// Runs both methods on the same game and compares them.
pub fn benchmark_methods(spec: &BlottoSpec, config: &SolverConfig) -> Result<BenchmarkReport> {
    let game = spec.to_game_spec()?;
    let started = Instant::now();
    let semi = solve_semi_analytical(spec)?;
    let semi_analytical_seconds = started.elapsed().as_secs_f64();
    let started = Instant::now();
    let iterative = solve_ne(&game, config, None)?;
    let iterative_seconds = started.elapsed().as_secs_f64();
    let agreement = iterative.strategy.max_abs_diff(&semi.to_joint_strategy()?);
    Ok(BenchmarkReport {
        semi_analytical_seconds,
        iterative_seconds,
        semi_analytical_evaluations: semi.f_evaluations,
        iterative_inner_steps: iterative.inner_iterations_total,
        agreement,
        semi_analytical: semi,
        iterative,
    })
}
