//! Two-level mobility case study. Upper level: fleets split over four regions
//! (a Blotto game). Lower level: battery-aware charging in one region over a
//! nine-step day, played in receding-horizon fashion.

use anyhow::{ensure, Context, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use tullock_core::blotto::{solve_semi_analytical, BlottoSolution, BlottoSpec};
use tullock_core::centralized::{price_of_anarchy, solve_system_optimum, welfare, CentralizedConfig};
use tullock_core::rhg::{run_receding_horizon, solve_open_loop, MarketProfile, OpenLoopSolution, RhgPlayerSpec, RhgTrace};
use tullock_core::{solve_ne, GameError, JointStrategy, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyConfig {
    pub fleets: Vec<f64>,
    pub region_prizes: Vec<f64>,
    /// Unit costs at θ = 1.
    pub cost_template: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Fictitious participation of every region.
    pub epsilon: f64,
    /// θ at which the region-1 sub-fleets are taken.
    pub fleet_theta: f64,
    pub horizons: Vec<usize>,
    /// Red, yellow, green shares at the start of the day.
    pub initial_shares: [f64; 3],
    pub profile: MarketProfile,
}

pub const DEFAULT_EPSILON: f64 = 1.0;
pub const THETA_RANGE: (f64, f64) = (0.1, 12.0);
pub const DEFAULT_THETA_POINTS: usize = 20;

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            fleets: vec![200.0, 500.0, 1000.0],
            region_prizes: vec![220e3, 100e3, 50e3, 35e3],
            cost_template: vec![12.0, 9.0, 6.0, 3.0],
            thetas: theta_grid(DEFAULT_THETA_POINTS),
            epsilon: DEFAULT_EPSILON,
            fleet_theta: 1.0,
            horizons: vec![3, 6, 9],
            initial_shares: [0.05, 0.10, 0.85],
            profile: synthetic_profile(),
        }
    }
}

impl CaseStudyConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.fleets.is_empty(), "at least one company is required");
        ensure!(
            self.region_prizes.len() == self.cost_template.len(),
            "one unit cost per region is required"
        );
        ensure!(!self.thetas.is_empty(), "the θ grid is empty");
        ensure!(!self.horizons.is_empty(), "no planning horizons given");
        let total: f64 = self.initial_shares.iter().sum();
        ensure!(
            (total - 1.0).abs() < 1e-12 && self.initial_shares.iter().all(|&s| s >= 0.0),
            "initial battery shares must be nonnegative and sum to 1, got {total}"
        );
        let steps = self.profile.len();
        ensure!(
            self.horizons.iter().all(|&t| (1..=steps).contains(&t)),
            "horizons must lie in 1..={steps}"
        );
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.profile.len()
    }

    /// The upper-level game at cost scale `theta`.
    pub fn upper_level(&self, theta: f64) -> Result<BlottoSpec> {
        Ok(BlottoSpec::new(
            self.fleets.clone(),
            self.region_prizes.clone(),
            self.cost_template.iter().map(|b| b * theta).collect(),
            vec![self.epsilon; self.region_prizes.len()],
        )?)
    }

    pub fn battery_players(&self, fleets: &[f64]) -> Result<Vec<RhgPlayerSpec>> {
        fleets
            .iter()
            .map(|&f| battery_player(f, self.initial_shares, self.total_steps()))
            .collect()
    }
}

/// `n` points evenly spaced over the θ range, endpoints included.
pub fn theta_grid(n: usize) -> Vec<f64> {
    let (lo, hi) = THETA_RANGE;
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct UpperSolution {
    pub strategy: JointStrategy,
    /// `None` when the closed form found no verified configuration.
    pub semi_analytical: Option<BlottoSolution>,
    /// `‖x_iterative − x_closed_form‖_∞` when both are available.
    pub method_gap: Option<f64>,
    pub certificate_residual: f64,
}

/// Equilibrium of the upper level by both methods. The closed-form strategy
/// is reported when it verifies, the iterative one otherwise.
pub fn solve_upper(spec: &BlottoSpec, config: &SolverConfig) -> Result<UpperSolution> {
    let game = spec.to_game_spec()?;
    let iterative = solve_ne(&game, config, None)?;
    ensure!(
        iterative.converged,
        "iterative equilibrium solve did not converge (residual {:e})",
        iterative.certificate.max_residual
    );
    let semi = match solve_semi_analytical(spec) {
        Ok(s) => Some(s),
        Err(GameError::NoVerifiedConfiguration { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let method_gap = match &semi {
        Some(s) => Some(iterative.strategy.max_abs_diff(&s.to_joint_strategy()?)),
        None => None,
    };
    let (strategy, certificate_residual) = match &semi {
        Some(s) => (s.to_joint_strategy()?, s.max_residual),
        None => (iterative.strategy, iterative.certificate.max_residual),
    };
    Ok(UpperSolution {
        strategy,
        semi_analytical: semi,
        method_gap,
        certificate_residual,
    })
}

#[derive(Debug, Clone)]
pub struct PoaRow {
    pub theta: f64,
    pub welf_so: f64,
    pub welf_ne: f64,
    pub poa: f64,
    /// Equilibrium profit per company.
    pub profits: Vec<f64>,
    pub method_gap: Option<f64>,
    pub so_converged: bool,
}

pub fn poa_point(cfg: &CaseStudyConfig, theta: f64, config: &SolverConfig) -> Result<PoaRow> {
    let spec = cfg.upper_level(theta)?;
    let game = spec.to_game_spec()?;
    let ne = solve_upper(&spec, config).with_context(|| format!("equilibrium at theta = {theta}"))?;
    let so = solve_system_optimum(&game, &CentralizedConfig::default(), Some(&ne.strategy))
        .with_context(|| format!("system optimum at theta = {theta}"))?;
    Ok(PoaRow {
        theta,
        welf_so: welfare(&game, &so.strategy)?,
        welf_ne: welfare(&game, &ne.strategy)?,
        poa: price_of_anarchy(&game, &so.strategy, &ne.strategy)?,
        profits: game.profits(&ne.strategy)?,
        method_gap: ne.method_gap,
        so_converged: so.converged,
    })
}

/// PoA over the grid; points are independent and run in parallel.
pub fn poa_sweep(cfg: &CaseStudyConfig, config: &SolverConfig) -> Result<Vec<PoaRow>> {
    cfg.thetas.par_iter().map(|&t| poa_point(cfg, t, config)).collect()
}

/// Synthetic one-day market for the lower level: demand peaks mid-day,
/// charging is cheap in the morning and grows dearer towards the evening.
/// Picked by a seeded random search over profiles of this shape, then
/// rounded; not measured data.
pub fn synthetic_profile() -> MarketProfile {
    let prizes: Vec<f64> = [49.2, 69.9, 95.8, 117.3, 123.8, 111.7, 87.5, 62.4, 44.3]
        .iter()
        .map(|w| w * 1e3)
        .collect();
    let fictitious = vec![111.0, 113.0, 116.0, 118.0, 119.0, 117.0, 115.0, 113.0, 111.0];
    let alpha = vec![0.008, 0.008, 0.008, 0.008, 0.008, 0.0235, 0.039, 0.0545, 0.07];
    MarketProfile {
        offsets: vec![DVector::zeros(3); prizes.len()],
        prizes,
        fictitious,
        alpha,
    }
}

/// Battery categories red, yellow, green. Vehicles not charging drop one
/// category per step (red stays red); every vehicle sent to charge comes back
/// green, so the fleet size is conserved. Only yellow and green vehicles that
/// are not charging serve demand.
pub fn battery_player(fleet: f64, shares: [f64; 3], steps: usize) -> Result<RhgPlayerSpec> {
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    // B = e_green 1ᵀ − A
    let b = DMatrix::from_fn(3, 3, |r, c| f64::from(u8::from(r == 2)) - a[(r, c)]);
    let y0 = DVector::from_iterator(3, shares.iter().map(|s| s * fleet));
    // −y + u ≤ 0: only vehicles present in a category can be sent to charge
    Ok(RhgPlayerSpec::new(
        a,
        b,
        DMatrix::from_fn(3, 3, |r, c| if r == c { -1.0 } else { 0.0 }),
        DMatrix::identity(3, 3),
        vec![DVector::zeros(3); steps],
        y0,
        DVector::from_column_slice(&[0.0, 1.0, 1.0]),
        DVector::from_column_slice(&[0.0, -1.0, -1.0]),
    )?)
}

/// Region-1 sub-fleets of the upper-level equilibrium at `cfg.fleet_theta`.
pub fn region_fleets(cfg: &CaseStudyConfig, config: &SolverConfig) -> Result<Vec<f64>> {
    let spec = cfg.upper_level(cfg.fleet_theta)?;
    let upper = solve_upper(&spec, config)?;
    Ok((0..spec.n_players()).map(|i| upper.strategy.get(i, 0, 0)).collect())
}

/// Open-loop plan over the whole day.
pub fn fleet_plan(cfg: &CaseStudyConfig, fleets: &[f64], config: &SolverConfig) -> Result<OpenLoopSolution> {
    let players = cfg.battery_players(fleets)?;
    Ok(solve_open_loop(&players, &cfg.profile, cfg.total_steps(), config)?)
}

/// One receding-horizon rollout per horizon, run in parallel.
pub fn horizon_sweep(cfg: &CaseStudyConfig, fleets: &[f64], config: &SolverConfig) -> Result<Vec<RhgTrace>> {
    let players = cfg.battery_players(fleets)?;
    cfg.horizons
        .par_iter()
        .map(|&t| Ok(run_receding_horizon(&players, &cfg.profile, t, config)?))
        .collect()
}
