//! Receding-horizon games: players with linear internal dynamics
//! `y_{k+1} = A y_k + B u_k` and stage constraints `G y_k + H u_k ≤ d_k`.
//!
//! Each stage decision is lifted to `x_k = [φ_k, u_kᵀ]ᵀ`, where the leading
//! participation slot is tied to `p_yᵀ y_k + p_uᵀ u_k` by an equality row and
//! the states are eliminated through the recursion. Participation is then
//! `wᵀ x_k` with `w = e_0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GameError, Result};
use crate::feasibility;
use crate::game::{CostModel, GameSpec, JointStrategy, PlayerConstraints, StageEvaluation};
use crate::solver::{solve_ne, SolveReport, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RhgPlayerSpec {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// Right-hand sides `d_k`, one per time step.
    pub d: Vec<DVector<f64>>,
    pub y0: DVector<f64>,
    pub p_y: DVector<f64>,
    pub p_u: DVector<f64>,
}

impl RhgPlayerSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        g: DMatrix<f64>,
        h: DMatrix<f64>,
        d: Vec<DVector<f64>>,
        y0: DVector<f64>,
        p_y: DVector<f64>,
        p_u: DVector<f64>,
    ) -> Result<Self> {
        let spec = Self { a, b, g, h, d, y0, p_y, p_u };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let (m_y, m_u, m_d) = (self.m_y(), self.m_u(), self.m_d());
        let fail = |what: &str| Err(GameError::Dimension(what.to_string()));
        if self.a.ncols() != m_y || self.b.nrows() != m_y {
            return fail("A must be square and B must have as many rows as A");
        }
        if self.g.ncols() != m_y || self.h.nrows() != m_d || self.h.ncols() != m_u {
            return fail("G must be m_d × m_y and H must be m_d × m_u");
        }
        if self.y0.len() != m_y || self.p_y.len() != m_y || self.p_u.len() != m_u {
            return fail("y0 and p_y must have length m_y, p_u length m_u");
        }
        if self.d.iter().any(|d| d.len() != m_d) {
            return fail("every d_k must have length m_d");
        }
        if m_u == 0 {
            return fail("at least one input is required");
        }
        Ok(())
    }

    pub fn m_y(&self) -> usize {
        self.a.nrows()
    }

    pub fn m_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn m_d(&self) -> usize {
        self.g.nrows()
    }

    /// Lifted stage dimension `m = m_u + 1`.
    pub fn stage_dim(&self) -> usize {
        self.m_u() + 1
    }

    pub fn with_initial_state(&self, y0: DVector<f64>) -> Self {
        Self { y0, ..self.clone() }
    }

    pub fn step(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * y + &self.b * u
    }

    /// States `y_0 … y_T` produced by `inputs` from `y0`.
    pub fn simulate(&self, inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut states = Vec::with_capacity(inputs.len() + 1);
        states.push(self.y0.clone());
        for u in inputs {
            let next = self.step(states.last().expect("nonempty"), u);
            states.push(next);
        }
        states
    }

    pub fn participation(&self, y: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.p_y.dot(y) + self.p_u.dot(u)
    }
}

/// Lifted polytope for horizon `horizon`, using `d[start..start + horizon]`.
pub fn lift_constraints_from(p: &RhgPlayerSpec, horizon: usize, start: usize) -> Result<PlayerConstraints> {
    if horizon == 0 {
        return Err(GameError::InvalidSpec("horizon must be at least 1".into()));
    }
    if p.d.len() < start + horizon {
        return Err(GameError::Dimension(format!(
            "constraint offsets cover {} steps, need {}",
            p.d.len(),
            start + horizon
        )));
    }
    let (m_y, m_u, m_d) = (p.m_y(), p.m_u(), p.m_d());
    let m = m_u + 1;
    let n = horizon * m;

    // powers A^0 … A^horizon
    let mut powers = vec![DMatrix::identity(m_y, m_y)];
    for k in 1..=horizon {
        let next = &p.a * &powers[k - 1];
        powers.push(next);
    }

    let mut eq_matrix = DMatrix::zeros(horizon, n);
    let mut eq_rhs = DVector::zeros(horizon);
    let mut ineq_matrix = DMatrix::zeros(horizon * m_d, n);
    let mut ineq_rhs = DVector::zeros(horizon * m_d);
    for k in 0..horizon {
        // Σ_k: y_k = Σ_k x + A^k y0, with block j carrying A^{k−1−j} B on the input slots
        let mut sigma = DMatrix::zeros(m_y, n);
        for j in 0..k {
            let block = &powers[k - 1 - j] * &p.b;
            sigma.view_mut((0, j * m + 1), (m_y, m_u)).copy_from(&block);
        }
        let free = &powers[k] * &p.y0;

        let mut row = p.p_y.transpose() * &sigma;
        row[(0, k * m)] -= 1.0;
        for c in 0..m_u {
            row[(0, k * m + 1 + c)] += p.p_u[c];
        }
        eq_matrix.set_row(k, &row.row(0));
        eq_rhs[k] = -p.p_y.dot(&free);

        let mut rows = &p.g * &sigma;
        let mut input_block = rows.view_mut((0, k * m + 1), (m_d, m_u));
        input_block += &p.h;
        ineq_matrix.view_mut((k * m_d, 0), (m_d, n)).copy_from(&rows);
        let rhs = &p.d[start + k] - &p.g * &free;
        ineq_rhs.rows_mut(k * m_d, m_d).copy_from(&rhs);
    }
    PlayerConstraints::new(ineq_matrix, ineq_rhs, eq_matrix, eq_rhs)
}

/// Lifted polytope using `d[0..horizon]`.
pub fn lift_constraints(p: &RhgPlayerSpec, horizon: usize) -> Result<PlayerConstraints> {
    lift_constraints_from(p, horizon, 0)
}

/// Lifts and checks the polytope is nonempty and bounded, naming the first
/// step at which it breaks.
pub fn lift_checked(p: &RhgPlayerSpec, horizon: usize, start: usize, player: usize) -> Result<PlayerConstraints> {
    let lifted = lift_constraints_from(p, horizon, start)?;
    match feasibility::bounding_box(&lifted, player) {
        Ok(_) => Ok(lifted),
        Err(err) => {
            for k in 1..=horizon {
                let prefix = lift_constraints_from(p, k, start)?;
                if let Err(e) = feasibility::bounding_box(&prefix, player) {
                    return Err(match e {
                        GameError::Infeasible(msg) => GameError::Infeasible(format!("{msg} at step {}", start + k - 1)),
                        GameError::Unbounded(msg) => GameError::Unbounded(format!("{msg} at step {}", start + k - 1)),
                        other => other,
                    });
                }
            }
            Err(err)
        }
    }
}

/// Inputs `u_0 … u_{T−1}` encoded in a lifted decision vector.
pub fn decode_inputs(x: &DVector<f64>, m_u: usize, horizon: usize) -> Vec<DVector<f64>> {
    let m = m_u + 1;
    (0..horizon).map(|k| x.rows(k * m + 1, m_u).into_owned()).collect()
}

/// Participation slots `φ_0 … φ_{T−1}` of a lifted decision vector.
pub fn decode_participations(x: &DVector<f64>, m_u: usize, horizon: usize) -> Vec<f64> {
    (0..horizon).map(|k| x[k * (m_u + 1)]).collect()
}

/// Lifted vector for given inputs, with participation slots filled from the dynamics.
pub fn encode_inputs(p: &RhgPlayerSpec, inputs: &[DVector<f64>]) -> DVector<f64> {
    let m = p.stage_dim();
    let states = p.simulate(inputs);
    let mut x = DVector::zeros(inputs.len() * m);
    for (k, u) in inputs.iter().enumerate() {
        x[k * m] = p.participation(&states[k], u);
        x.rows_mut(k * m + 1, p.m_u()).copy_from(u);
    }
    x
}

/// Per-step market parameters shared by all players.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketProfile {
    pub prizes: Vec<f64>,
    pub fictitious: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Price offsets `r_k` on the inputs (length `m_u`).
    pub offsets: Vec<DVector<f64>>,
}

impl MarketProfile {
    pub fn len(&self) -> usize {
        self.prizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prizes.is_empty()
    }

    fn check(&self, m_u: usize) -> Result<()> {
        let n = self.len();
        if self.fictitious.len() != n || self.alpha.len() != n || self.offsets.len() != n {
            return Err(GameError::Dimension("market profile vectors must share one length".into()));
        }
        if self.offsets.iter().any(|r| r.len() != m_u) {
            return Err(GameError::Dimension(format!("price offsets must have length {m_u}")));
        }
        Ok(())
    }

    pub fn window(&self, start: usize, len: usize) -> Result<MarketProfile> {
        if start + len > self.len() {
            return Err(GameError::Dimension(format!(
                "market profile has {} steps, window needs {}",
                self.len(),
                start + len
            )));
        }
        Ok(MarketProfile {
            prizes: self.prizes[start..start + len].to_vec(),
            fictitious: self.fictitious[start..start + len].to_vec(),
            alpha: self.alpha[start..start + len].to_vec(),
            offsets: self.offsets[start..start + len].to_vec(),
        })
    }
}

fn check_players(players: &[RhgPlayerSpec]) -> Result<usize> {
    let first = players
        .first()
        .ok_or_else(|| GameError::InvalidSpec("at least one player is required".into()))?;
    let m_u = first.m_u();
    if players.iter().any(|p| p.m_u() != m_u) {
        return Err(GameError::Dimension("all players must have the same number of inputs".into()));
    }
    Ok(m_u)
}

/// Horizon-`T` game starting at step `start` of the market and constraint data.
pub fn build_game(players: &[RhgPlayerSpec], market: &MarketProfile, horizon: usize, start: usize) -> Result<GameSpec> {
    let m_u = check_players(players)?;
    market.check(m_u)?;
    let window = market.window(start, horizon)?;
    let m = m_u + 1;
    let mut w = DVector::zeros(m);
    w[0] = 1.0;
    let mut mask = DVector::from_element(m, 1.0);
    mask[0] = 0.0;
    let offsets = window
        .offsets
        .iter()
        .map(|r| {
            let mut full = DVector::zeros(m);
            full.rows_mut(1, m_u).copy_from(r);
            full
        })
        .collect();
    let cost = CostModel::DynamicPrice {
        alpha: window.alpha.clone(),
        offsets,
        mask,
    };
    let constraints = players
        .iter()
        .enumerate()
        .map(|(i, p)| lift_checked(p, horizon, start, i))
        .collect::<Result<Vec<_>>>()?;
    // emptied state components pin inputs to zero, so the strict-slack check is waived
    let spec = GameSpec::from_parts_unchecked(
        window.prizes,
        window.fictitious,
        vec![vec![w; horizon]; players.len()],
        cost,
        constraints,
    )?;
    spec.validate_allowing_degenerate()?;
    Ok(spec)
}

#[derive(Debug, Clone)]
pub struct OpenLoopSolution {
    pub game: GameSpec,
    pub report: SolveReport,
    /// `inputs[i][k]`.
    pub inputs: Vec<Vec<DVector<f64>>>,
    /// `states[i][k]` for `k = 0 … T`.
    pub states: Vec<Vec<DVector<f64>>>,
}

/// Solves the `T`-step game once and decodes each player's input sequence.
pub fn solve_open_loop(
    players: &[RhgPlayerSpec],
    market: &MarketProfile,
    horizon: usize,
    config: &SolverConfig,
) -> Result<OpenLoopSolution> {
    solve_window(players, market, horizon, 0, config)
}

fn solve_window(
    players: &[RhgPlayerSpec],
    market: &MarketProfile,
    horizon: usize,
    start: usize,
    config: &SolverConfig,
) -> Result<OpenLoopSolution> {
    let game = build_game(players, market, horizon, start)?;
    let report = solve_ne(&game, config, None)?;
    let m_u = players[0].m_u();
    let inputs: Vec<Vec<DVector<f64>>> = (0..players.len())
        .map(|i| decode_inputs(report.strategy.player(i), m_u, horizon))
        .collect();
    let states = players.iter().zip(&inputs).map(|(p, u)| p.simulate(u)).collect();
    Ok(OpenLoopSolution {
        game,
        report,
        inputs,
        states,
    })
}

/// Realized outcome of one time step.
#[derive(Debug, Clone)]
pub struct RhgStep {
    pub time: usize,
    /// State of each player before the inputs are applied.
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub evaluation: StageEvaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceStatus {
    Complete,
    Aborted { time: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct RhgTrace {
    pub horizon: usize,
    pub total_steps: usize,
    pub steps: Vec<RhgStep>,
    pub final_states: Vec<DVector<f64>>,
    /// One report per solve, tagged with the time it was issued.
    pub solves: Vec<(usize, SolveReport)>,
    pub status: TraceStatus,
}

impl RhgTrace {
    /// Realized total profit per player.
    pub fn total_profits(&self) -> Vec<f64> {
        let n = self.final_states.len();
        let mut out = vec![0.0; n];
        for step in &self.steps {
            for (i, o) in out.iter_mut().enumerate() {
                *o += step.evaluation.payoffs[i] - step.evaluation.costs[i];
            }
        }
        out
    }

    /// Realized total lost prize `Σ_k Ψ_k`.
    pub fn total_loss(&self) -> f64 {
        self.steps.iter().map(|s| s.evaluation.loss).sum()
    }
}

/// Stage outcome for given states and inputs at market step `time`.
pub fn realized_stage(
    players: &[RhgPlayerSpec],
    market: &MarketProfile,
    time: usize,
    states: &[DVector<f64>],
    inputs: &[DVector<f64>],
) -> Result<StageEvaluation> {
    let m_u = check_players(players)?;
    let m = m_u + 1;
    let blocks = players
        .iter()
        .zip(states.iter().zip(inputs))
        .map(|(p, (y, u))| {
            let mut x = DVector::zeros(m);
            x[0] = p.participation(y, u);
            x.rows_mut(1, m_u).copy_from(u);
            x
        })
        .collect();
    let x = JointStrategy::from_blocks_unchecked(blocks, 1, m);
    let mut w = DVector::zeros(m);
    w[0] = 1.0;
    let mut mask = DVector::from_element(m, 1.0);
    mask[0] = 0.0;
    let mut offset = DVector::zeros(m);
    offset.rows_mut(1, m_u).copy_from(&market.offsets[time]);
    let stage = GameSpec::from_parts_unchecked(
        vec![market.prizes[time]],
        vec![market.fictitious[time]],
        vec![vec![w]; players.len()],
        CostModel::DynamicPrice {
            alpha: vec![market.alpha[time]],
            offsets: vec![offset],
            mask,
        },
        vec![PlayerConstraints::budget(m, 1.0); players.len()],
    )?;
    stage.evaluate_stage(&x, 0)
}

/// Closed-loop rollout with perfect forecasts.
pub fn run_receding_horizon(
    players: &[RhgPlayerSpec],
    market: &MarketProfile,
    horizon: usize,
    config: &SolverConfig,
) -> Result<RhgTrace> {
    run_receding_horizon_with_forecast(players, market, market, horizon, config)
}

/// Closed-loop rollout: solves with `forecast`, books profits with `realized`.
///
/// At times `0 … n_total − 1`, `n_total = T_total − T + 1`, the `T`-step game
/// is solved from the current states and the first input applied; the last
/// solve applies its whole remaining input sequence.
pub fn run_receding_horizon_with_forecast(
    players: &[RhgPlayerSpec],
    realized: &MarketProfile,
    forecast: &MarketProfile,
    horizon: usize,
    config: &SolverConfig,
) -> Result<RhgTrace> {
    let m_u = check_players(players)?;
    realized.check(m_u)?;
    forecast.check(m_u)?;
    let total_steps = realized.len();
    if horizon == 0 || horizon > total_steps || forecast.len() != total_steps {
        return Err(GameError::InvalidSpec(format!(
            "horizon {horizon} must lie in 1..={total_steps} and forecasts must cover every step"
        )));
    }
    let n_total = total_steps - horizon + 1;
    let mut current: Vec<RhgPlayerSpec> = players.to_vec();
    let mut trace = RhgTrace {
        horizon,
        total_steps,
        steps: Vec::new(),
        final_states: players.iter().map(|p| p.y0.clone()).collect(),
        solves: Vec::new(),
        status: TraceStatus::Complete,
    };

    for time in 0..n_total {
        let solution = match solve_window(&current, forecast, horizon, time, config) {
            Ok(s) => s,
            Err(e) => {
                trace.status = TraceStatus::Aborted { time, reason: e.to_string() };
                return Ok(trace);
            }
        };
        let converged = solution.report.converged;
        let residual = solution.report.certificate.max_residual;
        trace.solves.push((time, solution.report));
        if !converged {
            trace.status = TraceStatus::Aborted {
                time,
                reason: format!("equilibrium solve did not converge (residual {residual:e})"),
            };
            return Ok(trace);
        }
        let applied = if time + 1 == n_total { horizon } else { 1 };
        for offset in 0..applied {
            let t = time + offset;
            let states: Vec<DVector<f64>> = current.iter().map(|p| p.y0.clone()).collect();
            let inputs: Vec<DVector<f64>> = solution.inputs.iter().map(|u| u[offset].clone()).collect();
            let evaluation = realized_stage(&current, realized, t, &states, &inputs)?;
            current = current
                .iter()
                .zip(&inputs)
                .map(|(p, u)| p.with_initial_state(p.step(&p.y0, u)))
                .collect();
            trace.steps.push(RhgStep {
                time: t,
                states,
                inputs,
                evaluation,
            });
        }
    }
    trace.final_states = current.iter().map(|p| p.y0.clone()).collect();
    Ok(trace)
}
