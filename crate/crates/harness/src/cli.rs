//! Command-line interface. Each subcommand writes its results plus a
//! `manifest.json` into `--out`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, ensure, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tullock_core::analysis::{uniqueness_test, UniquenessVerdict};
use tullock_core::blotto::{benchmark_methods, solve_semi_analytical, BlottoSpec};
use tullock_core::centralized::{solve_proportional_fair, solve_system_optimum, CentralizedConfig};
use tullock_core::rhg::{run_receding_horizon, RhgTrace, TraceStatus};
use tullock_core::{solve_ne, GameError, GameSpec, JointStrategy, SolverConfig};

use crate::case_study::{self, theta_grid, CaseStudyConfig};
use crate::output::{num, sha256_hex, CsvTable, RunWriter, StrategyFile};
use crate::schema::SpecFile;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(name = "tullock", version, about = "Equilibria and welfare of lossy multi-stage Tullock markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Input spec (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Certificate tolerance of the equilibrium solver.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub gamma_bar: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Inner iterations per step size.
    #[arg(long)]
    pub t_out: Option<usize>,
}

impl CommonArgs {
    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let mut c = SolverConfig::default();
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = self.gamma_bar {
            c.gamma_bar = v;
        }
        if let Some(v) = self.eta {
            c.eta = v;
        }
        if let Some(v) = self.t_out {
            c.t_out = v;
        }
        c.validate().map_err(|e| CliError::config(e.into()))?;
        Ok(c)
    }

    fn require_spec(&self) -> Result<SpecFile, CliError> {
        let path = self
            .spec
            .as_ref()
            .ok_or_else(|| CliError::config(anyhow!("this command needs --spec <path>")))?;
        load_spec(path)
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
pub enum Command {
    /// Nash equilibrium by projected pseudo-gradient iterations.
    SolveNe(CommonArgs),
    /// Blotto equilibrium by configuration search.
    SolveBlotto {
        #[command(flatten)]
        common: CommonArgs,
        /// Scale applied to the unit costs.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// Overrides every fictitious participation.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// System optimum.
    SolveSo(CommonArgs),
    /// Proportionally fair strategy.
    SolvePf(CommonArgs),
    /// Uniqueness of the equilibrium.
    CheckUnique {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Receding-horizon rollout of the `rhg` section.
    RunRhg {
        #[command(flatten)]
        common: CommonArgs,
        /// Overrides the horizon stored in the spec.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Reproduces the two-level mobility case study.
    CaseStudy {
        #[arg(value_enum)]
        part: CasePart,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of θ points in [0.1, 12].
        #[arg(long, default_value_t = case_study::DEFAULT_THETA_POINTS)]
        theta_grid: usize,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Times the closed-form Blotto solver against the iterative one.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CasePart {
    /// Price of anarchy and company profits over θ.
    Poa,
    /// Open-loop charging plan of the region-1 fleets.
    Fleet,
    /// Receding-horizon rollouts for each planning horizon.
    Horizon,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveNe(_) => "solve-ne",
            Command::SolveBlotto { .. } => "solve-blotto",
            Command::SolveSo(_) => "solve-so",
            Command::SolvePf(_) => "solve-pf",
            Command::CheckUnique { .. } => "check-unique",
            Command::RunRhg { .. } => "run-rhg",
            Command::CaseStudy { part: CasePart::Poa, .. } => "case-study poa",
            Command::CaseStudy { part: CasePart::Fleet, .. } => "case-study fleet",
            Command::CaseStudy { part: CasePart::Horizon, .. } => "case-study horizon",
            Command::Benchmark { .. } => "benchmark",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::SolveNe(c) | Command::SolveSo(c) | Command::SolvePf(c) => c,
            Command::SolveBlotto { common, .. }
            | Command::CheckUnique { common, .. }
            | Command::RunRhg { common, .. }
            | Command::CaseStudy { common, .. }
            | Command::Benchmark { common, .. } => common,
        }
    }
}

/// What a failure is attributed to; each maps to its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Solver,
    Io,
    Verification,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 3,
            Category::Solver => 4,
            Category::Io => 5,
            Category::Verification => 6,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Solver => "solver",
            Category::Io => "io",
            Category::Verification => "verification",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn config(error: anyhow::Error) -> Self {
        Self { category: Category::Config, error }
    }

    pub fn solver(error: anyhow::Error) -> Self {
        Self { category: Category::Solver, error }
    }

    pub fn io(error: anyhow::Error) -> Self {
        Self { category: Category::Io, error }
    }

    pub fn verification(error: anyhow::Error) -> Self {
        Self {
            category: Category::Verification,
            error,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {:#}", self.category.label(), self.error)
    }
}

type CliResult<T> = Result<T, CliError>;

fn solver_err<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::solver(e.into())
}

fn io_err<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::io(e.into())
}

fn load_spec(path: &Path) -> CliResult<SpecFile> {
    SpecFile::load(path).map_err(CliError::config)
}

fn game_of(spec: &SpecFile) -> CliResult<GameSpec> {
    spec.game_spec().map_err(CliError::config)
}

/// Hash of everything that determines the results: the command with its
/// options (output directory excluded) and the bytes of the spec file.
fn config_hash(command: &Command) -> CliResult<String> {
    let mut bytes = serde_json::to_vec(command).map_err(io_err)?;
    if let Some(path) = &command.common().spec {
        bytes.extend(std::fs::read(path).with_context(|| format!("cannot read {}", path.display())).map_err(CliError::config)?);
    }
    Ok(sha256_hex(&bytes))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let command = &cli.command;
    let common = command.common();
    if let Some(path) = &common.spec {
        if !path.exists() {
            return Err(CliError::config(anyhow!("spec file {} does not exist", path.display())));
        }
    }
    let hash = config_hash(command)?;
    let mut writer = RunWriter::new(&common.out).map_err(io_err)?;
    let started = Instant::now();
    match command {
        Command::SolveNe(c) => solve_ne_cmd(c, &mut writer)?,
        Command::SolveBlotto { common, theta, epsilon } => solve_blotto_cmd(common, *theta, *epsilon, &mut writer)?,
        Command::SolveSo(c) => centralized_cmd(c, false, &mut writer)?,
        Command::SolvePf(c) => centralized_cmd(c, true, &mut writer)?,
        Command::CheckUnique { common, samples } => check_unique_cmd(common, *samples, &mut writer)?,
        Command::RunRhg { common, horizon } => run_rhg_cmd(common, *horizon, &mut writer)?,
        Command::CaseStudy {
            part,
            common,
            theta_grid,
            epsilon,
        } => case_study_cmd(*part, common, *theta_grid, *epsilon, &mut writer)?,
        Command::Benchmark { common, theta, epsilon } => benchmark_cmd(common, *theta, *epsilon, &mut writer)?,
    }
    writer.record_time("total", started.elapsed().as_secs_f64());
    writer.finish(command.name(), hash, common.seed).map_err(io_err)?;
    Ok(())
}

fn strategy_table(x: &JointStrategy) -> CsvTable {
    let mut t = CsvTable::new(["player", "stage", "category", "value"]);
    for i in 0..x.n_players() {
        for k in 0..x.n_stages() {
            for j in 0..x.n_categories() {
                t.push(vec![i.to_string(), k.to_string(), j.to_string(), num(x.get(i, k, j))]);
            }
        }
    }
    t
}

/// Writes a strategy file and reads it back through verification.
fn emit_strategy(writer: &mut RunWriter, stem: &str, file: &StrategyFile, spec: &GameSpec) -> CliResult<()> {
    let path = writer.write_json(&format!("{stem}.json"), file).map_err(io_err)?;
    let (_, x) = StrategyFile::load(&path, spec).map_err(CliError::verification)?;
    writer.write_csv(&format!("{stem}.csv"), &strategy_table(&x)).map_err(io_err)?;
    Ok(())
}

fn solve_ne_cmd(common: &CommonArgs, writer: &mut RunWriter) -> CliResult<()> {
    let spec = game_of(&common.require_spec()?)?;
    let config = common.solver_config()?;
    let report = solve_ne(&spec, &config, None).map_err(solver_err)?;
    writer.record_time("solve", report.wall_time);
    let mut file = StrategyFile::from_strategy(
        "nash_equilibrium",
        &spec,
        &report.strategy,
        report.certificate.max_residual,
        report.converged,
    )
    .map_err(solver_err)?;
    file.extra.insert("outer_iterations".into(), report.outer_iterations as f64);
    file.extra.insert("inner_iterations".into(), report.inner_iterations_total as f64);
    file.extra.insert("final_step".into(), report.final_step);
    emit_strategy(writer, "ne_solution", &file, &spec)?;
    if !report.converged {
        return Err(CliError::solver(anyhow!(
            "equilibrium solve did not converge (residual {:e}); best iterate written",
            report.certificate.max_residual
        )));
    }
    Ok(())
}

fn blotto_of(common: &CommonArgs, theta: f64, epsilon: Option<f64>) -> CliResult<BlottoSpec> {
    common.require_spec()?.blotto_spec(theta, epsilon).map_err(CliError::config)
}

fn solve_blotto_cmd(common: &CommonArgs, theta: f64, epsilon: Option<f64>, writer: &mut RunWriter) -> CliResult<()> {
    let blotto = blotto_of(common, theta, epsilon)?;
    let game = blotto.to_game_spec().map_err(|e| CliError::config(e.into()))?;
    let started = Instant::now();
    let file = match solve_semi_analytical(&blotto) {
        Ok(sol) => {
            let x = sol.to_joint_strategy().map_err(solver_err)?;
            let mut file =
                StrategyFile::from_strategy("blotto_semi_analytical", &game, &x, sol.max_residual, sol.verified).map_err(solver_err)?;
            file.extra.insert("root_t".into(), sol.t_nu_root);
            file.extra.insert("configurations_tried".into(), sol.configurations_tried as f64);
            file.extra.insert("f_evaluations".into(), sol.f_evaluations as f64);
            file
        }
        Err(GameError::NoVerifiedConfiguration { .. }) => {
            // boundary equilibria outside the closed form's reach
            let report = solve_ne(&game, &common.solver_config()?, None).map_err(solver_err)?;
            StrategyFile::from_strategy(
                "blotto_iterative",
                &game,
                &report.strategy,
                report.certificate.max_residual,
                report.converged,
            )
            .map_err(solver_err)?
        }
        Err(e) => return Err(solver_err(e)),
    };
    writer.record_time("solve", started.elapsed().as_secs_f64());
    let x = file.strategy().map_err(solver_err)?;
    for (i, &r) in blotto.budgets.iter().enumerate() {
        let spent = x.player(i).sum();
        if (spent - r).abs() > 1e-8 {
            return Err(CliError::verification(anyhow!("player {i} spends {spent}, budget {r}")));
        }
    }
    emit_strategy(writer, "blotto_solution", &file, &game)
}

fn centralized_cmd(common: &CommonArgs, fair: bool, writer: &mut RunWriter) -> CliResult<()> {
    let spec = game_of(&common.require_spec()?)?;
    let config = CentralizedConfig {
        seed: common.seed,
        ..CentralizedConfig::default()
    };
    let started = Instant::now();
    let solution = if fair {
        // the equilibrium is a natural positive-profit start
        let solver = SolverConfig {
            best_effort: true,
            ..common.solver_config()?
        };
        let ne = solve_ne(&spec, &solver, None).ok().map(|r| r.strategy);
        solve_proportional_fair(&spec, &config, ne.as_ref())
    } else {
        solve_system_optimum(&spec, &config, None)
    }
    .map_err(solver_err)?;
    writer.record_time("solve", started.elapsed().as_secs_f64());
    let kind = if fair { "proportional_fair" } else { "system_optimum" };
    let mut file = StrategyFile::from_strategy(kind, &spec, &solution.strategy, solution.kkt_residual, solution.converged)
        .map_err(solver_err)?;
    file.extra.insert("objective".into(), solution.objective_value);
    file.extra.insert("iterations".into(), solution.iterations as f64);
    emit_strategy(writer, if fair { "pf_solution" } else { "so_solution" }, &file, &spec)
}

#[derive(Serialize)]
struct UniquenessFile {
    verdict: String,
    samples_checked: usize,
    min_eigenvalue_seen: Option<f64>,
    max_eigenvalue_seen: Option<f64>,
    witness: Option<Vec<Vec<f64>>>,
}

fn check_unique_cmd(common: &CommonArgs, samples: usize, writer: &mut RunWriter) -> CliResult<()> {
    let spec = game_of(&common.require_spec()?)?;
    let report = uniqueness_test(&spec, samples, common.seed).map_err(solver_err)?;
    let verdict = match report.verdict {
        UniquenessVerdict::AnalyticallyUnique => "analytically_unique",
        UniquenessVerdict::SampledPass => "sampled_pass",
        UniquenessVerdict::Falsified => "falsified",
    };
    let file = UniquenessFile {
        verdict: verdict.into(),
        samples_checked: report.samples_checked,
        min_eigenvalue_seen: report.min_eigenvalue_seen,
        max_eigenvalue_seen: report.max_eigenvalue_seen,
        witness: report
            .witness
            .map(|w| w.blocks().iter().map(|b| b.iter().copied().collect()).collect()),
    };
    writer.write_json("uniqueness.json", &file).map_err(io_err)?;
    Ok(())
}

fn trace_tables(traces: &[RhgTrace]) -> (CsvTable, CsvTable) {
    let m_u = traces
        .first()
        .and_then(|t| t.steps.first())
        .map_or(0, |s| s.inputs[0].len());
    let mut header: Vec<String> = ["horizon", "time", "player", "phi"].iter().map(|s| s.to_string()).collect();
    header.extend((0..m_u).map(|j| format!("u_{j}")));
    header.extend(["payoff".to_string(), "cost".to_string()]);
    let mut steps = CsvTable::new(header);
    let mut loss = CsvTable::new(["horizon", "time", "loss"]);
    for trace in traces {
        for s in &trace.steps {
            for (i, u) in s.inputs.iter().enumerate() {
                let mut row = vec![
                    trace.horizon.to_string(),
                    s.time.to_string(),
                    i.to_string(),
                    num(s.evaluation.participations[i]),
                ];
                row.extend(u.iter().map(|&v| num(v)));
                row.push(num(s.evaluation.payoffs[i]));
                row.push(num(s.evaluation.costs[i]));
                steps.push(row);
            }
            loss.push(vec![trace.horizon.to_string(), s.time.to_string(), num(s.evaluation.loss)]);
        }
    }
    (steps, loss)
}

fn check_complete(trace: &RhgTrace) -> CliResult<()> {
    match &trace.status {
        TraceStatus::Complete => Ok(()),
        TraceStatus::Aborted { time, reason } => Err(CliError::solver(anyhow!(
            "horizon {} rollout aborted at step {time}: {reason}",
            trace.horizon
        ))),
    }
}

#[derive(Serialize)]
struct RhgSummary {
    horizon: usize,
    total_steps: usize,
    total_profits: Vec<f64>,
    total_loss: f64,
    solves: usize,
}

fn run_rhg_cmd(common: &CommonArgs, horizon: Option<usize>, writer: &mut RunWriter) -> CliResult<()> {
    let spec = common.require_spec()?;
    let (players, market, stored) = spec.rhg_parts().map_err(CliError::config)?;
    let horizon = horizon.unwrap_or(stored);
    let started = Instant::now();
    let trace = run_receding_horizon(&players, &market, horizon, &common.solver_config()?).map_err(solver_err)?;
    writer.record_time("rollout", started.elapsed().as_secs_f64());
    let (steps, loss) = trace_tables(std::slice::from_ref(&trace));
    writer.write_csv("rhg_steps.csv", &steps).map_err(io_err)?;
    writer.write_csv("rhg_stage_loss.csv", &loss).map_err(io_err)?;
    let summary = RhgSummary {
        horizon,
        total_steps: trace.total_steps,
        total_profits: trace.total_profits(),
        total_loss: trace.total_loss(),
        solves: trace.solves.len(),
    };
    writer.write_json("rhg_summary.json", &summary).map_err(io_err)?;
    check_complete(&trace)
}

/// Case-study settings, optionally overridden by a spec file's `blotto`
/// (upper level) and `rhg.market` (lower level) sections.
pub fn case_config(common: &CommonArgs, theta_points: usize, epsilon: Option<f64>) -> CliResult<CaseStudyConfig> {
    let mut cfg = CaseStudyConfig {
        thetas: theta_grid(theta_points),
        ..CaseStudyConfig::default()
    };
    if let Some(path) = &common.spec {
        let spec = load_spec(path)?;
        if let (Some(b), Some(g)) = (&spec.blotto, &spec.game) {
            cfg.fleets = b.budgets.clone();
            cfg.cost_template = b.betas.clone();
            cfg.region_prizes = g.prizes.clone();
            let first = g.epsilons.first().copied().unwrap_or(cfg.epsilon);
            if g.epsilons.iter().any(|&e| e != first) {
                return Err(CliError::config(anyhow!("the case study uses one ε for every region")));
            }
            cfg.epsilon = first;
        }
        if spec.rhg.is_some() {
            let (_, market, _) = spec.rhg_parts().map_err(CliError::config)?;
            cfg.profile = market;
        }
    }
    if let Some(e) = epsilon {
        cfg.epsilon = e;
    }
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

fn case_study_cmd(
    part: CasePart,
    common: &CommonArgs,
    theta_points: usize,
    epsilon: Option<f64>,
    writer: &mut RunWriter,
) -> CliResult<()> {
    let cfg = case_config(common, theta_points, epsilon)?;
    let solver = common.solver_config()?;
    let started = Instant::now();
    match part {
        CasePart::Poa => {
            let rows = case_study::poa_sweep(&cfg, &solver).map_err(solver_err)?;
            writer.record_time("sweep", started.elapsed().as_secs_f64());
            let mut poa = CsvTable::new(["theta", "welf_so", "welf_ne", "poa"]);
            let mut header = vec!["theta".to_string()];
            header.extend((1..=cfg.fleets.len()).map(|i| format!("company_{i}")));
            header.push("method_gap".into());
            let mut profits = CsvTable::new(header);
            for r in &rows {
                poa.push(vec![num(r.theta), num(r.welf_so), num(r.welf_ne), num(r.poa)]);
                let mut row = vec![num(r.theta)];
                row.extend(r.profits.iter().map(|&p| num(p)));
                row.push(r.method_gap.map_or(String::new(), num));
                profits.push(row);
            }
            writer.write_csv("poa.csv", &poa).map_err(io_err)?;
            writer.write_csv("profits_vs_theta.csv", &profits).map_err(io_err)?;
        }
        CasePart::Fleet => {
            let fleets = case_study::region_fleets(&cfg, &solver).map_err(solver_err)?;
            let plan = case_study::fleet_plan(&cfg, &fleets, &solver).map_err(solver_err)?;
            writer.record_time("solve", started.elapsed().as_secs_f64());
            ensure_converged(plan.report.converged, plan.report.certificate.max_residual)?;
            let mut fleet_table = CsvTable::new(["company", "fleet"]);
            for (i, f) in fleets.iter().enumerate() {
                fleet_table.push(vec![(i + 1).to_string(), num(*f)]);
            }
            let mut table = CsvTable::new([
                "time", "company", "phi", "u_red", "u_yellow", "u_green", "y_red", "y_yellow", "y_green",
            ]);
            for (i, (inputs, states)) in plan.inputs.iter().zip(&plan.states).enumerate() {
                for (k, u) in inputs.iter().enumerate() {
                    let mut row = vec![k.to_string(), (i + 1).to_string(), num(plan.report.strategy.get(i, k, 0))];
                    row.extend(u.iter().map(|&v| num(v)));
                    row.extend(states[k].iter().map(|&v| num(v)));
                    table.push(row);
                }
            }
            writer.write_csv("fleets.csv", &fleet_table).map_err(io_err)?;
            writer.write_csv("fleet_plan.csv", &table).map_err(io_err)?;
        }
        CasePart::Horizon => {
            let fleets = case_study::region_fleets(&cfg, &solver).map_err(solver_err)?;
            let traces = case_study::horizon_sweep(&cfg, &fleets, &solver).map_err(solver_err)?;
            writer.record_time("rollouts", started.elapsed().as_secs_f64());
            for t in &traces {
                check_complete(t)?;
            }
            let mut header = vec!["horizon".to_string()];
            header.extend((1..=fleets.len()).map(|i| format!("company_{i}")));
            header.push("lost_profit".into());
            let mut totals = CsvTable::new(header);
            for t in &traces {
                let mut row = vec![t.horizon.to_string()];
                row.extend(t.total_profits().iter().map(|&p| num(p)));
                row.push(num(t.total_loss()));
                totals.push(row);
            }
            let (steps, loss) = trace_tables(&traces);
            writer.write_csv("horizon_profits.csv", &totals).map_err(io_err)?;
            writer.write_csv("stage_loss.csv", &loss).map_err(io_err)?;
            writer.write_csv("horizon_steps.csv", &steps).map_err(io_err)?;
        }
    }
    Ok(())
}

fn ensure_converged(converged: bool, residual: f64) -> CliResult<()> {
    (|| -> anyhow::Result<()> {
        ensure!(converged, "equilibrium solve did not converge (residual {residual:e})");
        Ok(())
    })()
    .map_err(CliError::solver)
}

fn benchmark_cmd(common: &CommonArgs, theta: f64, epsilon: Option<f64>, writer: &mut RunWriter) -> CliResult<()> {
    let blotto = match &common.spec {
        Some(_) => blotto_of(common, theta, epsilon)?,
        None => {
            let mut cfg = CaseStudyConfig::default();
            if let Some(e) = epsilon {
                cfg.epsilon = e;
            }
            cfg.upper_level(theta).map_err(CliError::config)?
        }
    };
    let report = benchmark_methods(&blotto, &common.solver_config()?).map_err(solver_err)?;
    writer.record_time("semi_analytical", report.semi_analytical_seconds);
    writer.record_time("iterative", report.iterative_seconds);
    let mut table = CsvTable::new(["method", "seconds", "evaluations"]);
    table.push(vec![
        "semi_analytical".into(),
        num(report.semi_analytical_seconds),
        report.semi_analytical_evaluations.to_string(),
    ]);
    table.push(vec![
        "iterative".into(),
        num(report.iterative_seconds),
        report.iterative_inner_steps.to_string(),
    ]);
    writer.write_csv("benchmark.csv", &table).map_err(io_err)?;
    let mut agreement = CsvTable::new(["max_abs_difference"]);
    agreement.push(vec![num(report.agreement)]);
    writer.write_csv("benchmark_agreement.csv", &agreement).map_err(io_err)?;
    Ok(())
}
