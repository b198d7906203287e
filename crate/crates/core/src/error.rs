use thiserror::Error;

/// Errors raised by the game model and the solvers built on top of it.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GameError {
    #[error("invalid game specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("unbounded feasible set: {0}")]
    Unbounded(String),

    #[error("Slater condition fails for player {player}: best achievable minimum slack is {slack:e}")]
    NoStrictlyFeasiblePoint { player: usize, slack: f64 },

    #[error("strategy violates {kind} row {row} of player {player} by {violation:e}")]
    InfeasibleStrategy {
        player: usize,
        kind: RowKind,
        row: usize,
        violation: f64,
    },

    #[error("projection did not converge after {iterations} pivots (residual {residual:e})")]
    ProjectionStalled { iterations: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("game is outside the analytically unique class; enable best-effort mode to solve anyway")]
    NotUniqueClass,

    #[error("no zero-pattern configuration verified after {tried} candidates ({hint})")]
    NoVerifiedConfiguration { tried: usize, hint: String },

    #[error("price of anarchy undefined: equilibrium welfare is {0:e}")]
    UndefinedPoa(f64),
}

/// Which family of constraint rows a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Inequality,
    Equality,
    Nonnegativity,
}

impl std::fmt::Display for RowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowKind::Inequality => write!(f, "inequality"),
            RowKind::Equality => write!(f, "equality"),
            RowKind::Nonnegativity => write!(f, "nonnegativity"),
        }
    }
}

pub type Result<T> = std::result::Result<T, GameError>;
