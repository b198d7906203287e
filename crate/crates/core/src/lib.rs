//! Equilibrium and welfare computations for multi-stage lossy Tullock markets.

// `!(a > b)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod blotto;
pub mod centralized;
pub mod certificate;
pub mod error;
pub mod feasibility;
pub mod game;
pub mod nnls;
pub mod projection;
pub mod qp;
pub mod rhg;
pub mod rootfind;
pub mod solver;

pub use certificate::{optimality_test, OptimalityCertificate, PlayerCertificate};
pub use error::{GameError, Result, RowKind};
pub use game::{CostModel, GameSpec, JointStrategy, PlayerConstraints, StageEvaluation};
pub use solver::{solve_ne, SolveReport, SolverConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
