//! Load-time regularity checks for polytopic strategy sets, via small LPs.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};
use nalgebra::DVector;

use crate::error::{GameError, Result};
use crate::game::PlayerConstraints;

/// Minimum slack that counts as strictly feasible.
const SLATER_MARGIN: f64 = 1e-9;

/// Coordinate-wise bounds of a feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

fn build(c: &PlayerConstraints, direction: OptimizationDirection, objective: &[f64]) -> (Problem, Vec<Variable>) {
    let mut lp = Problem::new(direction);
    let vars: Vec<Variable> = objective.iter().map(|&o| lp.add_var(o, (0.0, f64::INFINITY))).collect();
    for r in 0..c.n_ineq() {
        let mut e = LinearExpr::empty();
        for (j, v) in vars.iter().enumerate() {
            let a = c.ineq_matrix[(r, j)];
            if a != 0.0 {
                e.add(*v, a);
            }
        }
        lp.add_constraint(e, ComparisonOp::Le, c.ineq_rhs[r]);
    }
    for r in 0..c.n_eq() {
        let mut e = LinearExpr::empty();
        for (j, v) in vars.iter().enumerate() {
            let a = c.eq_matrix[(r, j)];
            if a != 0.0 {
                e.add(*v, a);
            }
        }
        lp.add_constraint(e, ComparisonOp::Eq, c.eq_rhs[r]);
    }
    (lp, vars)
}

fn lp_error(err: microlp::Error, player: usize, what: &str) -> GameError {
    match err {
        microlp::Error::Infeasible => GameError::Infeasible(format!("player {player} has an empty feasible set")),
        microlp::Error::Unbounded => GameError::Unbounded(format!("player {player}: {what} is unbounded")),
        other => GameError::Numerical(format!("player {player}: LP failed while computing {what}: {other}")),
    }
}

fn optimum(lp: &Problem, player: usize, what: &str) -> Result<f64> {
    let outcome = lp.solve().map_err(|e| lp_error(e, player, what))?;
    let sol = outcome
        .solution()
        .ok_or_else(|| GameError::Numerical(format!("player {player}: LP for {what} was interrupted")))?;
    Ok(sol.objective())
}

/// Per-coordinate bounds of `{x ≥ 0 : A_iq x ≤ b_iq, A_eq x = b_eq}`.
///
/// Fails with [`GameError::Infeasible`] when the set is empty and
/// [`GameError::Unbounded`] when some coordinate can grow without limit.
pub fn bounding_box(c: &PlayerConstraints, player: usize) -> Result<BoundingBox> {
    let n = c.dim();
    if let Some(budget) = c.simplex_budget() {
        return Ok(BoundingBox {
            lower: DVector::zeros(n),
            upper: DVector::from_element(n, budget),
        });
    }
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::zeros(n);
    let mut objective = vec![0.0; n];
    for j in 0..n {
        objective[j] = 1.0;
        let what = format!("coordinate {j}");
        let (lp, _) = build(c, OptimizationDirection::Minimize, &objective);
        lower[j] = optimum(&lp, player, &what)?.max(0.0);
        let (lp, _) = build(c, OptimizationDirection::Maximize, &objective);
        upper[j] = optimum(&lp, player, &what)?.max(lower[j]);
        objective[j] = 0.0;
    }
    Ok(BoundingBox { lower, upper })
}

/// Largest `s ≤ 1` such that some feasible `x` has every inequality slack at least `s`.
pub fn max_min_slack(c: &PlayerConstraints, player: usize) -> Result<f64> {
    if c.n_ineq() == 0 {
        return Ok(f64::INFINITY);
    }
    let n = c.dim();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<Variable> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let s = lp.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    for r in 0..c.n_ineq() {
        let mut e = LinearExpr::empty();
        for (j, v) in vars.iter().enumerate() {
            let a = c.ineq_matrix[(r, j)];
            if a != 0.0 {
                e.add(*v, a);
            }
        }
        e.add(s, 1.0);
        lp.add_constraint(e, ComparisonOp::Le, c.ineq_rhs[r]);
    }
    for r in 0..c.n_eq() {
        let mut e = LinearExpr::empty();
        for (j, v) in vars.iter().enumerate() {
            let a = c.eq_matrix[(r, j)];
            if a != 0.0 {
                e.add(*v, a);
            }
        }
        lp.add_constraint(e, ComparisonOp::Eq, c.eq_rhs[r]);
    }
    optimum(&lp, player, "minimum slack")
}

/// Nonempty, bounded and strictly feasible in the inequality rows.
pub fn verify_polytope(c: &PlayerConstraints, player: usize) -> Result<BoundingBox> {
    let bbox = bounding_box(c, player)?;
    let slack = max_min_slack(c, player)?;
    if slack <= SLATER_MARGIN {
        return Err(GameError::NoStrictlyFeasiblePoint { player, slack });
    }
    Ok(bbox)
}
