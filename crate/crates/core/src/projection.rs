//! Euclidean projection onto a player's feasible polytope.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::game::PlayerConstraints;
use crate::qp::{self, QpConstraints, QpSolution};

/// Target point and the set it is projected onto.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionProblem<'a> {
    pub target: &'a DVector<f64>,
    pub constraints: &'a PlayerConstraints,
}

impl ProjectionProblem<'_> {
    pub fn solve(&self) -> Result<DVector<f64>> {
        project(self.target, self.constraints)
    }
}

/// `argmin_{y ∈ 𝓧} ‖y − target‖²`; dispatches to [`project_simplex`] for budget simplices.
pub fn project(target: &DVector<f64>, constraints: &PlayerConstraints) -> Result<DVector<f64>> {
    match constraints.simplex_budget() {
        Some(budget) => Ok(project_simplex(target, budget)),
        None => project_generic(target, constraints),
    }
}

/// Always uses the active-set QP, bypassing the simplex shortcut.
pub fn project_generic(target: &DVector<f64>, constraints: &PlayerConstraints) -> Result<DVector<f64>> {
    let mut x = project_with_multipliers(target, constraints)?.x;
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(x)
}

/// QP solution including the multipliers of the `≥` rows `[−A_iq; I]` and of `A_eq`.
pub fn project_with_multipliers(target: &DVector<f64>, c: &PlayerConstraints) -> Result<QpSolution> {
    let n = c.dim();
    let m_iq = c.n_ineq();
    let mut ge_matrix = DMatrix::zeros(m_iq + n, n);
    let mut ge_rhs = DVector::zeros(m_iq + n);
    ge_matrix.rows_mut(0, m_iq).copy_from(&(-&c.ineq_matrix));
    ge_rhs.rows_mut(0, m_iq).copy_from(&(-&c.ineq_rhs));
    for j in 0..n {
        ge_matrix[(m_iq + j, j)] = 1.0;
    }
    let scale = target
        .amax()
        .max(c.ineq_rhs.amax())
        .max(c.eq_rhs.amax())
        .max(1.0);
    let problem = QpConstraints {
        eq_matrix: c.eq_matrix.clone(),
        eq_rhs: c.eq_rhs.clone(),
        ge_matrix,
        ge_rhs,
    };
    qp::solve(target, &problem, 1e-13 * scale)
}

/// Projection onto `{x ≥ 0 : 1ᵀx = budget}` by sorting and thresholding.
pub fn project_simplex(target: &DVector<f64>, budget: f64) -> DVector<f64> {
    let mut sorted: Vec<f64> = target.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (idx, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - budget) / (idx + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    target.map(|v| (v - theta).max(0.0))
}
