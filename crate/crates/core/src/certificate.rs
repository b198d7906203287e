//! KKT residual certificate for every player's best-response problem.
//!
//! For player `i` at `x̄` the certificate solves
//!
//! ```text
//! δ*_i = min_{λ ≥ 0, ν} ‖−∇u_i + A_actᵀ λ + A_eqᵀ ν‖²
//! ```
//!
//! where `A_act` stacks the active inequality rows together with `−e_j` for
//! every coordinate sitting on the nonnegativity bound. Under concavity
//! `δ*_i = 0` exactly when `x̄_i` is a best response.

use nalgebra::{DMatrix, DVector};

use crate::error::{GameError, Result};
use crate::game::{GameSpec, JointStrategy, PlayerConstraints};
use crate::nnls::nnls;

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerCertificate {
    /// Multipliers of the inequality rows (zero off the active set).
    pub lambda: DVector<f64>,
    /// Multipliers of the equality rows.
    pub nu: DVector<f64>,
    /// Multipliers of the implied `x ≥ 0` rows.
    pub nonneg_multipliers: DVector<f64>,
    pub active_rows: Vec<usize>,
    pub delta_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityCertificate {
    pub players: Vec<PlayerCertificate>,
    pub max_residual: f64,
}

impl OptimalityCertificate {
    pub fn all_below(&self, tol: f64) -> bool {
        self.players.iter().all(|p| p.delta_star < tol)
    }
}

/// Runs the certificate for all players of `spec` at `x`.
pub fn optimality_test(spec: &GameSpec, x: &JointStrategy, active_tol: f64) -> Result<OptimalityCertificate> {
    spec.check_feasible(x, active_tol)?;
    let grads = spec.all_profit_gradients(x)?;
    let players = grads
        .iter()
        .enumerate()
        .map(|(i, g)| certify_gradient(g, spec.constraints(i), x.player(i), active_tol, i))
        .collect::<Result<Vec<_>>>()?;
    let max_residual = players.iter().map(|p| p.delta_star).fold(0.0, f64::max);
    Ok(OptimalityCertificate { players, max_residual })
}

/// Certificate of `max f(x) over the polytope` at `x`, where `gradient = ∇f(x)`.
pub fn certify_gradient(
    gradient: &DVector<f64>,
    constraints: &PlayerConstraints,
    x: &DVector<f64>,
    active_tol: f64,
    player: usize,
) -> Result<PlayerCertificate> {
    constraints.check_feasible(x, active_tol, player)?;
    let n = x.len();
    if gradient.len() != n {
        return Err(GameError::Dimension(format!(
            "gradient has length {}, strategy has {n}",
            gradient.len()
        )));
    }
    let active_rows = constraints.active_inequalities(x, active_tol);
    let bound_rows: Vec<usize> = (0..n).filter(|&j| x[j] <= active_tol).collect();
    let n_act = active_rows.len() + bound_rows.len();

    let mut c = DMatrix::zeros(n, n_act);
    for (col, &r) in active_rows.iter().enumerate() {
        c.set_column(col, &constraints.ineq_matrix.row(r).transpose());
    }
    for (slot, &j) in bound_rows.iter().enumerate() {
        c[(j, active_rows.len() + slot)] = -1.0;
    }

    // project out the equality directions so ν drops from the NNLS
    let aeq_t = constraints.eq_matrix.transpose();
    let range = orthonormal_range(&aeq_t);
    let project_out = |v: &DMatrix<f64>| -> DMatrix<f64> {
        match &range {
            Some(u) => v - u * (u.transpose() * v),
            None => v.clone(),
        }
    };
    let pc = project_out(&c);
    let pg = project_out(&DMatrix::from_column_slice(n, 1, gradient.as_slice())).column(0).into_owned();
    let mult = nnls(&pc, &pg)?;

    let remainder = gradient - &c * &mult;
    let nu = if constraints.n_eq() > 0 {
        let svd = aeq_t.clone().svd(true, true);
        let eps = 1e-13 * svd.singular_values.max().max(1.0);
        svd.solve(&remainder, eps)
            .map_err(|e| GameError::Numerical(format!("equality multiplier solve failed: {e}")))?
    } else {
        DVector::zeros(0)
    };
    let residual = -gradient + &c * &mult + &aeq_t * &nu;

    let mut lambda = DVector::zeros(constraints.n_ineq());
    for (col, &r) in active_rows.iter().enumerate() {
        lambda[r] = mult[col];
    }
    let mut nonneg_multipliers = DVector::zeros(n);
    for (slot, &j) in bound_rows.iter().enumerate() {
        nonneg_multipliers[j] = mult[active_rows.len() + slot];
    }
    Ok(PlayerCertificate {
        lambda,
        nu,
        nonneg_multipliers,
        active_rows,
        delta_star: residual.norm_squared(),
    })
}

/// Orthonormal basis of the column space of `a`, or `None` if it is trivial.
fn orthonormal_range(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.ncols() == 0 {
        return None;
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-12 * smax.max(1.0))
        .collect();
    if keep.is_empty() {
        None
    } else {
        Some(u.select_columns(&keep))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::CostModel;

    #[test]
    fn singleton_feasible_set() {
        let spec = GameSpec::new(
            vec![10.0],
            vec![1.0],
            DVector::from_element(1, 1.0),
            CostModel::linear(vec![1.0]),
            vec![PlayerConstraints::budget(1, 3.0)],
        )
        .unwrap();
        let x = JointStrategy::new(vec![DVector::from_element(1, 3.0)], 1, 1).unwrap();
        let cert = optimality_test(&spec, &x, 1e-7).unwrap();
        assert!(cert.max_residual < 1e-20);
    }

    #[test]
    fn interior_point_gives_gradient_norm() {
        // x0 + x1 ≤ 10 with a point well inside
        let c = PlayerConstraints::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 10.0),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        let g = DVector::from_vec(vec![0.3, -0.4]);
        let cert = certify_gradient(&g, &c, &DVector::from_vec(vec![2.0, 3.0]), 1e-7, 0).unwrap();
        assert!((cert.delta_star - 0.25).abs() < 1e-15);
        assert!(cert.active_rows.is_empty());
    }

    #[test]
    fn infeasible_point_names_row() {
        let c = PlayerConstraints::budget(2, 1.0);
        let err = certify_gradient(&DVector::zeros(2), &c, &DVector::from_vec(vec![0.5, 0.6]), 1e-7, 4).unwrap_err();
        assert!(matches!(
            err,
            GameError::InfeasibleStrategy { player: 4, row: 0, .. }
        ));
    }
}
