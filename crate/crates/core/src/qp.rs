//! Dual active-set method (Goldfarb–Idnani) for `min ½‖x − t‖²` over a polytope.
//!
//! The Hessian is the identity, so the Cholesky factor drops out and the
//! method only maintains `N_A = J[:, ..q] · R` with `J` orthogonal and `R`
//! upper triangular, updated by Givens rotations as rows enter and leave.

use nalgebra::{DMatrix, DVector};

use crate::error::{GameError, Result};

/// Constraints in the form `A_eq x = b_eq`, `A_ge x ≥ b_ge`.
#[derive(Debug, Clone)]
pub struct QpConstraints {
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ge_matrix: DMatrix<f64>,
    pub ge_rhs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Free multipliers of the equality rows.
    pub eq_multipliers: DVector<f64>,
    /// Nonnegative multipliers of the `≥` rows.
    pub ge_multipliers: DVector<f64>,
    pub iterations: usize,
}

struct ActiveSet {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    /// Constraint index per active slot; equalities are `0..n_eq`, the rest offset by `n_eq`.
    rows: Vec<usize>,
    /// Multiplier per active slot.
    u: Vec<f64>,
    /// Sign applied to equality rows when they were added (+1 or −1).
    flips: Vec<f64>,
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0)
    } else {
        (a / h, b / h)
    }
}

impl ActiveSet {
    fn new(n: usize) -> Self {
        Self {
            j: DMatrix::identity(n, n),
            r: DMatrix::zeros(n, n),
            rows: Vec::new(),
            u: Vec::new(),
            flips: Vec::new(),
        }
    }

    fn q(&self) -> usize {
        self.rows.len()
    }

    /// Appends `normal` given `d = Jᵀ normal`; returns false if it is dependent.
    fn add(&mut self, mut d: DVector<f64>) -> bool {
        let n = d.len();
        let q = self.q();
        for k in (q + 1..n).rev() {
            let (c, s) = givens(d[k - 1], d[k]);
            if s == 0.0 {
                continue;
            }
            d[k - 1] = c * d[k - 1] + s * d[k];
            d[k] = 0.0;
            for row in 0..n {
                let a = self.j[(row, k - 1)];
                let b = self.j[(row, k)];
                self.j[(row, k - 1)] = c * a + s * b;
                self.j[(row, k)] = -s * a + c * b;
            }
        }
        if d[q].abs() <= f64::EPSILON * d.norm().max(1.0) {
            return false;
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        true
    }

    /// Removes active slot `l` and retriangularises `R`.
    fn drop(&mut self, l: usize) {
        let n = self.j.nrows();
        let q = self.q();
        for col in l..q - 1 {
            for i in 0..n {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..n {
            self.r[(i, q - 1)] = 0.0;
        }
        for k in l..q - 1 {
            let (c, s) = givens(self.r[(k, k)], self.r[(k + 1, k)]);
            for col in k..q - 1 {
                let a = self.r[(k, col)];
                let b = self.r[(k + 1, col)];
                self.r[(k, col)] = c * a + s * b;
                self.r[(k + 1, col)] = -s * a + c * b;
            }
            self.r[(k + 1, k)] = 0.0;
            for row in 0..n {
                let a = self.j[(row, k)];
                let b = self.j[(row, k + 1)];
                self.j[(row, k)] = c * a + s * b;
                self.j[(row, k + 1)] = -s * a + c * b;
            }
        }
        self.rows.remove(l);
        self.u.remove(l);
        self.flips.remove(l);
    }

    /// Solves `R[..q, ..q] r = d[..q]` by back substitution.
    fn back_solve(&self, d: &DVector<f64>) -> Vec<f64> {
        let q = self.q();
        let mut out = vec![0.0; q];
        for i in (0..q).rev() {
            let tail: f64 = (i + 1..q).map(|k| self.r[(i, k)] * out[k]).sum();
            out[i] = (d[i] - tail) / self.r[(i, i)];
        }
        out
    }
}

/// Minimises `½‖x − target‖²` subject to `constraints`.
///
/// Violated rows enter most-violated first, ties broken by the lowest row
/// index, with all equality rows entering before any inequality.
pub fn solve(target: &DVector<f64>, constraints: &QpConstraints, tol: f64) -> Result<QpSolution> {
    let n = target.len();
    let n_eq = constraints.eq_matrix.nrows();
    let n_ge = constraints.ge_matrix.nrows();
    let normal = |idx: usize| -> DVector<f64> {
        if idx < n_eq {
            constraints.eq_matrix.row(idx).transpose()
        } else {
            constraints.ge_matrix.row(idx - n_eq).transpose()
        }
    };
    let rhs = |idx: usize| if idx < n_eq { constraints.eq_rhs[idx] } else { constraints.ge_rhs[idx - n_eq] };

    let mut x = target.clone();
    let mut set = ActiveSet::new(n);
    let max_iter = 50 * (n + n_eq + n_ge) + 100;
    let mut iterations = 0;

    loop {
        // pick the next violated row
        let mut chosen: Option<(usize, f64)> = None;
        for idx in 0..n_eq {
            if set.rows.contains(&idx) {
                continue;
            }
            let s = normal(idx).dot(&x) - rhs(idx);
            if s.abs() > tol && chosen.is_none_or(|(_, v)| s.abs() > v) {
                chosen = Some((idx, s.abs()));
            }
        }
        if chosen.is_none() {
            for idx in n_eq..n_eq + n_ge {
                if set.rows.contains(&idx) {
                    continue;
                }
                let s = normal(idx).dot(&x) - rhs(idx);
                if s < -tol && chosen.is_none_or(|(_, v)| -s > v) {
                    chosen = Some((idx, -s));
                }
            }
        }
        let Some((p, _)) = chosen else { break };

        let mut flip = 1.0;
        if p < n_eq && normal(p).dot(&x) - rhs(p) > 0.0 {
            flip = -1.0;
        }
        let np = normal(p) * flip;
        let bp = rhs(p) * flip;
        let mut u_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                let residual = (np.dot(&x) - bp).abs();
                return Err(GameError::ProjectionStalled { iterations, residual });
            }
            let q = set.q();
            let d = set.j.transpose() * &np;
            let mut z = DVector::zeros(n);
            for k in q..n {
                z.axpy(d[k], &set.j.column(k), 1.0);
            }
            let r = set.back_solve(&d);

            // partial step: largest move keeping active inequality multipliers nonnegative
            let mut t1 = f64::INFINITY;
            let mut drop_slot = None;
            for (slot, &idx) in set.rows.iter().enumerate() {
                if idx >= n_eq && r[slot] > 0.0 {
                    let ratio = set.u[slot] / r[slot];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_slot = Some(slot);
                    }
                }
            }
            let slack = np.dot(&x) - bp;
            let curvature = z.dot(&np);
            let t2 = if z.norm() <= 1e-13 * np.norm().max(1.0) || curvature <= 0.0 {
                f64::INFINITY
            } else {
                -slack / curvature
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(GameError::Infeasible(format!(
                    "constraint row {p} cannot be satisfied together with the active rows"
                )));
            }
            if t2.is_finite() {
                x.axpy(t, &z, 1.0);
            }
            for (slot, &ri) in r.iter().enumerate() {
                set.u[slot] -= t * ri;
            }
            u_p += t;

            if t2 <= t1 {
                let d = set.j.transpose() * &np;
                if !set.add(d) {
                    return Err(GameError::Numerical(format!("row {p} is linearly dependent on the active rows")));
                }
                set.rows.push(p);
                set.u.push(u_p);
                set.flips.push(flip);
                break;
            }
            set.drop(drop_slot.expect("finite partial step has a blocking row"));
        }
    }

    let mut eq_multipliers = DVector::zeros(n_eq);
    let mut ge_multipliers = DVector::zeros(n_ge);
    for (slot, &idx) in set.rows.iter().enumerate() {
        if idx < n_eq {
            eq_multipliers[idx] = set.u[slot] * set.flips[slot];
        } else {
            ge_multipliers[idx - n_eq] = set.u[slot].max(0.0);
        }
    }
    Ok(QpSolution {
        x,
        eq_multipliers,
        ge_multipliers,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kkt_residual(t: &DVector<f64>, c: &QpConstraints, s: &QpSolution) -> f64 {
        // x − t = A_eqᵀν + A_geᵀλ
        let stat = &s.x - t - c.eq_matrix.transpose() * &s.eq_multipliers - c.ge_matrix.transpose() * &s.ge_multipliers;
        let mut worst = stat.amax();
        let slack = &c.ge_matrix * &s.x - &c.ge_rhs;
        for i in 0..slack.len() {
            worst = worst.max(-slack[i]).max((s.ge_multipliers[i] * slack[i]).abs());
        }
        let eq = &c.eq_matrix * &s.x - &c.eq_rhs;
        worst.max(eq.amax())
    }

    #[test]
    fn box_projection() {
        let c = QpConstraints {
            eq_matrix: DMatrix::zeros(0, 2),
            eq_rhs: DVector::zeros(0),
            ge_matrix: DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
            ge_rhs: DVector::from_vec(vec![0.0, 0.0, -1.0, -1.0]),
        };
        let t = DVector::from_vec(vec![2.0, -3.0]);
        let s = solve(&t, &c, 1e-12).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && s.x[1].abs() < 1e-14);
        assert!(kkt_residual(&t, &c, &s) < 1e-12);
    }

    #[test]
    fn equality_with_sign_flip() {
        // x0 + x1 = 1 from above, with x ≥ 0
        let c = QpConstraints {
            eq_matrix: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            eq_rhs: DVector::from_vec(vec![1.0]),
            ge_matrix: DMatrix::identity(2, 2),
            ge_rhs: DVector::zeros(2),
        };
        let t = DVector::from_vec(vec![2.0, 0.0]);
        let s = solve(&t, &c, 1e-12).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && s.x[1].abs() < 1e-14);
        assert!(kkt_residual(&t, &c, &s) < 1e-12);
        assert!(s.eq_multipliers[0] < 0.0);
    }

    #[test]
    fn reports_infeasibility() {
        let c = QpConstraints {
            eq_matrix: DMatrix::zeros(0, 1),
            eq_rhs: DVector::zeros(0),
            ge_matrix: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            ge_rhs: DVector::from_vec(vec![2.0, -1.0]),
        };
        assert!(matches!(solve(&DVector::zeros(1), &c, 1e-12), Err(GameError::Infeasible(_))));
    }
}
