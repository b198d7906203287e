//! Lawson–Hanson active-set solver for `min ‖A x − b‖₂` subject to `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GameError, Result};

/// Unconstrained least squares on the columns in `passive`, zero elsewhere.
fn passive_solve(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize]) -> Result<DVector<f64>> {
    let sub = a.select_columns(passive);
    let svd = sub.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(1.0);
    let z = svd
        .solve(b, eps)
        .map_err(|e| GameError::Numerical(format!("least squares failed: {e}")))?;
    let mut full = DVector::zeros(a.ncols());
    for (slot, &j) in passive.iter().enumerate() {
        full[j] = z[slot];
    }
    Ok(full)
}

/// Returns the minimiser of `‖A x − b‖` over `x ≥ 0`.
///
/// The dual `w = Aᵀ(b − A x)` is driven to `w ≤ tol` on the active set, which
/// certifies global optimality of the convex problem.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    if a.nrows() != b.len() {
        return Err(GameError::Dimension(format!(
            "NNLS matrix has {} rows, rhs has {}",
            a.nrows(),
            b.len()
        )));
    }
    let mut x = DVector::zeros(n);
    if n == 0 {
        return Ok(x);
    }
    let scale = a.amax().max(1.0) * b.amax().max(1.0);
    let tol = 1e-12 * scale * (n as f64);
    let mut passive: Vec<usize> = Vec::new();
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|j| !passive.contains(j))
            .filter(|&j| w[j] > tol)
            .max_by(|&p, &q| w[p].total_cmp(&w[q]).then(q.cmp(&p)));
        let Some(enter) = candidate else { return Ok(x) };
        passive.push(enter);
        passive.sort_unstable();

        loop {
            let z = passive_solve(a, b, &passive)?;
            if passive.iter().all(|&j| z[j] > 0.0) {
                x = z;
                break;
            }
            // step back to the boundary of the feasible orthant
            let mut alpha = f64::INFINITY;
            for &j in &passive {
                if z[j] <= 0.0 {
                    let ratio = x[j] / (x[j] - z[j]);
                    alpha = alpha.min(ratio);
                }
            }
            for j in 0..n {
                x[j] += alpha * (z[j] - x[j]);
            }
            let before = passive.len();
            passive.retain(|&j| x[j] > 1e-15 * scale);
            for j in 0..n {
                if !passive.contains(&j) {
                    x[j] = 0.0;
                }
            }
            if passive.len() == before {
                // guard against stalling on ties
                let worst = *passive
                    .iter()
                    .min_by(|&&p, &&q| x[p].total_cmp(&x[q]))
                    .expect("nonempty passive set");
                passive.retain(|&j| j != worst);
                x[worst] = 0.0;
            }
            if passive.is_empty() {
                break;
            }
        }
    }
    Err(GameError::Numerical("NNLS did not converge".into()))
}
