//! Brent's method: bisection safeguarded inverse quadratic / secant steps.

use crate::error::{GameError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

/// Finds a zero of `f` in `[a, b]` given `f(a)` and `f(b)` of opposite sign.
///
/// Stops when `|f(x)| ≤ ftol` or the bracket shrinks to a few ulps.
#[allow(clippy::explicit_counter_loop)]
pub fn brent<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<Root> {
    if fa * fb > 0.0 {
        return Err(GameError::Numerical(format!(
            "root not bracketed: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    let mut evaluations = 0;
    if fa.abs() <= ftol {
        return Ok(Root { x: a, fx: fa, evaluations });
    }
    if fb.abs() <= ftol {
        return Ok(Root { x: b, fx: fb, evaluations });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let xtol = 2.0 * f64::EPSILON * b.abs() + f64::MIN_POSITIVE;
        let half = 0.5 * (c - b);
        if fb.abs() <= ftol || half.abs() <= xtol {
            return Ok(Root { x: b, fx: fb, evaluations });
        }
        if e.abs() >= xtol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * half * q - (xtol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > xtol { d } else { xtol.copysign(half) };
        fb = f(b)?;
        evaluations += 1;
    }
    Err(GameError::Numerical(format!(
        "root finder exhausted {max_iter} iterations (|f| = {:e})",
        fb.abs()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let f = |x: f64| Ok(x * x * x - 2.0);
        let r = brent(f, 0.0, 2.0, -2.0, 6.0, 1e-14, 200).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 2.0, 2.0, 1e-12, 10).is_err());
    }
}
