//! Adaptive 15-point Gauss-Legendre quadrature with interval bisection.

use std::sync::OnceLock;
use thiserror::Error;

const ORDER: usize = 15;
const MAX_DEPTH: u32 = 48;
const MAX_PANELS: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    NotConverged { tol: f64, estimate: f64 },
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
}

fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut x = [0.0; ORDER];
        let mut w = [0.0; ORDER];
        let n = ORDER as f64;
        for i in 0..ORDER {
            let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(ORDER, t);
                let dt = p / dp;
                t -= dt;
                if dt.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(ORDER, t);
            x[i] = t;
            w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        }
        (x, w)
    })
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64, QuadError> {
    let (x, w) = rule();
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut sum = 0.0;
    for i in 0..ORDER {
        let t = m + h * x[i];
        let v = f(t);
        if !v.is_finite() {
            return Err(QuadError::NonFinite(t));
        }
        sum += w[i] * v;
    }
    Ok(sum * h)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` (or the rounding floor, if larger).
///
/// Returns the value and the accumulated error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64), QuadError> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let whole = panel(&f, a, b)?;
    let mut budget = MAX_PANELS;
    let (v, e) = refine(&f, a, b, whole, tol, 0, &mut budget)?;
    Ok((v, e))
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> Result<(f64, f64), QuadError> {
    let m = 0.5 * (a + b);
    let left = panel(f, a, m)?;
    let right = panel(f, m, b)?;
    let err = (left + right - whole).abs();
    // below the rounding floor further bisection cannot help
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if err <= tol.max(floor) {
        return Ok((left + right, err));
    }
    if depth >= MAX_DEPTH || *budget == 0 || m == a || m == b {
        return Err(QuadError::NotConverged { tol, estimate: err });
    }
    *budget -= 1;
    let (l, el) = refine(f, a, m, left, 0.5 * tol, depth + 1, budget)?;
    let (r, er) = refine(f, m, b, right, 0.5 * tol, depth + 1, budget)?;
    Ok((l + r, el + er))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        let (x, w) = rule();
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        let m28: f64 = x.iter().zip(w).map(|(t, wi)| wi * t.powi(28)).sum();
        assert_relative_eq!(m28, 2.0 / 29.0, epsilon = 1e-14);
    }

    #[test]
    fn smooth_and_peaked_integrands() {
        let (v, _) = integrate(|t| t.exp(), 0.0, 1.0, 1e-14).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-14);
        let (v, _) = integrate(|t| 1.0 / (1e-4 + t * t), -1.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0 * 100.0 * (100f64).atan(), epsilon = 1e-9);
        let (v, _) = integrate(|t| t.sqrt(), 0.0, 1.0, 1e-11).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let (v, _) = integrate(|t| t * t, 1.0, 0.0, 1e-14).unwrap();
        assert_relative_eq!(v, -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        assert!(matches!(integrate(|t| 1.0 / t, 0.0, 1.0, 1e-10), Err(QuadError::NonFinite(_)) | Err(QuadError::NotConverged { .. })));
    }
}
