//! Complex special functions: rising factorials, the Gauss series, log-gamma.

use num_complex::Complex64;
use thiserror::Error;

/// Default absolute tolerance on the first omitted term of the Gauss series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
/// Default cap on the number of Gauss series terms.
pub const DEFAULT_MAX_TERMS: usize = 100_000;
/// Distance below which a complex number counts as a nonpositive integer.
pub const INTEGER_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecfunError {
    #[error("series did not converge after {terms} terms (last term {last_term:e})")]
    NoConvergence { terms: usize, last_term: f64 },
    #[error("c + {n} vanishes before the series terminates")]
    PoleOfC { n: usize },
    #[error("ratio r_n is undefined for lambda in {{0, 1}}")]
    DegenerateCoefficient,
    #[error("gamma has a pole at {0}")]
    PoleOfGamma(Complex64),
}

/// Result of summing a hypergeometric series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEvaluation {
    pub value: Complex64,
    pub terms_used: usize,
    /// Magnitude of the first omitted term (zero for a terminated series).
    pub truncation_estimate: f64,
    /// True iff a numerator parameter hit a nonpositive integer, so every later term vanishes.
    pub terminated: bool,
}

/// Returns `Some(m)` when `z` is within [`INTEGER_TOL`] of the integer `-m`, `m >= 0`.
pub fn nonpositive_integer(z: Complex64) -> Option<u64> {
    if z.im.abs() > INTEGER_TOL || z.re > INTEGER_TOL {
        return None;
    }
    let r = z.re.round();
    if (z.re - r).abs() <= INTEGER_TOL {
        Some((-r) as u64)
    } else {
        None
    }
}

fn near_zero(z: Complex64) -> bool {
    z.norm() <= INTEGER_TOL
}

fn near_nonpositive_integer(z: Complex64) -> bool {
    z.re < 0.5 && near_zero(z - z.re.round())
}

/// Rising factorial `(a)_n = a (a+1) ... (a+n-1)`, with `(a)_0 = 1`.
pub fn pochhammer(a: Complex64, n: u32) -> Complex64 {
    (0..n).fold(Complex64::new(1.0, 0.0), |acc, k| acc * (a + k as f64))
}

/// Sums `2F1(a, b; c; z)` for `|z| < 1`, stopping once the next term drops below `tol`.
pub fn gauss_2f1(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: Complex64,
    tol: f64,
    max_terms: usize,
) -> Result<SeriesEvaluation, SpecfunError> {
    let mut sum = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut terms_used = 1usize;
    // A polynomial is summed to its last term; a small intermediate term says nothing about the rest.
    let polynomial = near_nonpositive_integer(a) || near_nonpositive_integer(b);
    loop {
        let n = (terms_used - 1) as f64;
        if near_zero(a + n) || near_zero(b + n) {
            return Ok(SeriesEvaluation {
                value: sum,
                terms_used,
                truncation_estimate: 0.0,
                terminated: true,
            });
        }
        if near_zero(c + n) {
            return Err(SpecfunError::PoleOfC { n: terms_used - 1 });
        }
        let ratio = (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
        let next = term * ratio;
        if !polynomial && next.norm() <= tol && ratio.norm() < 1.0 {
            return Ok(SeriesEvaluation {
                value: sum,
                terms_used,
                truncation_estimate: next.norm(),
                terminated: false,
            });
        }
        if terms_used >= max_terms {
            return Err(SpecfunError::NoConvergence {
                terms: terms_used,
                last_term: next.norm(),
            });
        }
        sum += next;
        term = next;
        terms_used += 1;
    }
}

/// [`gauss_2f1`] with the default tolerance and term cap.
pub fn gauss_2f1_default(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: Complex64,
) -> Result<SeriesEvaluation, SpecfunError> {
    gauss_2f1(a, b, c, z, DEFAULT_SERIES_TOL, DEFAULT_MAX_TERMS)
}

/// Ratio `a_{n+1}/a_n` of the eigenfunction series in the Lorentz-boosted chart,
/// `(λ+n)(λ+n-1) / ((λ+√(1+α)+n)(n+1))`.
pub fn coefficient_ratio_rn(lambda: Complex64, alpha: f64, n: u64) -> Result<Complex64, SpecfunError> {
    if near_zero(lambda) || near_zero(lambda - 1.0) {
        return Err(SpecfunError::DegenerateCoefficient);
    }
    let n = n as f64;
    let s = (1.0 + alpha).sqrt();
    Ok((lambda + n) * (lambda + n - 1.0) / ((lambda + s + n) * (n + 1.0)))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Complex log-gamma (Lanczos, g = 7) with reflection for `Re z < 1/2`.
///
/// The imaginary part is a branch of `arg Γ(z)`, so `exp` recovers `Γ(z)`.
pub fn log_gamma(z: Complex64) -> Result<Complex64, SpecfunError> {
    if nonpositive_integer(z).is_some() {
        return Err(SpecfunError::PoleOfGamma(z));
    }
    Ok(log_gamma_unchecked(z))
}

fn log_gamma_unchecked(z: Complex64) -> Complex64 {
    use std::f64::consts::PI;
    if z.re < 0.5 {
        let pi = Complex64::new(PI, 0.0);
        return pi.ln() - (pi * z).sin().ln() - log_gamma_unchecked(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn pochhammer_small_cases() {
        assert_eq!(pochhammer(c(3.0), 0), c(1.0));
        assert_eq!(pochhammer(c(1.0), 5), c(120.0));
        assert_eq!(pochhammer(c(-2.0), 3), c(0.0));
        let z = Complex64::new(0.5, 1.0);
        assert_relative_eq!((pochhammer(z, 2) - z * (z + 1.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_log_identity() {
        let r = gauss_2f1_default(c(1.0), c(1.0), c(2.0), c(0.5)).unwrap();
        assert_relative_eq!(r.value.re, 2.0 * 2f64.ln(), epsilon = 1e-11);
        assert!(!r.terminated);
        assert!(r.truncation_estimate <= 1e-12);
    }

    #[test]
    fn gauss_at_zero_uses_one_term() {
        let r = gauss_2f1_default(c(0.3), c(0.7), c(1.9), c(0.0)).unwrap();
        assert_eq!(r.value, c(1.0));
        assert_eq!(r.terms_used, 1);
    }

    #[test]
    fn gauss_terminating_series() {
        let r = gauss_2f1_default(c(0.0), c(-1.0), c(2.0), c(0.5)).unwrap();
        assert_eq!(r.value, c(1.0));
        assert!(r.terminated);
        // (1 - z)^2 = 2F1(-2, 1; 1; z)
        let r = gauss_2f1_default(c(-2.0), c(1.0), c(1.0), c(0.3)).unwrap();
        assert_relative_eq!(r.value.re, 0.49, epsilon = 1e-15);
        assert!(r.terminated);
        assert_eq!(r.terms_used, 3);
    }

    #[test]
    fn gauss_pole_of_c() {
        let e = gauss_2f1_default(c(0.5), c(0.5), c(-2.0), c(0.3)).unwrap_err();
        assert_eq!(e, SpecfunError::PoleOfC { n: 2 });
        // the series terminates before c + n reaches zero
        assert!(gauss_2f1_default(c(-1.0), c(0.5), c(-2.0), c(0.3)).is_ok());
    }

    #[test]
    fn gauss_no_convergence_reports_cap() {
        let e = gauss_2f1(c(1.0), c(1.0), c(1.0), c(0.999), 1e-14, 50).unwrap_err();
        assert!(matches!(e, SpecfunError::NoConvergence { terms: 50, .. }));
    }

    #[test]
    fn ratio_rejects_degenerate_lambda() {
        assert_eq!(coefficient_ratio_rn(c(0.0), 3.0, 4), Err(SpecfunError::DegenerateCoefficient));
        assert_eq!(coefficient_ratio_rn(c(1.0), 3.0, 4), Err(SpecfunError::DegenerateCoefficient));
        let r = coefficient_ratio_rn(c(2.0), 3.0, 0).unwrap();
        assert_relative_eq!(r.re, 2.0 * 1.0 / (4.0 * 1.0));
    }

    #[test]
    fn log_gamma_known_values() {
        assert_relative_eq!(log_gamma(c(0.5)).unwrap().re, 0.572_364_942_924_700_1, epsilon = 1e-13);
        assert_relative_eq!(log_gamma(c(6.0)).unwrap().re, 120f64.ln(), epsilon = 1e-13);
        assert_relative_eq!(log_gamma(c(1.0)).unwrap().norm(), 0.0, epsilon = 1e-14);
        // Γ(-1/2) = -2√π
        let g = log_gamma(c(-0.5)).unwrap().exp();
        assert_relative_eq!(g.re, -2.0 * std::f64::consts::PI.sqrt(), epsilon = 1e-13);
        assert!(matches!(log_gamma(c(-3.0)), Err(SpecfunError::PoleOfGamma(_))));
        assert!(matches!(log_gamma(c(0.0)), Err(SpecfunError::PoleOfGamma(_))));
    }
}
