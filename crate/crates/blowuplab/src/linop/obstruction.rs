//! The logarithmic obstruction to a second generalized eigenfunction at `α = 3`.
//!
//! Solving `L_3 v = g₀` leads to `∂_y v₁ = p⁻¹ ∫_y^1 p g/(1-z²) dz` with
//! `p = ((1-y)/(1+y))² (2+y)²` and `g = log(2+y) + (y² - 3y/4 - 5/2)/(2+y)²`.
//! Near `y = -1`, `(1-y)²(2+y)² ∂_y v₁ = (1+y)² ∫_y^1 G/(1+z)³ dz` with
//! `G(z) = (1-z)((2+z)² log(2+z) + z² - 3z/4 - 5/2)`, whose Taylor coefficient
//! `27/4` at `(1+z)²` produces a `(1+y)² log(1+y)` term.

use super::LinopError;
use crate::quad;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

/// Expected coefficient of `(1+y)² log(1+y)`.
pub const LOG_COEFFICIENT: f64 = -27.0 / 4.0;
/// Closest approach to `y = -1` used by the fit.
pub const ENDPOINT_OFFSET: f64 = 1e-6;

/// `g = -g₀₁ - y ∂_y g₀₁ - g₀₂` for `α = 3`.
pub fn obstruction_source(y: f64) -> f64 {
    (2.0 + y).ln() + (y * y - 0.75 * y - 2.5) / ((2.0 + y) * (2.0 + y))
}

/// `G(z) = (1-z)((2+z)² log(2+z) + z² - 3z/4 - 5/2)` for complex `z`.
pub fn g_big(z: Complex64) -> Complex64 {
    let w = 2.0 + z;
    (1.0 - z) * (w * w * w.ln() + z * z - 0.75 * z - 2.5)
}

/// First `m` Taylor coefficients of `G` at `z = -1`, from the Cauchy integral
/// on a circle of radius `r` (trapezoidal rule with `points` nodes).
pub fn g_taylor_coefficients(m: usize, r: f64, points: usize) -> Vec<f64> {
    let mut c = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..points {
        let th = 2.0 * std::f64::consts::PI * j as f64 / points as f64;
        let e = Complex64::from_polar(1.0, th);
        let v = g_big(-1.0 + r * e);
        for (n, cn) in c.iter_mut().enumerate() {
            *cn += v * Complex64::from_polar(1.0, -(n as f64) * th);
        }
    }
    c.iter()
        .enumerate()
        .map(|(n, cn)| cn.re / points as f64 / r.powi(n as i32))
        .collect()
}

/// `p(y) = ((1-y)/(1+y))² (2+y)²`.
pub fn weight_p(y: f64) -> f64 {
    ((1.0 - y) / (1.0 + y)).powi(2) * (2.0 + y).powi(2)
}

/// `F(y) = (1-y)²(2+y)² ∂_y v₁ = (1+y)² ∫_y^1 p g/(1-z²) dz`.
pub fn local_profile(y: f64) -> Result<f64, LinopError> {
    local_profile_t(1.0 + y)
}

/// `F` in the variable `t = 1 + y`, avoiding cancellation near `y = -1`.
pub fn local_profile_t(t: f64) -> Result<f64, LinopError> {
    // p g/(1-z²) = (2-t)(1+t)² g / t³
    let f = |u: f64| (2.0 - u) * (1.0 + u).powi(2) * obstruction_source(u - 1.0) / (u * u * u);
    // geometric panels toward t = 0, where the integrand grows like t⁻³
    let mut v = 0.0;
    let mut a = t;
    while a < 2.0 {
        let b = if a < 0.25 { 4.0 * a } else { 2.0 };
        v += quad::integrate(f, a, b, 1e-14 / (a * a))?.0;
        a = b;
    }
    Ok(t * t * v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObstructionFit {
    pub c_log: f64,
    /// RMS residual of the least-squares fit.
    pub residual: f64,
}

/// Least-squares fit of `A + B t + C t² + c_log t² log t + D t³` (`t = 1+y`) to `F`
/// on a geometric window `t ∈ [t_min, t_max]`.
pub fn fit_log_coefficient(t_min: f64, t_max: f64, samples: usize) -> Result<ObstructionFit, LinopError> {
    let cols = 5;
    let mut a = DMatrix::zeros(samples, cols);
    let mut b = DVector::zeros(samples);
    for i in 0..samples {
        let t = t_min * (t_max / t_min).powf(i as f64 / (samples - 1) as f64);
        let row = [1.0, t, t * t, t * t * t.ln(), t * t * t];
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
        b[i] = local_profile_t(t)?;
    }
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-14).map_err(|_| LinopError::SingularFit)?;
    let r = &a * &x - &b;
    Ok(ObstructionFit { c_log: x[3], residual: (r.norm_squared() / samples as f64).sqrt() })
}

/// Fits the log coefficient on two nested windows and Richardson-extrapolates.
pub fn log_obstruction() -> Result<ObstructionFit, LinopError> {
    let wide = fit_log_coefficient(ENDPOINT_OFFSET, 0.1, 60)?;
    let narrow = fit_log_coefficient(ENDPOINT_OFFSET, 0.05, 60)?;
    // the leading window error scales like t_max, so extrapolate linearly
    let c_log = 2.0 * narrow.c_log - wide.c_log;
    Ok(ObstructionFit { c_log, residual: wide.residual.max(narrow.residual) })
}
