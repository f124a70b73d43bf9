//! The blow-up family `u = α s + Ũ(y)` in self-similar variables, its derivative `H`,
//! and the stationary singular profiles `p_c`.

use crate::quad::{self, QuadError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for the profile quadrature.
pub const PROFILE_QUAD_TOL: f64 = 1e-13;
/// Step of the centered difference used for `Ũ''` in the Riccati residual.
pub const RICCATI_STEP: f64 = 1e-4;
/// Residual at which the bisection for `p_c` stops.
pub const STATIONARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("invalid profile parameters: {0}")]
    InvalidParams(String),
    #[error("point (t={t}, x={x}) lies outside the backward lightcone")]
    OutsideLightcone { t: f64, x: f64 },
    #[error("y = {0} is outside the admissible interval")]
    Domain(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// The free parameter `β ∈ [0, ∞]` of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beta {
    Zero,
    Finite(f64),
    Infinite,
}

impl Beta {
    /// Parses `"0"`, `"inf"` or a positive number.
    pub fn parse(s: &str) -> Result<Beta, ProfileError> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Beta::Infinite);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| ProfileError::InvalidParams(format!("beta '{s}' is not a number")))?;
        Beta::from_f64(v)
    }

    pub fn from_f64(v: f64) -> Result<Beta, ProfileError> {
        if v == 0.0 {
            Ok(Beta::Zero)
        } else if v == f64::INFINITY {
            Ok(Beta::Infinite)
        } else if v > 0.0 && v.is_finite() {
            Ok(Beta::Finite(v))
        } else {
            Err(ProfileError::InvalidParams(format!("beta must lie in [0, inf], got {v}")))
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Beta::Zero => 0.0,
            Beta::Finite(b) => b,
            Beta::Infinite => f64::INFINITY,
        }
    }
}

/// Parameters `(α, β, κ, T, x₀)` of one member of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub alpha: f64,
    pub beta: Beta,
    pub kappa: f64,
    pub t_blowup: f64,
    pub x0: f64,
    /// Set when `0 < β < ∞` and `√(1+α)` is not an integer: the profile is
    /// only finitely differentiable at `y = ±1`.
    pub reduced_regularity: bool,
}

impl ProfileParams {
    /// Smooth-mode constructor: requires `α > 0` and `T > 0`.
    pub fn new(alpha: f64, beta: Beta, kappa: f64, t_blowup: f64, x0: f64) -> Result<Self, ProfileError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(ProfileError::InvalidParams(format!("alpha must satisfy alpha > 0, got {alpha}")));
        }
        Self::permissive(alpha, beta, kappa, t_blowup, x0)
    }

    /// Accepts any `α > -1`, for exploring the family beyond the stable range.
    pub fn permissive(alpha: f64, beta: Beta, kappa: f64, t_blowup: f64, x0: f64) -> Result<Self, ProfileError> {
        if !(alpha > -1.0) || !alpha.is_finite() {
            return Err(ProfileError::InvalidParams(format!("alpha must exceed -1, got {alpha}")));
        }
        if !(t_blowup > 0.0) || !t_blowup.is_finite() {
            return Err(ProfileError::InvalidParams(format!("T must be positive, got {t_blowup}")));
        }
        if !kappa.is_finite() || !x0.is_finite() {
            return Err(ProfileError::InvalidParams("kappa and x0 must be finite".into()));
        }
        let beta = Beta::from_f64(beta.as_f64())?;
        let s = (1.0 + alpha).sqrt();
        let reduced_regularity = matches!(beta, Beta::Finite(_)) && (s - s.round()).abs() > 1e-12;
        Ok(ProfileParams { alpha, beta, kappa, t_blowup, x0, reduced_regularity })
    }

    /// Shorthand for `(α, β, κ = 0, T = 1, x₀ = 0)`.
    pub fn unit(alpha: f64, beta: Beta) -> Result<Self, ProfileError> {
        Self::new(alpha, beta, 0.0, 1.0, 0.0)
    }

    /// `√(1+α)`.
    pub fn s(&self) -> f64 {
        (1.0 + self.alpha).sqrt()
    }

    /// `μ = 2α√(1+α)β` (infinite for `β = ∞`).
    pub fn mu(&self) -> f64 {
        mu_of(self.alpha, self.beta)
    }
}

fn mu_of(alpha: f64, beta: Beta) -> f64 {
    match beta {
        Beta::Zero => 0.0,
        Beta::Finite(b) => 2.0 * alpha * (1.0 + alpha).sqrt() * b,
        Beta::Infinite => f64::INFINITY,
    }
}

/// `ln(μ ((1-y)/(1+y))^s)`, with the endpoint limits `±∞`.
fn log_mu_rho(mu: f64, s: f64, y: f64) -> f64 {
    mu.ln() + s * ((1.0 - y).ln() - (1.0 + y).ln())
}

/// `1 / (1 + e^t)` without overflow.
fn logistic_neg(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

fn check_unit_interval(y: f64) -> Result<(), ProfileError> {
    if !(-1.0..=1.0).contains(&y) {
        return Err(ProfileError::Domain(y));
    }
    Ok(())
}

/// `dW/dy`, the part of `Ũ'` that interpolates between `β = ∞` (zero) and `β = 0`.
pub fn dw_dy(p: &ProfileParams, y: f64) -> f64 {
    let (a, s) = (p.alpha, p.s());
    let base = 2.0 * a * s / ((s - y) * (s + y));
    match p.beta {
        Beta::Zero => base,
        Beta::Infinite => 0.0,
        Beta::Finite(_) => {
            let ln_x = log_mu_rho(p.mu(), s, y) + ((s + y) / (s - y)).ln();
            base * logistic_neg(ln_x)
        }
    }
}

/// `Ũ'(y) = -α/(s+y) + dW/dy`.
pub fn tilde_u_prime(p: &ProfileParams, y: f64) -> f64 {
    -p.alpha / (p.s() + y) + dw_dy(p, y)
}

/// Integrand of the closed-form representation of `Ũ`.
fn profile_integrand(alpha: f64, s: f64, mu: f64, z: f64) -> f64 {
    let lmr = log_mu_rho(mu, s, z);
    if lmr > 0.0 {
        let inv = (-lmr).exp();
        alpha * (inv - 1.0) / ((s - z) * inv + (s + z))
    } else {
        let m = lmr.exp();
        alpha * (1.0 - m) / ((s - z) + m * (s + z))
    }
}

/// `Ũ(y)` by quadrature from `y = 0`, normalised so that `Ũ(0) = κ - α log √(1+α)`.
pub fn tilde_u_quadrature(p: &ProfileParams, y: f64) -> Result<f64, ProfileError> {
    check_unit_interval(y)?;
    let (a, s, mu) = (p.alpha, p.s(), p.mu());
    let base = p.kappa - a * s.ln();
    let (v, _) = match p.beta {
        Beta::Zero => quad::integrate(|z| a / (s - z), 0.0, y, PROFILE_QUAD_TOL)?,
        Beta::Infinite => quad::integrate(|z| -a / (s + z), 0.0, y, PROFILE_QUAD_TOL)?,
        Beta::Finite(_) => quad::integrate(|z| profile_integrand(a, s, mu, z), 0.0, y, PROFILE_QUAD_TOL)?,
    };
    Ok(base + v)
}

/// `Ũ(y)` on `[-1, 1]`, using the closed forms for `β ∈ {0, ∞}`.
pub fn tilde_u_eval(p: &ProfileParams, y: f64) -> Result<f64, ProfileError> {
    check_unit_interval(y)?;
    let (a, s) = (p.alpha, p.s());
    match p.beta {
        Beta::Zero => Ok(-a * (s - y).ln() + p.kappa),
        Beta::Infinite => Ok(-a * (s + y).ln() + p.kappa),
        Beta::Finite(_) => tilde_u_quadrature(p, y),
    }
}

/// `H_{α,β}(y) = (T - t) u_x`, the spatial derivative of the profile.
pub fn h_eval(alpha: f64, beta: Beta, y: f64) -> f64 {
    let s = (1.0 + alpha).sqrt();
    match beta {
        Beta::Zero => alpha / (s - y),
        Beta::Infinite => -alpha / (s + y),
        Beta::Finite(_) => {
            if y <= -1.0 {
                return -1.0 - s;
            }
            if y >= 1.0 {
                return 1.0 + s;
            }
            let lmr = log_mu_rho(mu_of(alpha, beta), s, y);
            let q = (s - y) / (s + y);
            let frac = if lmr > 0.0 {
                let inv = (-lmr).exp();
                (inv - 1.0) / (q * inv + 1.0)
            } else {
                let m = lmr.exp();
                (1.0 - m) / (q + m)
            };
            alpha / (s + y) * frac
        }
    }
}

/// The dual parameter `β' = 1/(4α²(1+α)β)` with `H_{α,β}(-y) = -H_{α,β'}(y)`.
pub fn dual_beta(alpha: f64, beta: Beta) -> Beta {
    match beta {
        Beta::Zero => Beta::Infinite,
        Beta::Infinite => Beta::Zero,
        Beta::Finite(b) => Beta::Finite(1.0 / (4.0 * alpha * alpha * (1.0 + alpha) * b)),
    }
}

/// `|2yŨ' + (y²-1)Ũ'' + α - Ũ'²|` with `Ũ''` from a centered difference of step `h`.
pub fn riccati_residual(p: &ProfileParams, y: f64, h: f64) -> Result<f64, ProfileError> {
    if y.abs() > 1.0 - 2.0 * h {
        return Err(ProfileError::Domain(y));
    }
    let d1 = tilde_u_prime(p, y);
    let d2 = (tilde_u_prime(p, y + h) - tilde_u_prime(p, y - h)) / (2.0 * h);
    Ok((2.0 * y * d1 + (y * y - 1.0) * d2 + p.alpha - d1 * d1).abs())
}

/// `u(t, x) = -α log(1 - t/T) + Ũ((x - x₀)/(T - t))` inside the backward lightcone.
pub fn physical_u_eval(p: &ProfileParams, t: f64, x: f64) -> Result<f64, ProfileError> {
    let tau = p.t_blowup - t;
    let d = x - p.x0;
    if !(tau > 0.0) || t < 0.0 || d.abs() > tau * (1.0 + 1e-12) {
        return Err(ProfileError::OutsideLightcone { t, x });
    }
    let y = (d / tau).clamp(-1.0, 1.0);
    Ok(-p.alpha * (1.0 - t / p.t_blowup).ln() + tilde_u_eval(p, y)?)
}

/// `(T - t) ∂_t u` and `(T - t) ∂_x u` of the physical solution.
pub fn physical_derivatives(p: &ProfileParams, t: f64, x: f64) -> Result<(f64, f64), ProfileError> {
    let tau = p.t_blowup - t;
    let d = x - p.x0;
    if !(tau > 0.0) || d.abs() > tau * (1.0 + 1e-12) {
        return Err(ProfileError::OutsideLightcone { t, x });
    }
    let y = (d / tau).clamp(-1.0, 1.0);
    let up = tilde_u_prime(p, y);
    Ok((p.alpha + y * up, up))
}

/// Stationary singular profile `p_c(y) = c(y²-1) + (2y + (y²-1) log|(y-1)/(y+1)|)/4`.
pub fn p_c_eval(c: f64, y: f64) -> f64 {
    if y == 1.0 {
        return 0.5;
    }
    if y == -1.0 {
        return -0.5;
    }
    let w = y * y - 1.0;
    c * w + 0.25 * (2.0 * y + w * ((y - 1.0) / (y + 1.0)).abs().ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub y: f64,
    pub residual: f64,
}

/// A root of `p_c` in `(-1, 1)`, located by bisection between the endpoint values `∓1/2`.
pub fn find_stationary_singularity(c: f64) -> StationaryPoint {
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut best = StationaryPoint { y: 0.0, residual: f64::INFINITY };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = p_c_eval(c, mid);
        if v.abs() < best.residual {
            best = StationaryPoint { y: mid, residual: v.abs() };
        }
        if v.abs() < STATIONARY_TOL || mid == lo || mid == hi {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// One row of the profile table: `(y, Ũ, Ũ', H)`.
pub fn profile_row(p: &ProfileParams, y: f64) -> Result<[f64; 4], ProfileError> {
    Ok([y, tilde_u_eval(p, y)?, tilde_u_prime(p, y), h_eval(p.alpha, p.beta, y)])
}
