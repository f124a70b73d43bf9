//! Evolution of perturbations of the `β = ∞` profile: the self-similar system
//! `∂_s q = L_α q + N(q)`, modulation of the symmetry parameters `(α, κ, T)`,
//! and a physical-space solver on the shrinking backward lightcone.

pub mod lightcone;
pub mod modulation;
pub mod perturbation;
pub mod selfsim;

pub use lightcone::{lightcone_solver, BlowupFit, LightconeConfig, LightconeRun, LightconeState};
pub use modulation::{fit_modulation, frame_content, gram_dual_basis, initial_data_map, GramDual, Modulation, ModulationFit};
pub use perturbation::{Mode, ModePerturbation, Perturbation, RandomSmoothEven, ZeroPerturbation};
pub use selfsim::{evolve_linear, evolve_linear_state, evolve_nonlinear, evolve_nonlinear_with, nonlinearity, NonlinearityFn};

use crate::linop::{CollocationGrid, LinopError};
use crate::profiles::ProfileError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norm above which an evolution is declared unstable.
pub const INSTABILITY_NORM: f64 = 1e12;
/// Multiple of the initial size beyond which a growing stable part leaves the basin.
pub const BASIN_FACTOR: f64 = 1e3;
/// Target size of the modulation projections.
pub const MODULATION_TOL: f64 = 1e-8;
/// Number of trace samples per unit of `s`.
pub const SAMPLES_PER_UNIT: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("norm {norm:e} at s = {s} exceeds the instability threshold")]
    Instability { s: f64, norm: f64 },
    #[error("stable part grew to {norm:e} at s = {s}, beyond the basin of the base profile")]
    BlowupInFrame { s: f64, norm: f64 },
    #[error("T = {t} violates T < T0 sqrt(1 + alpha0) = {bound}")]
    HypothesisViolation { t: f64, bound: f64 },
    #[error("Gram matrix of the symmetry modes is singular")]
    SingularGram,
    #[error("modulation fit did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("time step {dt} violates the characteristic step dx = {dx}")]
    CflViolation { dt: f64, dx: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

impl EvolveError {
    pub fn name(&self) -> &'static str {
        match self {
            EvolveError::InvalidConfig(_) => "InvalidConfig",
            EvolveError::Instability { .. } => "Instability",
            EvolveError::BlowupInFrame { .. } => "BlowupInFrame",
            EvolveError::HypothesisViolation { .. } => "HypothesisViolation",
            EvolveError::SingularGram => "SingularGram",
            EvolveError::NoConvergence { .. } => "NoConvergence",
            EvolveError::CflViolation { .. } => "CFLViolation",
            EvolveError::NonFiniteState { .. } => "NonFiniteState",
            EvolveError::Linop(_) => "LinopError",
            EvolveError::Profile(_) => "ProfileError",
        }
    }
}

/// Base profile `(α₀, κ₀, T₀, x₀)` and the numerical setup of an evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub alpha0: f64,
    pub kappa0: f64,
    #[serde(rename = "T0")]
    pub t0: f64,
    pub x0: f64,
    pub k_norm: usize,
    /// Target decay rate `1 - δ`.
    pub w0: f64,
    pub dt: f64,
    pub s_max: f64,
    #[serde(rename = "grid_N")]
    pub grid_n: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        let grid_n = 32;
        EvolutionConfig {
            alpha0: 3.0,
            kappa0: 0.0,
            t0: 1.0,
            x0: 0.0,
            k_norm: 2,
            w0: 0.9,
            dt: default_dt(grid_n),
            s_max: 5.0,
            grid_n,
        }
    }
}

impl EvolutionConfig {
    /// Default config for `α₀` with the step from [`default_dt`].
    pub fn with_alpha(alpha0: f64) -> Self {
        EvolutionConfig { alpha0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: String| Err(EvolveError::InvalidConfig(m));
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad(format!("alpha0 must satisfy alpha > 0, got {}", self.alpha0));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return bad(format!("T0 must be positive, got {}", self.t0));
        }
        if !self.kappa0.is_finite() || !self.x0.is_finite() {
            return bad("kappa0 and x0 must be finite".into());
        }
        if !(self.w0 > 0.0 && self.w0 < 1.0) {
            return bad(format!("w0 must lie in (0, 1), got {}", self.w0));
        }
        if !(self.s_max > 0.0 && self.s_max.is_finite()) {
            return bad(format!("s_max must be positive, got {}", self.s_max));
        }
        if self.grid_n < 8 {
            return bad(format!("grid_N must be at least 8, got {}", self.grid_n));
        }
        if self.k_norm + 1 > self.grid_n / 2 {
            return bad(format!("k_norm = {} is not resolved on grid_N = {}", self.k_norm, self.grid_n));
        }
        let limit = 2.0 * default_dt(self.grid_n);
        if !(self.dt > 0.0 && self.dt <= limit) {
            return bad(format!("dt must lie in (0, {limit:e}] for grid_N = {}, got {}", self.grid_n, self.dt));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<CollocationGrid, EvolveError> {
        Ok(CollocationGrid::new(self.grid_n)?)
    }

    pub fn base(&self) -> Modulation {
        Modulation { alpha: self.alpha0, kappa: self.kappa0, t: self.t0 }
    }

    /// `δ = 1 - w₀`.
    pub fn delta(&self) -> f64 {
        1.0 - self.w0
    }
}

/// `dt = ½ h_min / (1 + max|y|)` with `h_min = 1 - cos(π/N)` the densest node spacing.
pub fn default_dt(n: usize) -> f64 {
    let h_min = 1.0 - (std::f64::consts::PI / n as f64).cos();
    0.5 * h_min / 2.0
}

/// Sampled history of an evolution. For the nonlinear system `norm_k` is the
/// norm of the stable part left after removing the fitted profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub norm_k: Vec<f64>,
    pub proj_f0: Vec<f64>,
    pub proj_f1: Vec<f64>,
    pub proj_g0: Vec<f64>,
    pub fitted: Option<ModulationFit>,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, s: f64, norm: f64, proj: [f64; 3]) {
        self.times.push(s);
        self.norm_k.push(norm);
        self.proj_g0.push(proj[0]);
        self.proj_f0.push(proj[1]);
        self.proj_f1.push(proj[2]);
    }

    /// Least-squares slope of `log norm_k` against `s` over `[s_lo, s_hi]`.
    /// `None` when fewer than two positive samples lie in the window.
    pub fn decay_slope(&self, s_lo: f64, s_hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.norm_k)
            .filter(|(s, n)| **s >= s_lo - 1e-12 && **s <= s_hi + 1e-12 && **n > 0.0)
            .map(|(s, n)| (*s, n.ln()))
            .collect();
        linear_fit(&pts).map(|(slope, _)| slope)
    }

    /// Rows `s, norm_k, proj_f0, proj_f1, proj_g0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,norm_k,proj_f0,proj_f1,proj_g0\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.times[i], self.norm_k[i], self.proj_f0[i], self.proj_f1[i], self.proj_g0[i]
            ));
        }
        out
    }
}

/// Least-squares line `v = slope·t + intercept` through the points.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let stv: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    let slope = stv / stt;
    Some((slope, mv - slope * mt))
}
