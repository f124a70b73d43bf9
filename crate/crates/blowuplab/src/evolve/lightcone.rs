//! `u_tt - u_xx = (u_x)²` on the shrinking backward lightcone `|x - x₀| ≤ T - t`.
//!
//! The characteristic variables `a = u_t + u_x` and `b = u_t - u_x` satisfy
//! `(∂_t - ∂_x) a = (∂_t + ∂_x) b = (u_x)²`. With `dt = dx` both characteristics
//! pass through grid nodes, so transport is an exact index shift and only the
//! source is integrated, by an Adams predictor-corrector along each
//! characteristic. The cone loses one node at each end per step and needs no
//! boundary data.

use super::perturbation::Perturbation;
use super::{linear_fit, EvolveError};
use crate::profiles::{physical_derivatives, physical_u_eval, ProfileParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightconeConfig {
    /// Number of cells on the initial interval `[x₀ - T, x₀ + T]`; must be even.
    pub cells: usize,
    /// The run stops at `t = T(1 - e^{-s_max})`.
    pub s_max: f64,
    /// `dt/dx`; the characteristic scheme requires exactly 1.
    pub cfl: f64,
    /// Keep every `record_every`-th state, plus the first and last.
    pub record_every: usize,
}

impl Default for LightconeConfig {
    fn default() -> Self {
        LightconeConfig { cells: 2048, s_max: 100f64.ln(), cfl: 1.0, record_every: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightconeState {
    pub t: f64,
    pub x_nodes: Vec<f64>,
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub u_x: Vec<f64>,
}

/// Blow-up estimate from the last decade of `T - t`: `t_star` is the zero of a
/// line fitted to `1/max|u_t|`; `alpha_star` and `t_star_center` come from the
/// line fitted to `1/u_t(t, x₀) ≈ (T* - t)/α*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub t_star: f64,
    pub slope: f64,
    pub alpha_star: f64,
    pub t_star_center: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightconeRun {
    pub states: Vec<LightconeState>,
    /// `(t, max|u_t|, u_t(t, x₀))` after every step.
    pub history: Vec<(f64, f64, f64)>,
    pub blowup: Option<BlowupFit>,
}

/// Adams-Bashforth weights (newest first) by number of past values.
const AB: [&[f64]; HISTORY] = [
    &[1.0],
    &[3.0 / 2.0, -1.0 / 2.0],
    &[23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0],
    &[55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0],
    &[1901.0 / 720.0, -2774.0 / 720.0, 2616.0 / 720.0, -1274.0 / 720.0, 251.0 / 720.0],
];
/// Adams-Moulton weights (new value first) by number of past values.
const AM: [&[f64]; HISTORY] = [
    &[1.0 / 2.0, 1.0 / 2.0],
    &[5.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0],
    &[9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0],
    &[251.0 / 720.0, 646.0 / 720.0, -264.0 / 720.0, 106.0 / 720.0, -19.0 / 720.0],
    &[475.0 / 1440.0, 1427.0 / 1440.0, -798.0 / 1440.0, 482.0 / 1440.0, -173.0 / 1440.0, 27.0 / 1440.0],
];
/// Number of past levels used by the predictor-corrector.
const HISTORY: usize = 5;

pub fn lightcone_solver(params: &ProfileParams, pert: &dyn Perturbation, cfg: &LightconeConfig) -> Result<LightconeRun, EvolveError> {
    let t_big = params.t_blowup;
    let m = cfg.cells;
    if m < 4 || m % 2 != 0 {
        return Err(EvolveError::InvalidConfig(format!("cells must be even and at least 4, got {m}")));
    }
    if cfg.record_every == 0 {
        return Err(EvolveError::InvalidConfig("record_every must be positive".into()));
    }
    let dx = 2.0 * t_big / m as f64;
    let dt = cfg.cfl * dx;
    if cfg.cfl != 1.0 {
        return Err(EvolveError::CflViolation { dt, dx });
    }
    if !(cfg.s_max > 0.0 && cfg.s_max.is_finite()) {
        return Err(EvolveError::InvalidConfig(format!("s_max must be positive, got {}", cfg.s_max)));
    }
    // t_stop < T, so at least the center node survives
    let t_stop = t_big * (1.0 - (-cfg.s_max).exp());
    let steps = (t_stop / dt + 1e-9).floor() as usize;
    let x0 = params.x0;
    let xs: Vec<f64> = (0..=m).map(|i| x0 - t_big + i as f64 * dx).collect();
    let mut u = vec![0.0; m + 1];
    let mut a = vec![0.0; m + 1];
    let mut b = vec![0.0; m + 1];
    let hd = 1e-3 * t_big;
    for i in 0..=m {
        let x = xs[i];
        let (tut, tux) = physical_derivatives(params, 0.0, x)?;
        let (f, g) = pert.eval(x - x0);
        // fourth-order centered difference for f'
        let fd = |k: f64| pert.eval(x - x0 + k * hd).0;
        let df = (8.0 * (fd(1.0) - fd(-1.0)) - (fd(2.0) - fd(-2.0))) / (12.0 * hd);
        u[i] = physical_u_eval(params, 0.0, x)? + f;
        let (ut, ux) = (tut / t_big + g, tux / t_big + df);
        a[i] = ut + ux;
        b[i] = ut - ux;
    }
    let source = |a: &[f64], b: &[f64], i: usize| {
        let ux = 0.5 * (a[i] - b[i]);
        ux * ux
    };
    // past levels, newest first: S = (u_x)² and u_t
    let mut s_hist: Vec<Vec<f64>> = vec![(0..=m).map(|i| source(&a, &b, i)).collect()];
    let mut ut_hist: Vec<Vec<f64>> = vec![(0..=m).map(|i| 0.5 * (a[i] + b[i])).collect()];
    let snapshot = |t: f64, lo: usize, hi: usize, u: &[f64], a: &[f64], b: &[f64]| LightconeState {
        t,
        x_nodes: xs[lo..=hi].to_vec(),
        u: u[lo..=hi].to_vec(),
        u_t: (lo..=hi).map(|i| 0.5 * (a[i] + b[i])).collect(),
        u_x: (lo..=hi).map(|i| 0.5 * (a[i] - b[i])).collect(),
    };
    let mut states = vec![snapshot(0.0, 0, m, &u, &a, &b)];
    let mut history = Vec::with_capacity(steps);
    let center = m / 2;
    for n in 0..steps {
        let t_new = (n + 1) as f64 * dt;
        let (lo, hi) = (n + 1, m - n - 1);
        let p = s_hist.len();
        let ab = AB[p - 1];
        let am = AM[p - 1];
        // characteristic history: a from i + j + 1, b from i - j - 1 at level n - j
        let past = |i: usize, j: usize, left: bool| if left { s_hist[j][i + j + 1] } else { s_hist[j][i - j - 1] };
        let mut a_new = vec![0.0; m + 1];
        let mut b_new = vec![0.0; m + 1];
        for i in lo..=hi {
            let pa: f64 = (0..p).map(|j| ab[j] * past(i, j, true)).sum();
            let pb: f64 = (0..p).map(|j| ab[j] * past(i, j, false)).sum();
            a_new[i] = a[i + 1] + dt * pa;
            b_new[i] = b[i - 1] + dt * pb;
        }
        for _ in 0..2 {
            let s_new: Vec<f64> = (lo..=hi).map(|i| source(&a_new, &b_new, i)).collect();
            for i in lo..=hi {
                let sn = s_new[i - lo];
                let ca: f64 = am[0] * sn + (0..p).map(|j| am[j + 1] * past(i, j, true)).sum::<f64>();
                let cb: f64 = am[0] * sn + (0..p).map(|j| am[j + 1] * past(i, j, false)).sum::<f64>();
                a_new[i] = a[i + 1] + dt * ca;
                b_new[i] = b[i - 1] + dt * cb;
            }
        }
        let ut_new: Vec<f64> = (0..=m).map(|i| if i >= lo && i <= hi { 0.5 * (a_new[i] + b_new[i]) } else { 0.0 }).collect();
        for i in lo..=hi {
            let past_ut: f64 = (0..p).map(|j| am[j + 1] * ut_hist[j][i]).sum();
            u[i] += dt * (am[0] * ut_new[i] + past_ut);
        }
        a = a_new;
        b = b_new;
        if (lo..=hi).any(|i| !(a[i].is_finite() && b[i].is_finite() && u[i].is_finite())) {
            return Err(EvolveError::NonFiniteState { t: t_new });
        }
        let s_new: Vec<f64> = (0..=m).map(|i| if i >= lo && i <= hi { source(&a, &b, i) } else { 0.0 }).collect();
        s_hist.insert(0, s_new);
        ut_hist.insert(0, ut_new);
        s_hist.truncate(HISTORY);
        ut_hist.truncate(HISTORY);
        let max_ut = (lo..=hi).map(|i| (0.5 * (a[i] + b[i])).abs()).fold(0.0, f64::max);
        history.push((t_new, max_ut, 0.5 * (a[center] + b[center])));
        if (n + 1) % cfg.record_every == 0 || n + 1 == steps {
            states.push(snapshot(t_new, lo, hi, &u, &a, &b));
        }
    }
    let blowup = fit_blowup(&history, t_big);
    Ok(LightconeRun { states, history, blowup })
}

/// Fits the last decade of `T - t` (measured from the nominal `T`) of the history.
pub fn fit_blowup(history: &[(f64, f64, f64)], t_nominal: f64) -> Option<BlowupFit> {
    let t_end = history.last()?.0;
    let gap = t_nominal - t_end;
    let lo = t_nominal - 10.0 * gap;
    let window: Vec<&(f64, f64, f64)> = history.iter().filter(|h| h.0 >= lo).collect();
    let inv_max: Vec<(f64, f64)> = window.iter().filter(|h| h.1 > 0.0).map(|h| (h.0, 1.0 / h.1)).collect();
    let inv_ctr: Vec<(f64, f64)> = window.iter().filter(|h| h.2 > 0.0).map(|h| (h.0, 1.0 / h.2)).collect();
    let (slope, icpt) = linear_fit(&inv_max)?;
    let (cs, ci) = linear_fit(&inv_ctr)?;
    Some(BlowupFit { t_star: -icpt / slope, slope, alpha_star: -1.0 / cs, t_star_center: -ci / cs, window: (lo.max(0.0), t_end) })
}
