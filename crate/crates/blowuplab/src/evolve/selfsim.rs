//! RK4 integration of `∂_s q = L_α q (+ N(q))` in self-similar variables.

use super::modulation::{fit_modulation, frame_content, gram_dual_basis, initial_data_map, GramDual, ModulationFit};
use super::perturbation::Perturbation;
use super::{default_dt, EvolutionConfig, EvolutionTrace, EvolveError, BASIN_FACTOR, INSTABILITY_NORM, SAMPLES_PER_UNIT};
use crate::linop::{apply_l_alpha, norm_dblk, CollocationGrid, GridFunctionPair, LinopError};

/// `N(q) = (0, (∂_y q₁)²)`.
pub fn nonlinearity(grid: &CollocationGrid, q: &GridFunctionPair<f64>) -> Result<GridFunctionPair<f64>, LinopError> {
    q.check(grid)?;
    let d = grid.derivative(&q.q1, 1);
    Ok(GridFunctionPair { q1: vec![0.0; d.len()], q2: d.iter().map(|v| v * v).collect() })
}

/// Signature of the quadratic term, injectable for testing the verification suite.
pub type NonlinearityFn = fn(&CollocationGrid, &GridFunctionPair<f64>) -> Result<GridFunctionPair<f64>, LinopError>;

fn rk4_step<F>(q: &GridFunctionPair<f64>, h: f64, rhs: &F) -> Result<GridFunctionPair<f64>, EvolveError>
where
    F: Fn(&GridFunctionPair<f64>) -> Result<GridFunctionPair<f64>, EvolveError>,
{
    let k1 = rhs(q)?;
    let k2 = rhs(&q.combine(1.0, &k1, 0.5 * h))?;
    let k3 = rhs(&q.combine(1.0, &k2, 0.5 * h))?;
    let k4 = rhs(&q.combine(1.0, &k3, h))?;
    let incr = k1.combine(1.0, &k2, 2.0).combine(1.0, &k3, 2.0).combine(1.0, &k4, 1.0);
    Ok(q.combine(1.0, &incr, h / 6.0))
}

/// Uniform step `h ≤ dt` with an integer number of steps to `s_max`, and the sampling stride.
fn schedule(dt: f64, s_max: f64) -> (usize, f64, usize) {
    let steps = (s_max / dt).ceil().max(1.0) as usize;
    let h = s_max / steps as f64;
    let stride = ((1.0 / (SAMPLES_PER_UNIT * h)).round() as usize).max(1);
    (steps, h, stride)
}

fn check_step(grid: &CollocationGrid, dt: f64) -> Result<(), EvolveError> {
    let limit = 2.0 * default_dt(grid.degree());
    if !(dt > 0.0 && dt <= limit) {
        return Err(EvolveError::InvalidConfig(format!("dt must lie in (0, {limit:e}] on a degree-{} grid, got {dt}", grid.degree())));
    }
    Ok(())
}

fn guard(s: f64, norm: f64) -> Result<(), EvolveError> {
    if !norm.is_finite() || norm > INSTABILITY_NORM {
        return Err(EvolveError::Instability { s, norm });
    }
    Ok(())
}

/// Integrates `∂_s q = L_α q` with classical RK4 from `q0` to `cfg.s_max`,
/// recording the `⟨⟨·,·⟩⟩_k` norm and the Gram-dual projections onto `g₀, f₀, f₁`.
pub fn evolve_linear(
    alpha: f64,
    grid: &CollocationGrid,
    q0: &GridFunctionPair<f64>,
    cfg: &EvolutionConfig,
) -> Result<EvolutionTrace, EvolveError> {
    Ok(evolve_linear_state(alpha, grid, q0, cfg)?.0)
}

/// [`evolve_linear`] that also returns the terminal state.
pub fn evolve_linear_state(
    alpha: f64,
    grid: &CollocationGrid,
    q0: &GridFunctionPair<f64>,
    cfg: &EvolutionConfig,
) -> Result<(EvolutionTrace, GridFunctionPair<f64>), EvolveError> {
    q0.check(grid)?;
    check_step(grid, cfg.dt)?;
    let dual = gram_dual_basis(alpha, grid, cfg.k_norm)?;
    let rhs = |q: &GridFunctionPair<f64>| Ok(apply_l_alpha(alpha, grid, q)?);
    let (steps, h, stride) = schedule(cfg.dt, cfg.s_max);
    let mut trace = EvolutionTrace::default();
    let mut q = q0.clone();
    for n in 0..=steps {
        let s = n as f64 * h;
        if n % stride == 0 || n == steps {
            let norm = norm_dblk(grid, &q, cfg.k_norm)?;
            guard(s, norm)?;
            trace.push(s, norm, dual.project(&q)?);
        }
        if n < steps {
            q = rk4_step(&q, h, &rhs)?;
            guard(s + h, q.max_abs())?;
        }
    }
    Ok((trace, q))
}

/// Integrates the full system `∂_s q = L_{α₀} q + N(q)` in the frame of the
/// base profile from `U_{α₀,κ₀,T₀}(f)`. At every sample the parameters
/// `(α*, κ*, T*)` are refitted and `norm_k` records the stable part
/// `q - frame_content(base, (α*, κ*, T*))`; the projections are those of `q`.
pub fn evolve_nonlinear(cfg: &EvolutionConfig, f: &dyn Perturbation) -> Result<EvolutionTrace, EvolveError> {
    Ok(evolve_nonlinear_with(cfg, f, nonlinearity)?.0)
}

/// [`evolve_nonlinear`] with a caller-supplied quadratic term, also returning the terminal state.
pub fn evolve_nonlinear_with(
    cfg: &EvolutionConfig,
    f: &dyn Perturbation,
    n_fn: NonlinearityFn,
) -> Result<(EvolutionTrace, GridFunctionPair<f64>), EvolveError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let dual = gram_dual_basis(cfg.alpha0, &grid, cfg.k_norm)?;
    let q0 = initial_data_map(cfg, cfg.alpha0, cfg.kappa0, cfg.t0, f)?;
    let eps = norm_dblk(&grid, &q0, cfg.k_norm)?;
    let rhs = |q: &GridFunctionPair<f64>| {
        let lq = apply_l_alpha(cfg.alpha0, &grid, q)?;
        let nq = n_fn(&grid, q)?;
        Ok(lq.combine(1.0, &nq, 1.0))
    };
    let (steps, h, stride) = schedule(cfg.dt, cfg.s_max);
    let mut trace = EvolutionTrace::default();
    let mut q = q0;
    let mut fit: Option<ModulationFit> = None;
    for n in 0..=steps {
        let s = n as f64 * h;
        if n % stride == 0 || n == steps {
            let (norm, next) = sample_nonlinear(cfg, &grid, &dual, &q, s, fit)?;
            guard(s, norm)?;
            if norm > BASIN_FACTOR * eps && trace.norm_k.last().is_some_and(|prev| norm > *prev) {
                return Err(EvolveError::BlowupInFrame { s, norm });
            }
            fit = Some(next);
            trace.push(s, norm, dual.project(&q)?);
        }
        if n < steps {
            q = rk4_step(&q, h, &rhs)?;
            guard(s + h, q.max_abs())?;
        }
    }
    trace.fitted = fit;
    Ok((trace, q))
}

fn sample_nonlinear(
    cfg: &EvolutionConfig,
    grid: &CollocationGrid,
    dual: &GramDual,
    q: &GridFunctionPair<f64>,
    s: f64,
    prev: Option<ModulationFit>,
) -> Result<(f64, ModulationFit), EvolveError> {
    let base = cfg.base();
    let start = prev.map(|p| p.params()).unwrap_or(base);
    let fit = match fit_modulation(cfg, grid, dual, q, s, start) {
        Err(EvolveError::HypothesisViolation { .. }) => return Err(EvolveError::BlowupInFrame { s, norm: f64::INFINITY }),
        r => r?,
    };
    let stable = q.combine(1.0, &frame_content(&base, &fit.params(), s, grid)?, -1.0);
    Ok((norm_dblk(grid, &stable, cfg.k_norm)?, fit))
}
