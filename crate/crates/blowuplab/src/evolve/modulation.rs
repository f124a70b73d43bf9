//! Symmetry parameters `(α, κ, T)`: the profile seen from another frame, the
//! initial-data map, the Gram dual basis of `{g₀, f₀, f₁}` and the fit of the
//! parameters that absorb the unstable content of a state.

use super::perturbation::Perturbation;
use super::{EvolutionConfig, EvolveError, MODULATION_TOL};
use crate::linop::{inner_dblk, sample_f0, sample_f1, sample_g0, CollocationGrid, GridFunctionPair};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Parameters `(α, κ, T)` of a `β = ∞` profile `u = -α log(1 - t/T) + κ - α log(√(1+α) + y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub alpha: f64,
    pub kappa: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationFit {
    pub alpha_star: f64,
    pub kappa_star: f64,
    #[serde(rename = "T_star")]
    pub t_star: f64,
    /// Largest remaining dual projection.
    pub residual: f64,
    pub iterations: usize,
}

impl ModulationFit {
    pub fn params(&self) -> Modulation {
        Modulation { alpha: self.alpha_star, kappa: self.kappa_star, t: self.t_star }
    }

    /// `|α* - α₀| + |κ* - κ₀| + |T*/T₀ - 1|`.
    pub fn distance(&self, base: &Modulation) -> f64 {
        (self.alpha_star - base.alpha).abs() + (self.kappa_star - base.kappa).abs() + (self.t_star / base.t - 1.0).abs()
    }
}

/// The profile `profile`, written as a perturbation `q` in the self-similar
/// variables of `frame` at time `s`. Zero when the two coincide.
pub fn frame_content(
    frame: &Modulation,
    profile: &Modulation,
    s: f64,
    grid: &CollocationGrid,
) -> Result<GridFunctionPair<f64>, EvolveError> {
    let (sf, sp) = ((1.0 + frame.alpha).sqrt(), (1.0 + profile.alpha).sqrt());
    // (T_f - t)/(T_p - t) at t = T_f(1 - e^{-s})
    let e = (profile.t / frame.t - 1.0) * s.exp();
    let ratio = 1.0 / (1.0 + e);
    if !(e > -1.0) || ratio >= sp {
        let r = (-s).exp();
        let bound = sp * profile.t / (sp + r * (1.0 - sp));
        return Err(EvolveError::HypothesisViolation { t: frame.t, bound });
    }
    // -log(1 - t/T_p) - s = log(ratio) + log(T_p/T_f)
    let shift = (profile.alpha - frame.alpha) * s + profile.alpha * (-(e.ln_1p()) + (profile.t / frame.t).ln());
    let dk = profile.kappa - frame.kappa;
    let (ap, af) = (profile.alpha, frame.alpha);
    let q1 = grid
        .nodes()
        .iter()
        .map(|&y| {
            let z = ratio * y;
            shift + dk - ap * (sp + z).ln() + af * (sf + y).ln()
        })
        .collect();
    let q2 = grid
        .nodes()
        .iter()
        .map(|&y| {
            let z = ratio * y;
            ratio * ap * sp / (sp + z) - af * sf / (sf + y)
        })
        .collect();
    Ok(GridFunctionPair { q1, q2 })
}

/// `U_{α,κ,T}(f) = f^T + f₀^T - f_{α,κ}` on the grid of `cfg`, with
/// `f^T(y) = (f(Ty), T g(Ty))` and `f₀^T - f_{α,κ}` the base profile seen from
/// the frame `(α, κ, T)`.
pub fn initial_data_map(
    cfg: &EvolutionConfig,
    alpha: f64,
    kappa: f64,
    t: f64,
    f: &dyn Perturbation,
) -> Result<GridFunctionPair<f64>, EvolveError> {
    cfg.validate()?;
    if !(alpha > 0.0) || !(t > 0.0) || !kappa.is_finite() {
        return Err(EvolveError::InvalidConfig(format!("need alpha > 0 and T > 0, got alpha = {alpha}, T = {t}")));
    }
    let bound = cfg.t0 * (1.0 + cfg.alpha0).sqrt();
    if t >= bound {
        return Err(EvolveError::HypothesisViolation { t, bound });
    }
    let grid = cfg.grid()?;
    let frame = Modulation { alpha, kappa, t };
    let base = frame_content(&frame, &cfg.base(), 0.0, &grid)?;
    let (mut q1, mut q2) = (base.q1, base.q2);
    for (j, &y) in grid.nodes().iter().enumerate() {
        let (a, b) = f.eval(t * y);
        q1[j] += a;
        q2[j] += t * b;
    }
    Ok(GridFunctionPair { q1, q2 })
}

/// Gram matrix of `b = (g₀, f₀, f₁)` in `⟨⟨·,·⟩⟩_k` and the dual basis
/// `gʲ = Σᵢ (G⁻¹)ᵢⱼ bᵢ`, so that `⟨⟨bᵢ, gʲ⟩⟩_k = δᵢⱼ`.
///
/// Projections are evaluated as `G⁻¹ (⟨⟨q, bᵢ⟩⟩)ᵢ` rather than by pairing with
/// the nodal duals: repeated collocation derivatives amplify the rounding in
/// the nodal combination far beyond the target duality residual.
#[derive(Debug, Clone)]
pub struct GramDual {
    pub gram: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
    pub basis: [GridFunctionPair<f64>; 3],
    pub duals: [GridFunctionPair<f64>; 3],
    grid: CollocationGrid,
    k: usize,
}

pub fn gram_dual_basis(alpha: f64, grid: &CollocationGrid, k: usize) -> Result<GramDual, EvolveError> {
    if !(alpha > 0.0) {
        return Err(EvolveError::InvalidConfig(format!("alpha must satisfy alpha > 0, got {alpha}")));
    }
    let basis = [sample_g0(grid, alpha), sample_f0(grid), sample_f1(grid, alpha)];
    let mut gram = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            gram[(i, j)] = inner_dblk(grid, &basis[i], &basis[j], k)?;
        }
    }
    let inverse = gram.cholesky().ok_or(EvolveError::SingularGram)?.inverse();
    if !inverse.iter().all(|v| v.is_finite()) {
        return Err(EvolveError::SingularGram);
    }
    let dual = |j: usize| {
        let mut d = GridFunctionPair::zeros(grid.len());
        for (i, b) in basis.iter().enumerate() {
            d = d.combine(1.0, b, inverse[(i, j)]);
        }
        d
    };
    let duals = [dual(0), dual(1), dual(2)];
    Ok(GramDual { gram, inverse, basis, duals, grid: grid.clone(), k })
}

impl GramDual {
    /// Coefficients `(c_{g₀}, c_{f₀}, c_{f₁})` of the `⟨⟨·,·⟩⟩_k`-orthogonal projection of `q`.
    pub fn project(&self, q: &GridFunctionPair<f64>) -> Result<[f64; 3], EvolveError> {
        let mut rhs = Vector3::zeros();
        for (i, b) in self.basis.iter().enumerate() {
            rhs[i] = inner_dblk(&self.grid, q, b, self.k)?;
        }
        let c = self.inverse * rhs;
        Ok([c[0], c[1], c[2]])
    }

    /// `max |⟨⟨bᵢ, gʲ⟩⟩ - δᵢⱼ|`.
    pub fn duality_residual(&self) -> Result<f64, EvolveError> {
        let mut worst: f64 = 0.0;
        for (i, b) in self.basis.iter().enumerate() {
            let p = self.project(b)?;
            for (j, v) in p.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        Ok(worst)
    }
}

/// Newton iteration cap for [`fit_modulation`].
pub const FIT_MAX_ITER: usize = 40;

/// Fits `(α*, κ*, T*)` so that `q - frame_content(base, (α*, κ*, T*), s)` has
/// vanishing projections onto `g₀, f₀, f₁`, starting from `start`.
pub fn fit_modulation(
    cfg: &EvolutionConfig,
    grid: &CollocationGrid,
    dual: &GramDual,
    state: &GridFunctionPair<f64>,
    s: f64,
    start: Modulation,
) -> Result<ModulationFit, EvolveError> {
    let base = cfg.base();
    let residual = |p: &Modulation| -> Result<Vector3<f64>, EvolveError> {
        let c = frame_content(&base, p, s, grid)?;
        Ok(Vector3::from(dual.project(&state.combine(1.0, &c, -1.0))?))
    };
    let mut p = start;
    let mut r = residual(&p)?;
    let mut iterations = 0;
    while iterations < FIT_MAX_ITER && r.amax() > 0.0 {
        let steps = [1e-6 * p.alpha.max(1.0), 1e-6, 1e-6 * p.t * (-s).exp()];
        let mut jac = Matrix3::zeros();
        for (col, h) in steps.iter().enumerate() {
            let shifted = |sign: f64| {
                let mut q = p;
                match col {
                    0 => q.alpha += sign * h,
                    1 => q.kappa += sign * h,
                    _ => q.t += sign * h,
                }
                residual(&q)
            };
            let d = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * h);
            jac.set_column(col, &d);
        }
        let delta = jac.lu().solve(&(-r)).ok_or(EvolveError::NoConvergence { iterations, residual: r.amax() })?;
        let next = Modulation { alpha: p.alpha + delta[0], kappa: p.kappa + delta[1], t: p.t + delta[2] };
        let rn = residual(&next)?;
        iterations += 1;
        if rn.amax() >= r.amax() {
            break;
        }
        p = next;
        r = rn;
    }
    let res = r.amax();
    if !(res <= MODULATION_TOL) {
        return Err(EvolveError::NoConvergence { iterations, residual: res });
    }
    Ok(ModulationFit { alpha_star: p.alpha, kappa_star: p.kappa, t_star: p.t, residual: res, iterations })
}

#[cfg(test)]
mod tests {
    use super::super::perturbation::{Mode, ModePerturbation, ZeroPerturbation};
    use super::*;
    use crate::linop::norm_dblk;

    fn cfg() -> EvolutionConfig {
        EvolutionConfig::default()
    }

    #[test]
    fn identical_frames_have_no_content() {
        let grid = CollocationGrid::new(16).unwrap();
        let p = Modulation { alpha: 3.0, kappa: 0.4, t: 1.3 };
        for s in [0.0, 1.0, 4.0] {
            assert_eq!(frame_content(&p, &p, s, &grid).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn frame_content_matches_physical_profile() {
        // u(t, x) = -α log(1 - t/T_p) + κ_p - α log(s_p + x/(T_p - t)), read off in the frame T_f
        let grid = CollocationGrid::new(12).unwrap();
        let f = Modulation { alpha: 3.0, kappa: 0.0, t: 1.0 };
        let p = Modulation { alpha: 3.2, kappa: 0.1, t: 1.05 };
        let s = 0.7;
        let c = frame_content(&f, &p, s, &grid).unwrap();
        let t = f.t * (1.0 - (-s as f64).exp());
        let u = |m: &Modulation, x: f64, t: f64| {
            let sp = (1.0 + m.alpha).sqrt();
            -m.alpha * (1.0 - t / m.t).ln() + m.kappa - m.alpha * (sp + x / (m.t - t)).ln()
        };
        for (j, &y) in grid.nodes().iter().enumerate() {
            let x = (f.t - t) * y;
            assert!((c.q1[j] - (u(&p, x, t) - u(&f, x, t))).abs() < 1e-12);
            // (T_f - t) u_t by centered differences
            let h = 1e-5;
            let ut = |m: &Modulation| (u(m, x, t + h) - u(m, x, t - h)) / (2.0 * h);
            assert!((c.q2[j] - (f.t - t) * (ut(&p) - ut(&f))).abs() < 1e-7);
        }
    }

    #[test]
    fn initial_data_map_examples() {
        let c = cfg();
        let grid = c.grid().unwrap();
        let zero = initial_data_map(&c, 3.0, 0.0, 1.0, &ZeroPerturbation).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let h = 1e-3;
        let u = initial_data_map(&c, 3.0, h, 1.0, &ZeroPerturbation).unwrap();
        let f0 = sample_f0(&grid);
        assert!(u.combine(1.0, &f0, h).max_abs() < 1e-14);
        // α₀ + h: remainder against -h g₀ shrinks 4x per halving
        let rem = |h: f64| {
            let u = initial_data_map(&c, 3.0 + h, 0.0, 1.0, &ZeroPerturbation).unwrap();
            let g0 = sample_g0(&grid, 3.0 + h);
            norm_dblk(&grid, &u.combine(1.0, &g0, h), 2).unwrap()
        };
        let ratio = rem(2e-3) / rem(1e-3);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
        let bound = 2.0;
        assert!(matches!(
            initial_data_map(&c, 3.0, 0.0, bound, &ZeroPerturbation),
            Err(EvolveError::HypothesisViolation { .. })
        ));
    }

    #[test]
    fn data_map_samples_rescaled_perturbation() {
        let c = cfg();
        let grid = c.grid().unwrap();
        let f = |x: f64| (x * x, 1.0 + x);
        let u = initial_data_map(&c, 3.0, 0.0, 1.0, &f).unwrap();
        for (j, &y) in grid.nodes().iter().enumerate() {
            assert!((u.q1[j] - y * y).abs() < 1e-15 && (u.q2[j] - (1.0 + y)).abs() < 1e-15);
        }
    }

    #[test]
    fn gram_dual_examples() {
        let grid = CollocationGrid::new(64).unwrap();
        let g = gram_dual_basis(3.0, &grid, 2).unwrap();
        let res = g.duality_residual().unwrap();
        assert!(res < 1e-10, "{res:e}");
        assert!((g.gram - g.gram.transpose()).amax() < 1e-12 * g.gram.amax());
        assert!(g.gram.cholesky().is_some());
        // direct oracle: solve G c = (⟨⟨bᵢ, q⟩⟩) for q = 2 g₀ - f₀ + 0.5 f₁
        let q = g.basis[0].combine(2.0, &g.basis[1], -1.0).combine(1.0, &g.basis[2], 0.5);
        let rhs = Vector3::from_fn(|i, _| inner_dblk(&grid, &g.basis[i], &q, 2).unwrap());
        let c = g.gram.lu().solve(&rhs).unwrap();
        let p = g.project(&q).unwrap();
        for i in 0..3 {
            assert!((p[i] - c[i]).abs() < 1e-12);
        }
        // the nodal combination carries derivative-amplified rounding
        assert!((p[0] - 2.0).abs() < 1e-8 && (p[1] + 1.0).abs() < 1e-8 && (p[2] - 0.5).abs() < 1e-8);
        assert!(matches!(gram_dual_basis(0.0, &grid, 2), Err(EvolveError::InvalidConfig(_))));
    }

    #[test]
    fn fit_of_zero_state_is_exact() {
        let c = cfg();
        let grid = c.grid().unwrap();
        let dual = gram_dual_basis(c.alpha0, &grid, c.k_norm).unwrap();
        let q = GridFunctionPair::zeros(grid.len());
        let fit = fit_modulation(&c, &grid, &dual, &q, 0.0, c.base()).unwrap();
        assert_eq!((fit.alpha_star, fit.kappa_star, fit.t_star, fit.residual), (3.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn fit_reads_f0_as_kappa_and_f1_as_time_shift() {
        let c = cfg();
        let grid = c.grid().unwrap();
        let dual = gram_dual_basis(c.alpha0, &grid, c.k_norm).unwrap();
        let eps = 1e-4;
        let q = initial_data_map(&c, 3.0, 0.0, 1.0, &ModePerturbation::new(Mode::F0, eps, &c)).unwrap();
        let fit = fit_modulation(&c, &grid, &dual, &q, 0.0, c.base()).unwrap();
        assert!((fit.kappa_star - eps).abs() < 1e-10 && (fit.t_star - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.alpha_star - 3.0).abs() < 1e-10);
        let q = initial_data_map(&c, 3.0, 0.0, 1.0, &ModePerturbation::new(Mode::F1, eps, &c)).unwrap();
        let fit = fit_modulation(&c, &grid, &dual, &q, 0.0, c.base()).unwrap();
        let dt = fit.t_star - 1.0;
        assert!(dt.abs() > 0.5 * eps && dt.abs() < 2.0 * eps, "{dt:e}");
        assert!((fit.alpha_star - 3.0).abs() < 0.1 * eps);
    }
}
