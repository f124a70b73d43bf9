//! Mode analysis of the linearized flow around the `β = ∞` profile.
//!
//! A mode `e^{λs} φ(y)` solves
//! `(λ²+λ)φ + ((2λ+2)y + 2α/(s+y))φ' + (y²-1)φ'' = 0`, `s = √(1+α)`.
//! A Lorentz boost with rapidity `γ = 1/s` turns this into
//! `(λ²-λ)ψ + (2λy' + 2s)ψ' + (y'²-1)ψ'' = 0`, which in `z' = (1+y')/2` is the
//! hypergeometric equation with `(a, b, c) = (λ, λ-1, λ-s)`.

use crate::specfun::{self, INTEGER_TOL};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Distance to `{0, 1}` below which a spectral parameter is snapped to the exact value.
pub const SNAP_TOL: f64 = 1e-9;
/// Default depth of the ratio test.
pub const DEFAULT_N_MAX: u64 = 2000;
/// `|r_{n_max} - 1|` below which the ratio test certifies radius one.
pub const RATIO_TAIL_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error("the requested Frobenius branch needs a logarithmic term")]
    LogCase,
    #[error("recurrence denominator vanished at k = {0}")]
    ResonantDivision(usize),
    #[error("Re(lambda) = {0} is not in the half-plane Re > -1")]
    OutOfHalfPlane(f64),
    #[error("alpha must satisfy alpha > 0, got {0}")]
    InvalidAlpha(f64),
}

/// Singular point of the `z'` chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    Zero,
    One,
}

/// Frobenius exponent: `Plus` has the larger real part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

/// Parameters of the Heun form of the eigen-equation in `z = (1+y)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeunCoefficients {
    pub gamma: Complex64,
    pub delta: Complex64,
    pub d: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub epsilon: f64,
}

pub fn heun_coefficients(lambda: Complex64, alpha: f64) -> HeunCoefficients {
    let s = (1.0 + alpha).sqrt();
    HeunCoefficients {
        gamma: lambda - s,
        delta: lambda + s,
        d: -(s - 1.0) / 2.0,
        a: lambda,
        b: lambda + 1.0,
        c: -0.5 * (lambda * lambda + lambda) * (s - 1.0),
        epsilon: 2.0,
    }
}

/// `(a, b, c)` of the hypergeometric equation in the boosted `z'` chart.
pub fn hypergeometric_params(lambda: Complex64, alpha: f64) -> (Complex64, Complex64, Complex64) {
    let s = (1.0 + alpha).sqrt();
    (lambda, lambda - 1.0, lambda - s)
}

/// Residual of the original eigen-equation for `φ = [φ, φ', φ'']` at `y`.
pub fn eigen_residual(lambda: Complex64, alpha: f64, y: f64, phi: [Complex64; 3]) -> Complex64 {
    let s = (1.0 + alpha).sqrt();
    (lambda * lambda + lambda) * phi[0]
        + ((2.0 * lambda + 2.0) * y + 2.0 * alpha / (s + y)) * phi[1]
        + (y * y - 1.0) * phi[2]
}

/// Residual of the boosted eigen-equation for `ψ = [ψ, ψ', ψ'']` at `y'`.
pub fn boosted_residual(lambda: Complex64, alpha: f64, yp: f64, psi: [Complex64; 3]) -> Complex64 {
    let s = (1.0 + alpha).sqrt();
    (lambda * lambda - lambda) * psi[0] + (2.0 * lambda * yp + 2.0 * s) * psi[1] + (yp * yp - 1.0) * psi[2]
}

/// `ψ(y') = ((1-γy')/√(1-γ²))^{-λ} φ((y'-γ)/(1-γy'))` for a general rapidity `γ ∈ (-1, 1)`.
pub fn lorentz_boost<F>(lambda: Complex64, gamma: f64, phi: F) -> impl Fn(f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let norm = (1.0 - gamma * gamma).sqrt();
    move |yp: f64| {
        let w = (1.0 - gamma * yp) / norm;
        Complex64::new(w, 0.0).powc(-lambda) * phi((yp - gamma) / (1.0 - gamma * yp))
    }
}

/// The boost with `γ = 1/√(1+α)` that maps eigenfunctions to the hypergeometric chart.
pub fn lorentz_transform_eigenfunction<F>(lambda: Complex64, alpha: f64, phi: F) -> impl Fn(f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    lorentz_boost(lambda, 1.0 / (1.0 + alpha).sqrt(), phi)
}

/// Inverse of [`lorentz_transform_eigenfunction`]: the boost with `-γ`.
pub fn inverse_lorentz_transform<F>(lambda: Complex64, alpha: f64, psi: F) -> impl Fn(f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    lorentz_boost(lambda, -1.0 / (1.0 + alpha).sqrt(), psi)
}

/// Indicial exponents at a singular point, ordered by real part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndicialData {
    pub point: Center,
    pub s_plus: Complex64,
    pub s_minus: Complex64,
    /// `s₊ - s₋` is a nonnegative integer.
    pub integer_gap: bool,
    /// A logarithmic term can appear in the second solution.
    pub log_possible: bool,
}

/// Local hypergeometric parameters `(a', b', c')` at a center, in the local
/// variable `z'` (center zero) or `1 - z'` (center one).
fn local_params(center: Center, lambda: Complex64, alpha: f64) -> (Complex64, Complex64, Complex64) {
    let (a, b, c) = hypergeometric_params(lambda, alpha);
    match center {
        Center::Zero => (a, b, c),
        Center::One => (a, b, 1.0 + a + b - c),
    }
}

/// The indicial polynomial `P(σ) = σ(σ - 1 + c')` at the center.
pub fn indicial_polynomial(center: Center, lambda: Complex64, alpha: f64, sigma: Complex64) -> Complex64 {
    let (_, _, cl) = local_params(center, lambda, alpha);
    sigma * (sigma - 1.0 + cl)
}

fn integer_gap(d: Complex64) -> bool {
    d.im.abs() <= INTEGER_TOL && d.re > -INTEGER_TOL && (d.re - d.re.round()).abs() <= INTEGER_TOL
}

pub fn indicial_roots(point: Center, lambda: Complex64, alpha: f64) -> IndicialData {
    let (_, _, cl) = local_params(point, lambda, alpha);
    let r0 = Complex64::new(0.0, 0.0);
    let r1 = 1.0 - cl;
    let (s_plus, s_minus) = if r1.re > r0.re { (r1, r0) } else { (r0, r1) };
    let gap = integer_gap(s_plus - s_minus);
    IndicialData { point, s_plus, s_minus, integer_gap: gap, log_possible: gap }
}

/// `(x - x₀)^σ Σ a_k (x - x₀)^k` in the local variable `x = z'` (center zero)
/// or `x = 1 - z'` (center one).
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusSeries {
    pub center: Center,
    pub exponent: Complex64,
    pub coefficients: Vec<Complex64>,
    /// Root-test estimate of the radius of convergence (infinite for polynomials).
    pub radius_estimate: f64,
}

impl FrobeniusSeries {
    /// Value and first two `z'`-derivatives at `z'` in `(0, 1)`.
    pub fn eval(&self, zp: f64) -> [Complex64; 3] {
        let (x, sign) = match self.center {
            Center::Zero => (zp, 1.0),
            Center::One => (1.0 - zp, -1.0),
        };
        let mut f = [Complex64::new(0.0, 0.0); 3];
        let lx = Complex64::new(x.ln(), 0.0);
        for (k, ak) in self.coefficients.iter().enumerate() {
            if *ak == Complex64::new(0.0, 0.0) {
                continue;
            }
            let p = self.exponent + k as f64;
            let xp = (p * lx).exp();
            f[0] += ak * xp;
            f[1] += ak * p * xp / x;
            f[2] += ak * p * (p - 1.0) * xp / (x * x);
        }
        [f[0], sign * f[1], f[2]]
    }
}

pub fn frobenius_series(
    center: Center,
    branch: Branch,
    lambda: Complex64,
    alpha: f64,
    n_terms: usize,
) -> Result<FrobeniusSeries, ModeError> {
    let roots = indicial_roots(center, lambda, alpha);
    let (al, bl, cl) = local_params(center, lambda, alpha);
    let sigma = match branch {
        Branch::Plus => roots.s_plus,
        Branch::Minus => roots.s_minus,
    };
    let gap = roots.s_plus - roots.s_minus;
    let resonant = match branch {
        Branch::Minus if roots.integer_gap => {
            let g = gap.re.round() as usize;
            if g == 0 {
                return Err(ModeError::LogCase);
            }
            Some(g - 1)
        }
        _ => None,
    };
    let zero = Complex64::new(0.0, 0.0);
    let mut coefficients = Vec::with_capacity(n_terms.max(1));
    coefficients.push(Complex64::new(1.0, 0.0));
    for k in 0..n_terms.saturating_sub(1) {
        let kf = k as f64;
        let num = coefficients[k] * (kf + sigma + al) * (kf + sigma + bl);
        let den = (kf + sigma + 1.0) * (kf + sigma + cl);
        if den.norm() <= INTEGER_TOL {
            if Some(k) != resonant {
                return Err(ModeError::ResonantDivision(k));
            }
            if num.norm() > INTEGER_TOL * (1.0 + coefficients[k].norm()) {
                return Err(ModeError::LogCase);
            }
            // log-free resonance: the free coefficient is set to zero
            coefficients.push(zero);
            continue;
        }
        coefficients.push(num / den);
    }
    let radius_estimate = root_test_radius(&coefficients);
    Ok(FrobeniusSeries { center, exponent: sigma, coefficients, radius_estimate })
}

fn root_test_radius(c: &[Complex64]) -> f64 {
    match c.iter().rposition(|a| a.norm() > 0.0) {
        Some(n) if n > 0 && n + 1 == c.len() => c[n].norm().powf(-1.0 / n as f64),
        _ => f64::INFINITY,
    }
}

/// Coefficients `a_0..=a_n` of `₂F₁(λ, λ-1; λ+√(1+α); 1-z')`, built from running ratios.
pub fn eigen_series_coefficients(lambda: Complex64, alpha: f64, n: usize) -> Vec<Complex64> {
    let s = (1.0 + alpha).sqrt();
    let mut a = Vec::with_capacity(n + 1);
    a.push(Complex64::new(1.0, 0.0));
    for k in 0..n {
        let kf = k as f64;
        let r = (lambda + kf) * (lambda + kf - 1.0) / ((lambda + s + kf) * (kf + 1.0));
        a.push(a[k] * r);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    SeriesTerminates,
    RatioLimit,
    RadiusOne,
}

impl Evidence {
    pub fn as_str(self) -> &'static str {
        match self {
            Evidence::SeriesTerminates => "series_terminates",
            Evidence::RatioLimit => "ratio_limit",
            Evidence::RadiusOne => "radius_one",
        }
    }
}

/// Whether `λ` admits an eigenfunction smooth on `[-1, 1]`, with its evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub lambda: Complex64,
    pub smooth: bool,
    pub evidence: Evidence,
    pub ratio_tail: f64,
}

pub fn mode_stability_verdict(lambda: Complex64, alpha: f64, n_max: u64) -> Result<StabilityVerdict, ModeError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(ModeError::InvalidAlpha(alpha));
    }
    if lambda.re <= -1.0 {
        return Err(ModeError::OutOfHalfPlane(lambda.re));
    }
    for snap in [0.0, 1.0] {
        if (lambda - snap).norm() < SNAP_TOL {
            return Ok(StabilityVerdict {
                lambda: Complex64::new(snap, 0.0),
                smooth: true,
                evidence: Evidence::SeriesTerminates,
                ratio_tail: 0.0,
            });
        }
    }
    let r = specfun::coefficient_ratio_rn(lambda, alpha, n_max).map_err(|_| ModeError::ResonantDivision(0))?;
    let ratio_tail = (r - 1.0).norm();
    let evidence = if ratio_tail < RATIO_TAIL_THRESHOLD {
        Evidence::RatioLimit
    } else {
        Evidence::RadiusOne
    };
    Ok(StabilityVerdict { lambda, smooth: false, evidence, ratio_tail })
}

/// Inclusive lattice of `n` points on `[lo, hi]`.
pub fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Verdicts on an `nx × ny` lattice, real part outer, in lattice order.
pub fn scan_halfplane(
    alpha: f64,
    re_range: (f64, f64),
    im_range: (f64, f64),
    grid: (usize, usize),
    n_max: u64,
) -> Result<Vec<StabilityVerdict>, ModeError> {
    let res = lattice(re_range.0, re_range.1, grid.0);
    let ims = lattice(im_range.0, im_range.1, grid.1);
    let points: Vec<Complex64> = res
        .iter()
        .flat_map(|&re| ims.iter().map(move |&im| Complex64::new(re, im)))
        .collect();
    points.par_iter().map(|&l| mode_stability_verdict(l, alpha, n_max)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::pochhammer;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn heun_coefficients_alpha3_lambda1() {
        let h = heun_coefficients(c(1.0), 3.0);
        assert_eq!((h.gamma, h.delta, h.d), (c(-1.0), c(3.0), -0.5));
        assert_eq!((h.a, h.b, h.c, h.epsilon), (c(1.0), c(2.0), c(-1.0), 2.0));
    }

    #[test]
    fn heun_fuchs_relation() {
        let l = Complex64::new(0.3, -1.2);
        let h = heun_coefficients(l, 5.0);
        let lhs = h.a + h.b + 1.0;
        assert_relative_eq!((lhs - h.gamma - h.delta - h.epsilon).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn indicial_roots_at_one() {
        let r = indicial_roots(Center::One, c(1.0), 3.0);
        assert_eq!(r.s_plus, c(0.0));
        assert_eq!(r.s_minus, c(-2.0));
        assert!(r.integer_gap && r.log_possible);
        let r = indicial_roots(Center::Zero, Complex64::new(0.5, 2.0), 3.0);
        assert!(!r.integer_gap);
        assert!(r.s_plus.re >= r.s_minus.re);
    }

    #[test]
    fn double_root_needs_log() {
        let e = frobenius_series(Center::Zero, Branch::Minus, c(3.0), 3.0, 20).unwrap_err();
        assert_eq!(e, ModeError::LogCase);
    }

    #[test]
    fn center_one_plus_matches_pochhammer_formula() {
        let s = 2.0;
        for l in [c(1.0), Complex64::new(0.4, 1.5), c(2.5)] {
            let f = frobenius_series(Center::One, Branch::Plus, l, 3.0, 50).unwrap();
            for (n, an) in f.coefficients.iter().enumerate() {
                let n32 = n as u32;
                let mut fact = 1.0;
                for k in 1..=n {
                    fact *= k as f64;
                }
                let expect = pochhammer(l, n32) * pochhammer(l - 1.0, n32) / (pochhammer(l + s, n32) * fact);
                assert_relative_eq!((an - expect).norm(), 0.0, epsilon = 1e-12 * (1.0 + expect.norm()));
            }
        }
    }

    #[test]
    fn frobenius_solves_hypergeometric_equation() {
        let l = Complex64::new(0.7, 0.9);
        let (a, b, cc) = hypergeometric_params(l, 3.0);
        for (center, branch) in [(Center::Zero, Branch::Plus), (Center::Zero, Branch::Minus), (Center::One, Branch::Plus), (Center::One, Branch::Minus)] {
            let f = frobenius_series(center, branch, l, 3.0, 400).unwrap();
            for zp in [0.3, 0.5, 0.7] {
                let [v, d1, d2] = f.eval(zp);
                let res = zp * (1.0 - zp) * d2 + (cc - (a + b + 1.0) * zp) * d1 - a * b * v;
                assert!(res.norm() < 1e-9 * (1.0 + v.norm() + d2.norm()), "{center:?} {branch:?} {zp}");
            }
        }
    }

    #[test]
    fn boost_maps_f1_to_constant() {
        let alpha = 3.0;
        let s = 2.0;
        let phi = move |y: f64| c(alpha * s / (s + y));
        let psi = lorentz_transform_eigenfunction(c(1.0), alpha, phi);
        let v0 = psi(-0.9);
        for yp in [-0.5, 0.0, 0.4, 0.95] {
            assert_relative_eq!((psi(yp) - v0).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn verdict_snaps_and_rejects() {
        let v = mode_stability_verdict(Complex64::new(1e-11, -1e-11), 3.0, 2000).unwrap();
        assert!(v.smooth);
        assert_eq!(v.lambda, c(0.0));
        assert_eq!(v.evidence, Evidence::SeriesTerminates);
        let v = mode_stability_verdict(Complex64::new(0.5, 2.0), 3.0, 2000).unwrap();
        assert!(!v.smooth);
        assert_eq!(v.evidence, Evidence::RatioLimit);
        assert!(v.ratio_tail < 5e-3);
        assert_eq!(mode_stability_verdict(c(-1.5), 3.0, 2000), Err(ModeError::OutOfHalfPlane(-1.5)));
        assert!(mode_stability_verdict(c(0.5), 0.0, 2000).is_err());
    }

    #[test]
    fn ratio_tail_asymptotics() {
        // |r_n - 1| ≈ |λ - s - 2| / n for large n
        let l = Complex64::new(-0.9, 4.0);
        let v = mode_stability_verdict(l, 8.0, 2000).unwrap();
        assert_relative_eq!(v.ratio_tail, (l - 5.0).norm() / 2000.0, max_relative = 1e-2);
    }

    #[test]
    fn scan_keeps_lattice_order() {
        let rows = scan_halfplane(3.0, (-0.5, 2.0), (-1.0, 1.0), (6, 3), 2000).unwrap();
        assert_eq!(rows.len(), 18);
        assert_eq!(rows[0].lambda, Complex64::new(-0.5, -1.0));
        assert_eq!(rows[1].lambda, Complex64::new(-0.5, 0.0));
        assert_eq!(rows[4].lambda, Complex64::new(0.0, 0.0));
        assert!(rows[4].smooth);
        assert!(rows.iter().filter(|r| r.smooth).count() == 2);
    }
}
