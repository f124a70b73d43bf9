//! The linearized operator `L_α` on `[-1, 1]` in Chebyshev collocation, its
//! inner products, explicit eigenfunctions and discrete spectrum.

pub mod dd;
pub mod eig;
pub mod grid;
pub mod obstruction;
pub mod precise;
pub mod spectrum;

pub use grid::CollocationGrid;
pub use spectrum::{assemble_and_eig, assemble_matrix, jordan_block_check, EigClass, SpectralReport};

use crate::quad::QuadError;
use nalgebra::ComplexField;
use num_complex::Complex64;
use thiserror::Error;

/// Field of grid values: `f64` for evolution, `Complex64` for eigenvectors.
pub trait Scalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopError {
    #[error("grid function has {got} nodes, grid has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("derivative order {order} is not resolved on a degree-{n} grid")]
    UnderResolved { order: usize, n: usize },
    #[error("grid degree must be at least 2, got {0}")]
    InvalidGrid(usize),
    #[error("alpha must satisfy alpha > 0, got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Eig(#[from] eig::EigError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("least-squares fit is singular")]
    SingularFit,
}

/// `q = (q₁, q₂)` sampled on the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunctionPair<T = f64> {
    pub q1: Vec<T>,
    pub q2: Vec<T>,
}

impl<T: Scalar> GridFunctionPair<T> {
    pub fn zeros(len: usize) -> Self {
        GridFunctionPair { q1: vec![T::zero(); len], q2: vec![T::zero(); len] }
    }

    pub fn from_fns<F1, F2>(grid: &CollocationGrid, f1: F1, f2: F2) -> Self
    where
        F1: Fn(f64) -> T,
        F2: Fn(f64) -> T,
    {
        GridFunctionPair { q1: grid.sample(f1), q2: grid.sample(f2) }
    }

    pub fn len(&self) -> usize {
        self.q1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q1.is_empty()
    }

    pub fn check(&self, grid: &CollocationGrid) -> Result<(), LinopError> {
        for v in [&self.q1, &self.q2] {
            if v.len() != grid.len() {
                return Err(LinopError::DimensionMismatch { expected: grid.len(), got: v.len() });
            }
        }
        Ok(())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        let f = |x: &[T], y: &[T]| x.iter().zip(y).map(|(u, v)| a * *u + b * *v).collect();
        GridFunctionPair { q1: f(&self.q1, &other.q1), q2: f(&self.q2, &other.q2) }
    }

    pub fn scaled(&self, a: T) -> Self {
        GridFunctionPair {
            q1: self.q1.iter().map(|v| a * *v).collect(),
            q2: self.q2.iter().map(|v| a * *v).collect(),
        }
    }

    /// Stacked vector `[q₁; q₂]`.
    pub fn to_stacked(&self) -> Vec<T> {
        self.q1.iter().chain(&self.q2).copied().collect()
    }

    pub fn from_stacked(v: &[T]) -> Self {
        let n = v.len() / 2;
        GridFunctionPair { q1: v[..n].to_vec(), q2: v[n..].to_vec() }
    }

    pub fn max_abs(&self) -> f64 {
        self.q1.iter().chain(&self.q2).fold(0.0, |m, v| m.max(v.modulus()))
    }
}

impl GridFunctionPair<f64> {
    pub fn to_complex(&self) -> GridFunctionPair<Complex64> {
        let c = |v: &[f64]| v.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        GridFunctionPair { q1: c(&self.q1), q2: c(&self.q2) }
    }
}

/// `√(1+α)`.
pub(crate) fn sqrt1p(alpha: f64) -> f64 {
    (1.0 + alpha).sqrt()
}

/// `L_α q = (-y q₁' + q₂, q₁'' - 2α/(s+y) q₁' - q₂ - y q₂')`.
pub fn apply_l_alpha<T: Scalar>(
    alpha: f64,
    grid: &CollocationGrid,
    q: &GridFunctionPair<T>,
) -> Result<GridFunctionPair<T>, LinopError> {
    q.check(grid)?;
    let s = sqrt1p(alpha);
    let d1 = grid.derivative(&q.q1, 1);
    let d2 = grid.derivative(&d1, 1);
    let e1 = grid.derivative(&q.q2, 1);
    let y = grid.nodes();
    let r = |x: f64| T::from_real(x);
    let out1 = (0..y.len()).map(|j| -r(y[j]) * d1[j] + q.q2[j]).collect();
    let out2 = (0..y.len())
        .map(|j| d2[j] - r(2.0 * alpha / (s + y[j])) * d1[j] - q.q2[j] - r(y[j]) * e1[j])
        .collect();
    Ok(GridFunctionPair { q1: out1, q2: out2 })
}

/// Modified free operator `L̃q = (-y q₁' + q₂ - q₁(-1), q₁'' - q₂ - y q₂')`.
pub fn apply_free_modified<T: Scalar>(grid: &CollocationGrid, q: &GridFunctionPair<T>) -> Result<GridFunctionPair<T>, LinopError> {
    q.check(grid)?;
    let d1 = grid.derivative(&q.q1, 1);
    let d2 = grid.derivative(&d1, 1);
    let e1 = grid.derivative(&q.q2, 1);
    let y = grid.nodes();
    let left = q.q1[grid.left_index()];
    let r = |x: f64| T::from_real(x);
    let out1 = (0..y.len()).map(|j| -r(y[j]) * d1[j] + q.q2[j] - left).collect();
    let out2 = (0..y.len()).map(|j| d2[j] - q.q2[j] - r(y[j]) * e1[j]).collect();
    Ok(GridFunctionPair { q1: out1, q2: out2 })
}

/// `⟨q, r⟩_k`: the `k = 0` form `∫q₁'r̄₁' + ∫q₂r̄₂ + q₁(-1)r̄₁(-1)`, plus
/// `∫∂^{k+1}q₁ ∂^{k+1}r̄₁ + ∫∂^k q₂ ∂^k r̄₂` for `k ≥ 1`.
pub fn inner_k<T: Scalar>(grid: &CollocationGrid, q: &GridFunctionPair<T>, r: &GridFunctionPair<T>, k: usize) -> Result<T, LinopError> {
    q.check(grid)?;
    r.check(grid)?;
    grid.check_order(k + 1)?;
    let dq = grid.derivative(&q.q1, 1);
    let dr = grid.derivative(&r.q1, 1);
    let l = grid.left_index();
    let mut acc = grid.integrate_product(&dq, &dr) + grid.integrate_product(&q.q2, &r.q2) + q.q1[l] * r.q1[l].conjugate();
    if k >= 1 {
        let a = grid.derivative(&dq, k);
        let b = grid.derivative(&dr, k);
        acc += grid.integrate_product(&a, &b);
        let a = grid.derivative(&q.q2, k);
        let b = grid.derivative(&r.q2, k);
        acc += grid.integrate_product(&a, &b);
    }
    Ok(acc)
}

/// `⟨⟨q, r⟩⟩_k = ⟨⟨q₁, r₁⟩⟩_{k+1} + ⟨⟨q₂, r₂⟩⟩_k`, `⟨⟨ψ, φ⟩⟩_m = (∂^mψ, ∂^mφ) + (ψ, φ)`.
pub fn inner_dblk<T: Scalar>(grid: &CollocationGrid, q: &GridFunctionPair<T>, r: &GridFunctionPair<T>, k: usize) -> Result<T, LinopError> {
    q.check(grid)?;
    r.check(grid)?;
    grid.check_order(k + 1)?;
    let single = |a: &[T], b: &[T], m: usize| {
        let da = grid.derivative(a, m);
        let db = grid.derivative(b, m);
        grid.integrate_product(&da, &db) + grid.integrate_product(a, b)
    };
    Ok(single(&q.q1, &r.q1, k + 1) + single(&q.q2, &r.q2, k))
}

pub fn norm_k<T: Scalar>(grid: &CollocationGrid, q: &GridFunctionPair<T>, k: usize) -> Result<f64, LinopError> {
    Ok(inner_k(grid, q, q, k)?.real().max(0.0).sqrt())
}

pub fn norm_dblk<T: Scalar>(grid: &CollocationGrid, q: &GridFunctionPair<T>, k: usize) -> Result<f64, LinopError> {
    Ok(inner_dblk(grid, q, q, k)?.real().max(0.0).sqrt())
}

/// `‖q₁‖_{H^{k+1}} + ‖q₂‖_{H^k}` with full Sobolev stacks.
pub fn sobolev_pair_norm<T: Scalar>(grid: &CollocationGrid, q: &GridFunctionPair<T>, k: usize) -> Result<f64, LinopError> {
    q.check(grid)?;
    grid.check_order(k + 1)?;
    let hm = |v: &[T], m: usize| {
        let mut acc = 0.0;
        let mut d = v.to_vec();
        for j in 0..=m {
            if j > 0 {
                d = grid.derivative(&d, 1);
            }
            acc += grid.integrate_product(&d, &d).real();
        }
        acc.max(0.0).sqrt()
    };
    Ok(hm(&q.q1, k + 1) + hm(&q.q2, k))
}

/// `Re⟨L̃q, q⟩_k + ½‖q‖_k²`; nonpositive up to rounding for every `q`.
pub fn free_dissipativity_check<T: Scalar>(grid: &CollocationGrid, q: &GridFunctionPair<T>, k: usize) -> Result<f64, LinopError> {
    let lq = apply_free_modified(grid, q)?;
    let a = inner_k(grid, &lq, q, k)?.real();
    let b = inner_k(grid, q, q, k)?.real();
    Ok(a + 0.5 * b)
}

/// Solves `-L̃q = f` on the grid:
/// `F = f₁ + y f₁' + f₂`, `q₁(-1) = ½∫F`,
/// `q₁(y) = q₁(-1) + ∫_{-1}^y (∫_{-1}^w (F - q₁(-1))) / (w² - 1) dw`,
/// `q₂ = y q₁' + q₁(-1) - f₁`.
pub fn solve_free(grid: &CollocationGrid, f: &GridFunctionPair<f64>) -> Result<GridFunctionPair<f64>, LinopError> {
    f.check(grid)?;
    let y = grid.nodes();
    let df1 = grid.derivative(&f.q1, 1);
    let big_f: Vec<f64> = (0..y.len()).map(|j| f.q1[j] + y[j] * df1[j] + f.q2[j]).collect();
    let c = 0.5 * grid.integrate(&big_f);
    let g: Vec<f64> = big_f.iter().map(|v| v - c).collect();
    let inner = cumulative_integral(grid, &g);
    // inner vanishes at both ends, so inner/(w²-1) extends smoothly; use
    // L'Hôpital at y = ±1: inner'(±1)/(±2)
    let n = grid.degree();
    let mut ratio = vec![0.0; y.len()];
    for j in 0..y.len() {
        ratio[j] = if j == 0 {
            g[0] / 2.0
        } else if j == n {
            -g[n] / 2.0
        } else {
            inner[j] / (y[j] * y[j] - 1.0)
        };
    }
    let outer = cumulative_integral(grid, &ratio);
    let q1: Vec<f64> = outer.iter().map(|v| c + v).collect();
    let dq1 = grid.derivative(&q1, 1);
    let q2 = (0..y.len()).map(|j| y[j] * dq1[j] + c - f.q1[j]).collect();
    Ok(GridFunctionPair { q1, q2 })
}

/// `∫_{-1}^{y_j} v` of the interpolant, by Chebyshev-coefficient integration.
pub fn cumulative_integral(grid: &CollocationGrid, v: &[f64]) -> Vec<f64> {
    let n = grid.degree();
    let a = grid.cheb_coefficients(v);
    // coefficients of the antiderivative, degree n + 1
    let mut b = vec![0.0; n + 2];
    for k in 1..=n + 1 {
        let am = if k == 1 { 2.0 * a[0] } else { a[k - 1] };
        let ap = if k < n { a[k + 1] } else { 0.0 };
        b[k] = (am - ap) / (2.0 * k as f64);
    }
    let eval = |y: f64| -> f64 {
        let th = y.clamp(-1.0, 1.0).acos();
        (1..=n + 1).map(|k| b[k] * (k as f64 * th).cos()).sum()
    };
    let base = eval(-1.0);
    grid.nodes().iter().map(|&y| eval(y) - base).collect()
}

/// Explicit eigenfunctions of `L_α` as functions of `y`.
pub mod modes_explicit {
    /// `f₀ = (1, 0)`, eigenvalue 0.
    pub fn f0(_y: f64) -> (f64, f64) {
        (1.0, 0.0)
    }

    /// `f₁ = (αs/(s+y), α(1+α)/(s+y)²)`, eigenvalue 1.
    pub fn f1(alpha: f64, y: f64) -> (f64, f64) {
        let s = (1.0 + alpha).sqrt();
        (alpha * s / (s + y), alpha * (1.0 + alpha) / ((s + y) * (s + y)))
    }

    /// Generalized eigenfunction with `L g₀ = f₀`.
    pub fn g0(alpha: f64, y: f64) -> (f64, f64) {
        let s = (1.0 + alpha).sqrt();
        let c = alpha / (2.0 * s);
        (-(s + y).ln() - c / (s + y), 1.0 - y / (s + y) + c * y / ((s + y) * (s + y)))
    }
}

pub fn sample_f0(grid: &CollocationGrid) -> GridFunctionPair<f64> {
    GridFunctionPair::from_fns(grid, |y| modes_explicit::f0(y).0, |y| modes_explicit::f0(y).1)
}

pub fn sample_f1(grid: &CollocationGrid, alpha: f64) -> GridFunctionPair<f64> {
    GridFunctionPair::from_fns(grid, |y| modes_explicit::f1(alpha, y).0, |y| modes_explicit::f1(alpha, y).1)
}

pub fn sample_g0(grid: &CollocationGrid, alpha: f64) -> GridFunctionPair<f64> {
    GridFunctionPair::from_fns(grid, |y| modes_explicit::g0(alpha, y).0, |y| modes_explicit::g0(alpha, y).1)
}

/// `L_{α,k} ∂^k q + L'_{α,k} q`, the right side of `∂^k L_α q = L_{α,k}∂^k q + L'_{α,k} q`
/// with `∂^k` acting on both components and
/// `L'_{α,k} q = (0, Σ_{j=1}^k C(k,j) ∂^j(2U') ∂^{k+1-j} q₁)`, `U' = -α/(s+y)`.
pub fn commuted_operator(alpha: f64, grid: &CollocationGrid, q: &GridFunctionPair<f64>, k: usize) -> Result<GridFunctionPair<f64>, LinopError> {
    q.check(grid)?;
    grid.check_order(k + 2)?;
    let s = sqrt1p(alpha);
    let y = grid.nodes();
    let kf = k as f64;
    let p1: Vec<Vec<f64>> = (0..=k + 2).map(|m| grid.derivative(&q.q1, m)).collect();
    let dk2 = grid.derivative(&q.q2, k);
    let dk2p = grid.derivative(&dk2, 1);
    // ∂^j(2U') = 2α(-1)^{j+1} j! / (s+y)^{j+1}
    let du = |j: usize, yv: f64| {
        let fact: f64 = (1..=j).map(|i| i as f64).product();
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        2.0 * alpha * sign * fact / (s + yv).powi(j as i32 + 1)
    };
    let binom = |n: usize, r: usize| -> f64 { (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
    let out1 = (0..y.len()).map(|i| -kf * p1[k][i] - y[i] * p1[k + 1][i] + dk2[i]).collect();
    let out2 = (0..y.len())
        .map(|i| {
            let mut v = p1[k + 2][i] + du(0, y[i]) * p1[k + 1][i] - (1.0 + kf) * dk2[i] - y[i] * dk2p[i];
            for j in 1..=k {
                v += binom(k, j) * du(j, y[i]) * p1[k + 1 - j][i];
            }
            v
        })
        .collect();
    Ok(GridFunctionPair { q1: out1, q2: out2 })
}
