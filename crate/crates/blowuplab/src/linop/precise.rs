//! Double-double collocation of `L_α` for the spectral computation.
//!
//! The Jordan pair at `λ = 0` splits like the square root of the rounding
//! level, so the matrix, its eigen-decomposition and the residuals are formed
//! in double-double arithmetic and rounded to `f64` only for reporting.

use super::eig::Real;
use super::{CollocationGrid, GridFunctionPair};
use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
pub use super::dd::Dd;

pub type CDd = Complex<Dd>;

fn dd(x: f64) -> Dd {
    Dd::from_f64(x)
}

/// Chebyshev-Gauss-Lobatto nodes and differentiation matrix in double-double.
#[derive(Debug, Clone)]
pub struct PreciseGrid {
    n: usize,
    nodes: Vec<Dd>,
    diff: DMatrix<Dd>,
}

impl PreciseGrid {
    pub fn new(n: usize) -> Self {
        let pi = Dd::pi();
        let nf = dd(n as f64);
        // x_j = cos(πj/N) = sin(π(N-2j)/(2N)) keeps the nodes antisymmetric
        let nodes: Vec<Dd> = (0..=n).map(|j| (pi * dd(n as f64 - 2.0 * j as f64) / (dd(2.0) * nf)).sin()).collect();
        let c = |j: usize| if j == 0 || j == n { dd(2.0) } else { dd(1.0) };
        let mut diff = DMatrix::from_element(n + 1, n + 1, dd(0.0));
        for i in 0..=n {
            let mut row = dd(0.0);
            for j in 0..=n {
                if i == j {
                    continue;
                }
                // x_i - x_j = -2 sin(π(i+j)/(2N)) sin(π(i-j)/(2N))
                let dx = dd(-2.0) * (pi * dd((i + j) as f64) / (dd(2.0) * nf)).sin() * (pi * dd(i as f64 - j as f64) / (dd(2.0) * nf)).sin();
                let sign = if (i + j) % 2 == 0 { dd(1.0) } else { dd(-1.0) };
                let v = c(i) / c(j) * sign / dx;
                diff[(i, j)] = v;
                row = row + v;
            }
            diff[(i, i)] = -row;
        }
        PreciseGrid { n, nodes, diff }
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[Dd] {
        &self.nodes
    }

    pub fn diff_matrix(&self) -> &DMatrix<Dd> {
        &self.diff
    }

    pub fn derivative(&self, v: &[CDd], m: usize) -> Vec<CDd> {
        let mut out = v.to_vec();
        for _ in 0..m {
            out = matvec(&self.diff, &out);
        }
        out
    }
}

pub fn matvec(a: &DMatrix<Dd>, v: &[CDd]) -> Vec<CDd> {
    (0..a.nrows())
        .map(|i| {
            let (mut re, mut im) = (dd(0.0), dd(0.0));
            for (j, x) in v.iter().enumerate() {
                let a_ij = a[(i, j)];
                re = re + a_ij * x.re;
                im = im + a_ij * x.im;
            }
            CDd::new(re, im)
        })
        .collect()
}

/// `√(1+α)` in double-double.
pub fn sqrt1p(alpha: f64) -> Dd {
    (dd(1.0) + dd(alpha)).sqrt()
}

/// Nodal matrix of `L_α` on stacked `[q₁; q₂]`, the double-double twin of
/// [`super::assemble_matrix`].
pub fn l_alpha_matrix(alpha: f64, grid: &PreciseGrid) -> DMatrix<Dd> {
    let m = grid.n + 1;
    let d = &grid.diff;
    let y = &grid.nodes;
    let s = sqrt1p(alpha);
    let mut d2 = DMatrix::from_element(m, m, dd(0.0));
    for i in 0..m {
        for j in 0..m {
            let mut acc = dd(0.0);
            for k in 0..m {
                acc = acc + d[(i, k)] * d[(k, j)];
            }
            d2[(i, j)] = acc;
        }
    }
    let mut a = DMatrix::from_element(2 * m, 2 * m, dd(0.0));
    for i in 0..m {
        let c = dd(2.0 * alpha) / (s + y[i]);
        for j in 0..m {
            a[(i, j)] = -y[i] * d[(i, j)];
            a[(m + i, j)] = d2[(i, j)] - c * d[(i, j)];
            a[(m + i, m + j)] = -y[i] * d[(i, j)];
        }
        a[(i, m + i)] = a[(i, m + i)] + dd(1.0);
        a[(m + i, m + i)] = a[(m + i, m + i)] - dd(1.0);
    }
    a
}

pub fn to_c64(v: &[CDd]) -> Vec<Complex64> {
    v.iter().map(|c| Complex64::new(c.re.lossy_f64(), c.im.lossy_f64())).collect()
}

/// `⟨⟨q, q⟩⟩_k^{1/2}` with derivatives taken in double-double and the
/// quadrature done in `f64` on the companion grid.
pub fn norm_dblk(grid: &PreciseGrid, fine: &CollocationGrid, q1: &[CDd], q2: &[CDd], k: usize) -> f64 {
    let term = |v: &[CDd], m: usize| {
        let d = to_c64(&grid.derivative(v, m));
        let v0 = to_c64(v);
        fine.integrate_product(&d, &d).re + fine.integrate_product(&v0, &v0).re
    };
    (term(q1, k + 1) + term(q2, k)).max(0.0).sqrt()
}

/// Splits a stacked double-double vector into a rounded pair.
pub fn to_pair(v: &[CDd]) -> GridFunctionPair<Complex64> {
    GridFunctionPair::from_stacked(&to_c64(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_match_f64_grid() {
        let p = PreciseGrid::new(16);
        let g = CollocationGrid::new(16).unwrap();
        for (a, b) in p.nodes().iter().zip(g.nodes()) {
            assert!((a.lossy_f64() - b).abs() < 1e-15);
        }
        // cos(π/3) at j = N/3 for N = 12
        let p = PreciseGrid::new(12);
        assert!((p.nodes()[4] - dd(0.5)).abs().lossy_f64() < 1e-30);
    }

    #[test]
    fn differentiates_cubic_to_double_double() {
        let p = PreciseGrid::new(10);
        let v: Vec<CDd> = p.nodes().iter().map(|y| CDd::new(*y * *y * *y, dd(0.0))).collect();
        let d = p.derivative(&v, 1);
        for (y, dv) in p.nodes().iter().zip(&d) {
            assert!((dv.re - dd(3.0) * *y * *y).abs().lossy_f64() < 1e-28);
        }
    }

    #[test]
    fn constant_is_in_the_kernel() {
        let p = PreciseGrid::new(24);
        let a = l_alpha_matrix(3.0, &p);
        let m = 25;
        let v: Vec<CDd> = (0..2 * m).map(|i| CDd::new(dd(if i < m { 1.0 } else { 0.0 }), dd(0.0))).collect();
        let r = matvec(&a, &v);
        assert!(r.iter().all(|c| c.re.abs().lossy_f64() < 1e-25));
    }
}
