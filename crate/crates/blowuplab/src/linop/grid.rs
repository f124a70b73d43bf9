//! Chebyshev-Gauss-Lobatto collocation on `[-1, 1]`.

use super::{LinopError, Scalar};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Nodes `y_j = cos(πj/N)`, `j = 0..=N` (decreasing, so `y_N = -1`), with the
/// first-derivative matrix and Clenshaw-Curtis weights.
#[derive(Debug, Clone)]
pub struct CollocationGrid {
    n: usize,
    nodes: Vec<f64>,
    diff: DMatrix<f64>,
    weights: Vec<f64>,
    to_cheb: DMatrix<f64>,
    // nodal values -> values on the 2N grid, where products of degree-N
    // interpolants integrate exactly
    upsample: DMatrix<f64>,
    fine_weights: Vec<f64>,
}

impl CollocationGrid {
    pub fn new(n: usize) -> Result<Self, LinopError> {
        if n < 2 {
            return Err(LinopError::InvalidGrid(n));
        }
        let nodes = cgl_nodes(n);
        let diff = cheb_diff(n);
        let weights = clenshaw_curtis(n);
        let to_cheb = cheb_transform(n);
        let m = 2 * n;
        let eval = DMatrix::from_fn(m + 1, n + 1, |i, k| (k as f64 * PI * i as f64 / m as f64).cos());
        let upsample = eval * &to_cheb;
        Ok(CollocationGrid { n, nodes, diff, weights, to_cheb, upsample, fine_weights: clenshaw_curtis(m) })
    }

    /// Polynomial degree `N`; the grid has `N + 1` nodes.
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn diff_matrix(&self) -> &DMatrix<f64> {
        &self.diff
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the node `y = -1`.
    pub fn left_index(&self) -> usize {
        self.n
    }

    /// Highest derivative order trusted on this grid.
    pub fn max_derivative(&self) -> usize {
        self.n / 2
    }

    pub fn check_order(&self, order: usize) -> Result<(), LinopError> {
        if order > self.max_derivative() {
            return Err(LinopError::UnderResolved { order, n: self.n });
        }
        Ok(())
    }

    pub fn sample<T: Scalar, F: Fn(f64) -> T>(&self, f: F) -> Vec<T> {
        self.nodes.iter().map(|&y| f(y)).collect()
    }

    /// `m`-th derivative of the interpolant, at the nodes.
    pub fn derivative<T: Scalar>(&self, v: &[T], m: usize) -> Vec<T> {
        let mut out = v.to_vec();
        for _ in 0..m {
            out = matvec(&self.diff, &out);
        }
        out
    }

    /// Chebyshev coefficients `a_k` with `v(y_j) = Σ a_k T_k(y_j)`.
    pub fn cheb_coefficients<T: Scalar>(&self, v: &[T]) -> Vec<T> {
        matvec(&self.to_cheb, v)
    }

    /// `∫ f conj(g)` of the degree-N interpolants, exact up to rounding.
    pub fn integrate_product<T: Scalar>(&self, f: &[T], g: &[T]) -> T {
        let fu = matvec(&self.upsample, f);
        let gu = matvec(&self.upsample, g);
        let mut acc = T::zero();
        for i in 0..fu.len() {
            acc += fu[i] * gu[i].conjugate() * T::from_real(self.fine_weights[i]);
        }
        acc
    }

    /// Clenshaw-Curtis integral of the nodal samples.
    pub fn integrate<T: Scalar>(&self, f: &[T]) -> T {
        let mut acc = T::zero();
        for (v, w) in f.iter().zip(&self.weights) {
            acc += *v * T::from_real(*w);
        }
        acc
    }
}

pub(crate) fn matvec<T: Scalar>(m: &DMatrix<f64>, v: &[T]) -> Vec<T> {
    let (r, c) = m.shape();
    debug_assert_eq!(c, v.len());
    let mut out = vec![T::zero(); r];
    for j in 0..c {
        let vj = v[j];
        for i in 0..r {
            out[i] += vj * T::from_real(m[(i, j)]);
        }
    }
    out
}

fn cgl_nodes(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            // sin form keeps the nodes symmetric to rounding
            (PI * (n as f64 - 2.0 * j as f64) / (2.0 * n as f64)).sin()
        })
        .collect()
}

fn cheb_diff(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    let c = |i: usize| {
        let base = if i == 0 || i == n { 2.0 } else { 1.0 };
        if i % 2 == 0 {
            base
        } else {
            -base
        }
    };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                // y_i - y_j written with sines to avoid cancellation
                let dx = -2.0
                    * (PI * (i + j) as f64 / (2.0 * nf)).sin()
                    * (PI * (i as f64 - j as f64) / (2.0 * nf)).sin();
                d[(i, j)] = c(i) / c(j) / dx;
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    d
}

/// Clenshaw-Curtis weights on the `N + 1` Chebyshev-Lobatto points.
pub fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    let mut v = vec![1.0; n.saturating_sub(1)];
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            for (idx, vi) in v.iter_mut().enumerate() {
                let th = PI * (idx + 1) as f64 / nf;
                *vi -= 2.0 * (2.0 * k as f64 * th).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        for (idx, vi) in v.iter_mut().enumerate() {
            let th = PI * (idx + 1) as f64 / nf;
            *vi -= (nf * th).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            for (idx, vi) in v.iter_mut().enumerate() {
                let th = PI * (idx + 1) as f64 / nf;
                *vi -= 2.0 * (2.0 * k as f64 * th).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
    }
    for (idx, vi) in v.iter().enumerate() {
        w[idx + 1] = 2.0 * vi / nf;
    }
    w
}

fn cheb_transform(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n + 1, n + 1, |k, j| {
        let hj = if j == 0 || j == n { 0.5 } else { 1.0 };
        let hk = if k == 0 || k == n { 0.5 } else { 1.0 };
        2.0 / nf * hj * hk * (PI * (j * k) as f64 / nf).cos()
    })
}
