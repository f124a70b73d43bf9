//! Dense real nonsymmetric eigensolver: balancing, Householder reduction to
//! Hessenberg form, Francis double-shift QR; eigenvectors by inverse iteration.
//!
//! The reduction and QR steps are generic over the working precision so that
//! the spectrum can be computed in double-double arithmetic.

use nalgebra::DMatrix;
use super::dd::Dd;
use num_complex::{Complex, Complex64};
use num_traits::Num;
use std::ops::Neg;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigError {
    #[error("QR iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("inverse iteration failed for eigenvalue {0}")]
    InverseIteration(Complex64),
}

/// Working precision of the eigensolver.
pub trait Real: Num + Neg<Output = Self> + Copy + PartialOrd + std::fmt::Debug + Send + Sync + 'static {
    fn cst(x: f64) -> Self;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn is_finite(self) -> bool;
    /// Unit roundoff.
    fn unit_roundoff() -> Self;
    fn lossy_f64(self) -> f64;
    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn cst(x: f64) -> Self {
        x
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn unit_roundoff() -> Self {
        f64::EPSILON
    }
    fn lossy_f64(self) -> f64 {
        self
    }
}

impl Real for Dd {
    fn cst(x: f64) -> Self {
        Dd::from_f64(x)
    }
    fn abs(self) -> Self {
        Dd::abs(self)
    }
    fn sqrt(self) -> Self {
        Dd::sqrt(self)
    }
    fn is_finite(self) -> bool {
        Dd::is_finite(self)
    }
    fn unit_roundoff() -> Self {
        Dd::from_f64(2f64.powi(-104))
    }
    fn lossy_f64(self) -> f64 {
        self.to_f64()
    }
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<Complex<T>>, EigError> {
    let (r, c) = a.shape();
    if r != c {
        return Err(EigError::NotSquare(r, c));
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Parlett-Reinsch balancing with radix 2; returns the diagonal scaling `d`
/// such that the balanced matrix is `D⁻¹ A D`.
pub fn balance<T: Real>(a: &mut DMatrix<T>) -> Vec<T> {
    let radix = T::cst(2.0);
    let n = a.nrows();
    let mut d = vec![T::one(); n];
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut c, mut r) = (T::zero(), T::zero());
            for j in 0..n {
                if j != i {
                    c = c + a[(j, i)].abs();
                    r = r + a[(i, j)].abs();
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f = f * radix;
                c = c * radix * radix;
            }
            g = r * radix;
            while c > g {
                f = f / radix;
                c = c / (radix * radix);
            }
            if (c + r) / f < T::cst(0.95) * s {
                done = false;
                d[i] = d[i] * f;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)] / f;
                    a[(j, i)] = a[(j, i)] * f;
                }
            }
        }
    }
    d
}

/// In-place orthogonal similarity reduction to upper Hessenberg form.
pub fn hessenberg<T: Real>(h: &mut DMatrix<T>) {
    reduce(h, None);
}

/// Hessenberg reduction returning `Q` with `A = Q H Qᵀ`.
pub fn hessenberg_with_q<T: Real>(h: &mut DMatrix<T>) -> DMatrix<T> {
    let n = h.nrows();
    let mut q = DMatrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() });
    reduce(h, Some(&mut q));
    q
}

fn reduce<T: Real>(h: &mut DMatrix<T>, mut q: Option<&mut DMatrix<T>>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![T::zero(); n];
    for m in 1..high {
        let scale = (m..=high).fold(T::zero(), |acc, i| acc + h[(i, m - 1)].abs());
        if scale == T::zero() {
            continue;
        }
        let mut hh = T::zero();
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh = hh + ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > T::zero() {
            g = -g;
        }
        hh = hh - ort[m] * g;
        ort[m] = ort[m] - g;
        // P = I - ort ortᵀ / hh
        for j in m..n {
            let mut f = T::zero();
            for i in (m..=high).rev() {
                f = f + ort[i] * h[(i, j)];
            }
            f = f / hh;
            for i in m..=high {
                h[(i, j)] = h[(i, j)] - f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = T::zero();
            for j in (m..=high).rev() {
                f = f + ort[j] * h[(i, j)];
            }
            f = f / hh;
            for j in m..=high {
                h[(i, j)] = h[(i, j)] - f * ort[j];
            }
        }
        if let Some(q) = q.as_deref_mut() {
            for i in 0..n {
                let mut f = T::zero();
                for j in m..=high {
                    f = f + q[(i, j)] * ort[j];
                }
                f = f / hh;
                for j in m..=high {
                    q[(i, j)] = q[(i, j)] - f * ort[j];
                }
            }
        }
        h[(m, m - 1)] = scale * g;
        for i in (m + 1)..=high {
            h[(i, m - 1)] = T::zero();
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed on exit).
///
/// The total number of iterations is capped at `30 n`.
pub fn hqr<T: Real>(h: &mut DMatrix<T>) -> Result<Vec<Complex<T>>, EigError> {
    let n = h.nrows();
    let eps = T::unit_roundoff();
    let zero = T::zero();
    let half = T::cst(0.5);
    let budget = 30 * n.max(1);
    // 1-based working copy keeps the index arithmetic of the classic algorithm
    let mut a = vec![vec![zero; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let mut wr = vec![zero; n + 1];
    let mut wi = vec![zero; n + 1];
    let mut anorm = zero;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm = anorm + a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = zero;
    let mut total = 0usize;
    let (mut p, mut q, mut r, mut s, mut w, mut x, mut y, mut z);
    while nn >= 1 {
        let mut its = 0usize;
        loop {
            let mut l = nn;
            while l >= 2 {
                s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == zero {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= eps * s {
                    a[l][l - 1] = zero;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = zero;
                nn -= 1;
                break;
            }
            y = a[nn - 1][nn - 1];
            w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                p = half * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x = x + t;
                if q >= zero {
                    z = if p >= zero { p + z } else { p - z };
                    wr[nn - 1] = x + z;
                    wr[nn] = wr[nn - 1];
                    if z != zero {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = zero;
                    wi[nn] = zero;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn = nn.saturating_sub(2);
                break;
            }
            if total >= budget {
                return Err(EigError::NoConvergence(total));
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t = t + x;
                for i in 1..=nn {
                    a[i][i] = a[i][i] - x;
                }
                s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = T::cst(0.75) * s;
                y = x;
                w = T::cst(-0.4375) * s * s;
            }
            its += 1;
            total += 1;
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s;
                r = a[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p = p / s;
                q = q / s;
                r = r / s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = zero;
                if i != m + 2 {
                    a[i][i - 3] = zero;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = zero;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != zero {
                        p = p / x;
                        q = q / x;
                        r = r / x;
                    }
                }
                let norm = (p * p + q * q + r * r).sqrt();
                s = if p >= zero { norm } else { -norm };
                if s != zero {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p = p + s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q = q / p;
                    r = r / p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p = p + r * a[k + 2][j];
                            a[k + 2][j] = a[k + 2][j] - p * z;
                        }
                        a[k + 1][j] = a[k + 1][j] - p * y;
                        a[k][j] = a[k][j] - p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p = p + z * a[i][k + 2];
                            a[i][k + 2] = a[i][k + 2] - p * r;
                        }
                        a[i][k + 1] = a[i][k + 1] - p * q;
                        a[i][k] = a[i][k] - p;
                    }
                }
                k += 1;
            }
        }
    }
    Ok((1..=n).map(|i| Complex::new(wr[i], wi[i])).collect())
}

/// LU factorization of `H - λI` for upper Hessenberg `H`, with adjacent-row pivoting.
pub struct HessenbergLu<T: Real> {
    u: Vec<Vec<Complex<T>>>,
    mult: Vec<Complex<T>>,
    swap: Vec<bool>,
}

impl<T: Real> HessenbergLu<T> {
    /// Zero pivots are replaced by `floor`, which keeps the factorization usable
    /// for inverse iteration at an exact eigenvalue.
    pub fn new(h: &DMatrix<T>, lambda: Complex<T>, floor: T) -> Self {
        let n = h.nrows();
        let mut u: Vec<Vec<Complex<T>>> = (0..n)
            .map(|i| (0..n).map(|j| Complex::new(h[(i, j)], T::zero()) - if i == j { lambda } else { Complex::new(T::zero(), T::zero()) }).collect())
            .collect();
        let mut mult = vec![Complex::new(T::zero(), T::zero()); n];
        let mut swap = vec![false; n];
        for k in 0..n.saturating_sub(1) {
            if u[k + 1][k].norm_sqr() > u[k][k].norm_sqr() {
                u.swap(k, k + 1);
                swap[k] = true;
            }
            if u[k][k].norm_sqr() == T::zero() {
                u[k][k] = Complex::new(floor, T::zero());
            }
            let m = u[k + 1][k] / u[k][k];
            mult[k] = m;
            for j in k..n {
                let v = u[k][j];
                u[k + 1][j] = u[k + 1][j] - m * v;
            }
        }
        if n > 0 && u[n - 1][n - 1].norm_sqr() == T::zero() {
            u[n - 1][n - 1] = Complex::new(floor, T::zero());
        }
        HessenbergLu { u, mult, swap }
    }

    pub fn solve(&self, b: &mut [Complex<T>]) {
        let n = b.len();
        for k in 0..n.saturating_sub(1) {
            if self.swap[k] {
                b.swap(k, k + 1);
            }
            let v = b[k];
            b[k + 1] = b[k + 1] - self.mult[k] * v;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in (i + 1)..n {
                acc = acc - self.u[i][j] * b[j];
            }
            b[i] = acc / self.u[i][i];
        }
    }
}

/// Eigenvectors by inverse iteration on the Hessenberg form: for each `λ`,
/// solves `(H - λ)x = b` `sweeps` times and maps back through `Q` and the
/// balancing scale `d`. Vectors are normalized with a real largest entry.
pub struct Decomposition<T: Real> {
    pub d: Vec<T>,
    pub q: DMatrix<T>,
    pub h: DMatrix<T>,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> Decomposition<T> {
    pub fn new(a: &DMatrix<T>) -> Result<Self, EigError> {
        let (r, c) = a.shape();
        if r != c {
            return Err(EigError::NotSquare(r, c));
        }
        let mut h = a.clone();
        let d = balance(&mut h);
        let q = hessenberg_with_q(&mut h);
        let mut work = h.clone();
        let values = hqr(&mut work)?;
        Ok(Decomposition { d, q, h, values })
    }

    pub fn eigenvector(&self, lambda: Complex<T>, sweeps: usize) -> Result<Vec<Complex<T>>, EigError> {
        let n = self.h.nrows();
        let scale = self.h.iter().fold(T::zero(), |m, v| m.max(v.abs())).max(T::one());
        let lu = HessenbergLu::new(&self.h, lambda, scale * T::unit_roundoff());
        let zero = Complex::new(T::zero(), T::zero());
        let mut x: Vec<Complex<T>> = (0..n).map(|i| Complex::new(T::one() + T::cst(0.1 * (i as f64 * 0.7).sin()), T::zero())).collect();
        let fail = || EigError::InverseIteration(Complex64::new(lambda.re.lossy_f64(), lambda.im.lossy_f64()));
        for _ in 0..sweeps.max(1) {
            lu.solve(&mut x);
            let norm = x.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr()).sqrt();
            if !norm.is_finite() || norm == T::zero() {
                return Err(fail());
            }
            for c in x.iter_mut() {
                *c = *c / norm;
            }
        }
        let mut v = vec![zero; n];
        for i in 0..n {
            let mut acc = zero;
            for j in 0..n {
                acc = acc + x[j] * self.q[(i, j)];
            }
            v[i] = acc * self.d[i];
        }
        let (imax, big) = v.iter().enumerate().fold((0, T::zero()), |acc, (i, c)| if c.norm_sqr() > acc.1 { (i, c.norm_sqr()) } else { acc });
        if big == T::zero() {
            return Err(fail());
        }
        let phase = v[imax] / big.sqrt();
        let norm = v.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr()).sqrt();
        Ok(v.iter().map(|c| c / phase / norm).collect())
    }
}

/// Eigenvector of a real matrix for the (approximate) eigenvalue `λ` in double precision.
pub fn inverse_iteration(a: &DMatrix<f64>, lambda: Complex64, sweeps: usize) -> Result<Vec<Complex64>, EigError> {
    Decomposition::new(a)?.eigenvector(lambda, sweeps)
}
