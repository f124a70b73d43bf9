//! Discrete spectrum of the collocated `L_α`.

use super::eig::{Decomposition, EigError, Real};
use super::precise::{self, CDd, Dd, PreciseGrid};
use super::{sqrt1p, CollocationGrid, GridFunctionPair, LinopError};
use std::cmp::Ordering;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// Distance to 0 or 1 for the symmetry-mode classes.
pub const MODE_TOL: f64 = 1e-6;
/// Real part at or below which an eigenvalue counts as stable.
pub const STABLE_RE: f64 = -0.9;
/// Fraction of highest Chebyshev modes inspected by the resolution filter.
pub const TAIL_FRACTION: f64 = 0.25;
/// Relative tail energy below which an eigenvector counts as resolved.
pub const TAIL_TOL: f64 = 1e-6;
/// Inverse-iteration sweeps per eigenvector.
const SWEEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigClass {
    ModeZero,
    ModeOne,
    StableHalfplane,
    Unresolved,
    /// Resolved, with `Re λ > -0.9`, and not a symmetry mode.
    Unexpected,
}

impl EigClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EigClass::ModeZero => "mode_zero",
            EigClass::ModeOne => "mode_one",
            EigClass::StableHalfplane => "stable_halfplane",
            EigClass::Unresolved => "unresolved",
            EigClass::Unexpected => "unexpected",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub k_norm: usize,
    /// Sorted by decreasing real part.
    pub eigenvalues: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub classification: Vec<EigClass>,
    /// Relative Chebyshev tail energy of each eigenvector.
    pub tail_energy: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<GridFunctionPair<Complex64>>,
}

impl SpectralReport {
    /// Resolved eigenvalues with `Re λ > -0.9`.
    pub fn unstable_resolved(&self) -> Vec<(Complex64, EigClass)> {
        self.eigenvalues
            .iter()
            .zip(&self.classification)
            .filter(|(l, c)| l.re > STABLE_RE && **c != EigClass::Unresolved)
            .map(|(l, c)| (*l, *c))
            .collect()
    }

    pub fn count(&self, class: EigClass) -> usize {
        self.classification.iter().filter(|c| **c == class).count()
    }
}

/// Nodal matrix of `L_α` acting on stacked `[q₁; q₂]`.
pub fn assemble_matrix(alpha: f64, grid: &CollocationGrid) -> DMatrix<f64> {
    let m = grid.len();
    let d = grid.diff_matrix();
    let d2 = d * d;
    let y = grid.nodes();
    let s = sqrt1p(alpha);
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = -y[i] * d[(i, j)];
            a[(m + i, j)] = d2[(i, j)] - 2.0 * alpha / (s + y[i]) * d[(i, j)];
            a[(m + i, m + j)] = -y[i] * d[(i, j)];
        }
        a[(i, m + i)] += 1.0;
        a[(m + i, m + i)] -= 1.0;
    }
    a
}

/// Relative energy of the top `TAIL_FRACTION` Chebyshev coefficients of both components.
pub fn tail_energy(grid: &CollocationGrid, v: &GridFunctionPair<Complex64>) -> f64 {
    let n = grid.len();
    let start = ((1.0 - TAIL_FRACTION) * n as f64).ceil() as usize;
    let (mut total, mut tail) = (0.0, 0.0);
    for comp in [&v.q1, &v.q2] {
        let c = grid.cheb_coefficients(comp);
        for (k, ck) in c.iter().enumerate() {
            let e = ck.norm_sqr();
            total += e;
            if k >= start {
                tail += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

fn classify(lambda: Complex64, resolved: bool) -> EigClass {
    if !resolved {
        EigClass::Unresolved
    } else if lambda.norm() < MODE_TOL {
        EigClass::ModeZero
    } else if (lambda - 1.0).norm() < MODE_TOL {
        EigClass::ModeOne
    } else if lambda.re <= STABLE_RE {
        EigClass::StableHalfplane
    } else {
        EigClass::Unexpected
    }
}

/// Full discrete spectrum of `L_α` with residuals in the `⟨⟨·,·⟩⟩_k` norm.
///
/// The decomposition runs in double-double arithmetic (see [`super::precise`]).
pub fn assemble_and_eig(alpha: f64, grid: &CollocationGrid, k_norm: usize) -> Result<SpectralReport, LinopError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(LinopError::InvalidAlpha(alpha));
    }
    grid.check_order(k_norm + 1)?;
    let pg = PreciseGrid::new(grid.degree());
    let a = precise::l_alpha_matrix(alpha, &pg);
    let dec = Decomposition::new(&a)?;
    let mut values: Vec<CDd> = dec.values.clone();
    let key = |c: &CDd| (c.re.lossy_f64(), c.im.lossy_f64());
    values.sort_by(|x, y| {
        let (xr, xi) = key(x);
        let (yr, yi) = key(y);
        yr.partial_cmp(&xr).unwrap_or(Ordering::Equal).then(yi.partial_cmp(&xi).unwrap_or(Ordering::Equal))
    });
    let m = grid.len();
    let mut report = SpectralReport {
        alpha,
        n: grid.degree(),
        k_norm,
        eigenvalues: Vec::with_capacity(values.len()),
        residuals: Vec::with_capacity(values.len()),
        classification: Vec::with_capacity(values.len()),
        tail_energy: Vec::with_capacity(values.len()),
        eigenvectors: Vec::with_capacity(values.len()),
    };
    for &lambda in &values {
        let lambda64 = Complex64::new(lambda.re.lossy_f64(), lambda.im.lossy_f64());
        report.eigenvalues.push(lambda64);
        let v = match dec.eigenvector(lambda, SWEEPS) {
            Ok(v) => v,
            Err(EigError::InverseIteration(_)) => {
                report.residuals.push(f64::NAN);
                report.classification.push(EigClass::Unresolved);
                report.tail_energy.push(1.0);
                report.eigenvectors.push(GridFunctionPair::zeros(m));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let av = precise::matvec(&a, &v);
        let r: Vec<CDd> = av.iter().zip(&v).map(|(x, y)| x - lambda * y).collect();
        let res = precise::norm_dblk(&pg, grid, &r[..m], &r[m..], k_norm) / precise::norm_dblk(&pg, grid, &v[..m], &v[m..], k_norm);
        let pair = precise::to_pair(&v);
        let tail = tail_energy(grid, &pair);
        report.residuals.push(res);
        report.classification.push(classify(lambda64, tail < TAIL_TOL));
        report.tail_energy.push(tail);
        report.eigenvectors.push(pair);
    }
    Ok(report)
}

/// `max(‖L g₀ - f₀‖, ‖L² g₀‖)` in the discrete `⟨⟨·,·⟩⟩₀` norm, with the
/// operator applied in double-double.
pub fn jordan_block_check(alpha: f64, grid: &CollocationGrid) -> Result<f64, LinopError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(LinopError::InvalidAlpha(alpha));
    }
    let pg = PreciseGrid::new(grid.degree());
    let a = precise::l_alpha_matrix(alpha, &pg);
    let s = precise::sqrt1p(alpha);
    let c = Dd::from(alpha) / (Dd::from(2.0) * s);
    let zero = Dd::from(0.0);
    let y = pg.nodes();
    let g1 = y.iter().map(|&y| CDd::new(-(s + y).ln() - c / (s + y), zero));
    let g2 = y.iter().map(|&y| CDd::new(Dd::from(1.0) - y / (s + y) + c * y / ((s + y) * (s + y)), zero));
    let g0: Vec<CDd> = g1.chain(g2).collect();
    let lg = precise::matvec(&a, &g0);
    let llg = precise::matvec(&a, &lg);
    let m = grid.len();
    let mut e1 = lg;
    for v in e1.iter_mut().take(m) {
        v.re = v.re - Dd::from(1.0);
    }
    let n1 = precise::norm_dblk(&pg, grid, &e1[..m], &e1[m..], 0);
    let n2 = precise::norm_dblk(&pg, grid, &llg[..m], &llg[m..], 0);
    Ok(n1.max(n2))
}
