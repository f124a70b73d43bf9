//! Physical perturbations `(f, g) = (δu(0, x), δu_t(0, x))` as functions of `x - x₀`.

use super::EvolutionConfig;
use crate::linop::modes_explicit;
use rand::{Rng, SeedableRng};
use rand_pcg::Lcg64Xsh32;
use serde::{Deserialize, Serialize};

pub trait Perturbation: Sync {
    /// `(f(x), g(x))` at offset `x` from the blow-up point.
    fn eval(&self, x: f64) -> (f64, f64);
}

impl<F: Fn(f64) -> (f64, f64) + Sync> Perturbation for F {
    fn eval(&self, x: f64) -> (f64, f64) {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPerturbation;

impl Perturbation for ZeroPerturbation {
    fn eval(&self, _x: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    F0,
    F1,
    G0,
}

/// The physical data whose self-similar image at `T₀` is `amp` times a symmetry mode
/// of `L_{α₀}`: `f(x) = amp·m₁(x/T₀)`, `g(x) = amp·m₂(x/T₀)/T₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePerturbation {
    pub mode: Mode,
    pub amp: f64,
    pub alpha: f64,
    pub t0: f64,
}

impl ModePerturbation {
    pub fn new(mode: Mode, amp: f64, cfg: &EvolutionConfig) -> Self {
        ModePerturbation { mode, amp, alpha: cfg.alpha0, t0: cfg.t0 }
    }
}

impl Perturbation for ModePerturbation {
    fn eval(&self, x: f64) -> (f64, f64) {
        let y = x / self.t0;
        let (m1, m2) = match self.mode {
            Mode::F0 => modes_explicit::f0(y),
            Mode::F1 => modes_explicit::f1(self.alpha, y),
            Mode::G0 => modes_explicit::g0(self.alpha, y),
        };
        (self.amp * m1, self.amp * m2 / self.t0)
    }
}

/// Smooth even data `f = Σ a_j T_{2j}(x/L)`, `g = Σ b_j T_{2j}(x/L)` with
/// coefficients drawn uniformly from `[-1, 1]` by a seeded LCG and rescaled
/// by `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSmoothEven {
    pub seed: u64,
    pub length: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub scale: f64,
}

/// Number of even Chebyshev polynomials in a random perturbation.
pub const RANDOM_TERMS: usize = 4;

impl RandomSmoothEven {
    pub fn new(seed: u64, length: f64) -> Self {
        let mut rng = Lcg64Xsh32::seed_from_u64(seed);
        let mut draw = || (0..RANDOM_TERMS).map(|j| rng.random_range(-1.0..1.0) / (1.0 + j as f64)).collect::<Vec<f64>>();
        let a = draw();
        let b = draw();
        RandomSmoothEven { seed, length, a, b, scale: 1.0 }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

fn even_cheb(c: &[f64], x: f64) -> f64 {
    let (mut t_prev, mut t) = (1.0, x);
    let mut acc = 0.0;
    for (k, cj) in c.iter().enumerate() {
        if k > 0 {
            // two steps of T_{m+1} = 2x T_m - T_{m-1}
            for _ in 0..2 {
                let next = 2.0 * x * t - t_prev;
                t_prev = t;
                t = next;
            }
        }
        acc += cj * t_prev;
    }
    acc
}

impl Perturbation for RandomSmoothEven {
    fn eval(&self, x: f64) -> (f64, f64) {
        let u = x / self.length;
        (self.scale * even_cheb(&self.a, u), self.scale * even_cheb(&self.b, u))
    }
}
