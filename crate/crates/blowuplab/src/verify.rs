//! Self-check suite run by `blowuplab verify`.

use crate::evolve::selfsim::{evolve_linear_state, NonlinearityFn};
use crate::evolve::{
    evolve_nonlinear_with, initial_data_map, lightcone_solver, nonlinearity, EvolutionConfig, LightconeConfig, RandomSmoothEven,
    ZeroPerturbation,
};
use crate::linop::obstruction::{g_taylor_coefficients, log_obstruction, LOG_COEFFICIENT};
use crate::linop::{
    assemble_and_eig, free_dissipativity_check, jordan_block_check, norm_dblk, norm_k, sample_f0, sample_f1, sample_g0,
    CollocationGrid, EigClass, GridFunctionPair,
};
use crate::modes::{mode_stability_verdict, scan_halfplane, Evidence};
use crate::profiles::{find_stationary_singularity, p_c_eval, physical_u_eval, riccati_residual, tilde_u_eval, Beta, ProfileParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_pcg::Lcg64Xsh32;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Fast,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Outcome = Result<(bool, String), String>;

struct Check {
    name: &'static str,
    full_only: bool,
    run: fn(NonlinearityFn) -> Outcome,
}

const CHECKS: &[Check] = &[
    Check { name: "nonlinearity homogeneity and sign", full_only: false, run: nonlinearity_homogeneity },
    Check { name: "profile exactness", full_only: false, run: profile_exactness },
    Check { name: "stationary-point witness", full_only: false, run: stationary_witness },
    Check { name: "mode stability scan", full_only: false, run: mode_scan },
    Check { name: "discrete spectrum", full_only: false, run: discrete_spectrum },
    Check { name: "free dissipativity", full_only: false, run: free_dissipativity },
    Check { name: "linear mode laws", full_only: false, run: linear_mode_laws },
    Check { name: "nonlinear decay rate", full_only: true, run: nonlinear_decay },
    Check { name: "lightcone exact profile", full_only: false, run: lightcone_exact },
    Check { name: "log obstruction", full_only: false, run: obstruction },
    Check { name: "initial-data expansion", full_only: false, run: data_expansion },
];

/// Names of the checks run at `level`, in order.
pub fn check_names(level: Level) -> Vec<&'static str> {
    CHECKS.iter().filter(|c| level == Level::Full || !c.full_only).map(|c| c.name).collect()
}

pub fn verify_suite(level: Level) -> Vec<CheckResult> {
    verify_suite_with(level, nonlinearity)
}

/// Runs the suite with a caller-supplied quadratic term in place of `N(q)`.
pub fn verify_suite_with(level: Level, n_fn: NonlinearityFn) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .filter(|c| level == Level::Full || !c.full_only)
        .map(|c| {
            let start = Instant::now();
            let (passed, detail) = match (c.run)(n_fn) {
                Ok(r) => r,
                Err(e) => (false, e),
            };
            CheckResult { name: c.name, passed, detail, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}

/// Fixed-width table, one row per check.
pub fn format_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status}  {:<width$}  {:>7.2}s  {}\n", r.name, r.seconds, r.detail));
    }
    out
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Degree-8 Chebyshev pair with decaying random coefficients.
fn random_pair(grid: &CollocationGrid, rng: &mut Lcg64Xsh32) -> GridFunctionPair<f64> {
    let c: Vec<f64> = (0..16).map(|j| rng.random_range(-1.0..1.0) / (1.0 + (j % 8) as f64).powi(2)).collect();
    let series = |c: &[f64], y: f64| c.iter().enumerate().map(|(k, ck)| ck * (k as f64 * y.acos()).cos()).sum::<f64>();
    GridFunctionPair::from_fns(grid, |y| series(&c[..8], y), |y| series(&c[8..], y))
}

fn nonlinearity_homogeneity(n_fn: NonlinearityFn) -> Outcome {
    let grid = CollocationGrid::new(32).map_err(err)?;
    let line = GridFunctionPair::from_fns(&grid, |y| y, |_| 0.0);
    let n_line = n_fn(&grid, &line).map_err(err)?;
    let sign_err = n_line.q1.iter().chain(n_line.q2.iter().map(|v| v - 1.0).collect::<Vec<_>>().iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = Lcg64Xsh32::seed_from_u64(0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = random_pair(&grid, &mut rng);
        let base = n_fn(&grid, &q).map_err(err)?;
        for sigma in [1.0, 0.5, 0.25] {
            let scaled = n_fn(&grid, &q.scaled(sigma)).map_err(err)?;
            let diff = scaled.combine(1.0, &base, -sigma * sigma).max_abs();
            worst = worst.max(diff / (1.0 + base.max_abs()));
        }
    }
    Ok((worst < 1e-13 && sign_err < 1e-12, format!("homogeneity {worst:.1e}, N(y,0)-(0,1) {sign_err:.1e}")))
}

fn profile_exactness(_: NonlinearityFn) -> Outcome {
    let mut worst = 0.0f64;
    let mut cases: Vec<(f64, Beta)> = [1.0, 3.0, 8.0].iter().flat_map(|&a| [(a, Beta::Zero), (a, Beta::Infinite)]).collect();
    cases.push((3.0, Beta::Finite(1.0 / 12.0)));
    for (alpha, beta) in cases {
        let p = ProfileParams::unit(alpha, beta).map_err(err)?;
        for i in 0..50 {
            let y = -0.98 + 1.96 * i as f64 / 49.0;
            worst = worst.max(riccati_residual(&p, y, 1e-4).map_err(err)?);
        }
    }
    let p = ProfileParams::unit(3.0, Beta::Finite(1.0 / 12.0)).map_err(err)?;
    let u0 = tilde_u_eval(&p, 0.0).map_err(err)?;
    let mut quad = 0.0f64;
    for i in 0..=20 {
        let y = -0.95 + 1.9 * i as f64 / 20.0;
        quad = quad.max((tilde_u_eval(&p, y).map_err(err)? - u0 - 1.5 * y * y).abs());
    }
    Ok((worst < 1e-7 && quad < 1e-8, format!("max Riccati residual {worst:.1e}, |U - 1.5y²| {quad:.1e}")))
}

fn stationary_witness(_: NonlinearityFn) -> Outcome {
    let mut worst = 0.0f64;
    let mut inside = true;
    let mut ends = true;
    for c in [-10.0, -1.0, 0.0, 1.0, 10.0] {
        let r = find_stationary_singularity(c);
        worst = worst.max(r.residual);
        inside &= r.y.abs() < 1.0;
        ends &= p_c_eval(c, -1.0) == -0.5 && p_c_eval(c, 1.0) == 0.5;
    }
    Ok((worst < 1e-12 && inside && ends, format!("max |p_c(y0)| {worst:.1e}, endpoints exact {ends}")))
}

fn mode_scan(_: NonlinearityFn) -> Outcome {
    let mut smooth = 0;
    let mut tail = 0.0f64;
    for alpha in [3.0, 8.0] {
        let v = scan_halfplane(alpha, (-0.9, 4.0), (-4.0, 4.0), (40, 40), 2000).map_err(err)?;
        for r in v.iter().filter(|r| (r.lambda - 0.0).norm() > 1e-8 && (r.lambda - 1.0).norm() > 1e-8) {
            smooth += r.smooth as usize;
            tail = tail.max(r.ratio_tail);
        }
        for l in [0.0, 1.0] {
            let v = mode_stability_verdict(Complex64::new(l, 0.0), alpha, 2000).map_err(err)?;
            if !(v.smooth && v.evidence == Evidence::SeriesTerminates) {
                return Ok((false, format!("lambda = {l} not snapped at alpha = {alpha}")));
            }
        }
    }
    Ok((smooth == 0 && tail < 1e-2, format!("smooth points {smooth}, max ratio tail {tail:.1e}")))
}

fn discrete_spectrum(_: NonlinearityFn) -> Outcome {
    let grid = CollocationGrid::new(64).map_err(err)?;
    let mut detail = Vec::new();
    let mut ok = true;
    for alpha in [1.0, 3.0, 8.0] {
        let r = assemble_and_eig(alpha, &grid, 2).map_err(err)?;
        let found = r.unstable_resolved();
        let zeros = found.iter().filter(|(_, c)| *c == EigClass::ModeZero).count();
        let ones = found.iter().filter(|(_, c)| *c == EigClass::ModeOne).count();
        let res = r
            .eigenvalues
            .iter()
            .zip(&r.residuals)
            .zip(&r.classification)
            .filter(|((l, _), c)| l.re > -0.9 && **c != EigClass::Unresolved)
            .fold(0.0f64, |m, ((_, res), _)| m.max(*res));
        let jordan = jordan_block_check(alpha, &grid).map_err(err)?;
        ok &= zeros == 2 && ones == 1 && found.len() == 3 && res < 1e-6 && jordan < 1e-7;
        detail.push(format!("a={alpha}: {{0 x{zeros}, 1 x{ones}}} of {} res {res:.0e} jordan {jordan:.0e}", found.len()));
    }
    Ok((ok, detail.join("; ")))
}

fn free_dissipativity(_: NonlinearityFn) -> Outcome {
    let grid = CollocationGrid::new(32).map_err(err)?;
    let mut rng = Lcg64Xsh32::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let q = random_pair(&grid, &mut rng);
        for k in 0..=2 {
            let q = q.scaled(1.0 / norm_k(&grid, &q, k).map_err(err)?);
            worst = worst.max(free_dissipativity_check(&grid, &q, k).map_err(err)?);
        }
    }
    Ok((worst <= 1e-8, format!("max Re<Lq,q>_k + |q|²/2 = {worst:.2e}")))
}

fn linear_mode_laws(_: NonlinearityFn) -> Outcome {
    let cfg = EvolutionConfig { s_max: 2.0, grid_n: 48, dt: crate::evolve::default_dt(48), ..Default::default() };
    let grid = cfg.grid().map_err(err)?;
    let alpha = cfg.alpha0;
    let (f0, f1, g0) = (sample_f0(&grid), sample_f1(&grid, alpha), sample_g0(&grid, alpha));
    let k = cfg.k_norm;
    let rel = |q: &GridFunctionPair<f64>, exact: &GridFunctionPair<f64>| -> Result<f64, String> {
        Ok(norm_dblk(&grid, &q.combine(1.0, exact, -1.0), k).map_err(err)? / norm_dblk(&grid, exact, k).map_err(err)?)
    };
    let mut worst = 0.0f64;
    for s_end in [0.5, 1.0, 2.0] {
        let c = EvolutionConfig { s_max: s_end, ..cfg };
        let (_, q) = evolve_linear_state(alpha, &grid, &f1, &c).map_err(err)?;
        worst = worst.max(rel(&q, &f1.scaled(s_end.exp()))?);
        let (_, q) = evolve_linear_state(alpha, &grid, &g0, &c).map_err(err)?;
        worst = worst.max(rel(&q, &g0.combine(1.0, &f0, s_end))?);
    }
    Ok((worst < 1e-5, format!("max relative error {worst:.1e}")))
}

/// Seeds of the decay-rate regression.
pub const DECAY_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Random data with working norm `eps` at the base frame.
pub fn normalized_random(cfg: &EvolutionConfig, seed: u64, eps: f64) -> Result<RandomSmoothEven, String> {
    let grid = cfg.grid().map_err(err)?;
    let raw = RandomSmoothEven::new(seed, cfg.t0);
    let q = initial_data_map(cfg, cfg.alpha0, cfg.kappa0, cfg.t0, &raw).map_err(err)?;
    Ok(raw.scaled(eps / norm_dblk(&grid, &q, cfg.k_norm).map_err(err)?))
}

fn nonlinear_decay(n_fn: NonlinearityFn) -> Outcome {
    let cfg = EvolutionConfig::default();
    let eps = 1e-4;
    let mut ok = true;
    let mut detail = Vec::new();
    for seed in DECAY_SEEDS {
        let p = normalized_random(&cfg, seed, eps)?;
        let (tr, _) = evolve_nonlinear_with(&cfg, &p, n_fn).map_err(err)?;
        let slope = tr.decay_slope(1.0, 5.0).ok_or("empty trace")?;
        let dist = tr.fitted.ok_or("no fit")?.distance(&cfg.base());
        ok &= slope <= -(1.0 - cfg.delta()) + 0.1 && dist <= 10.0 * eps;
        detail.push(format!("{seed}:{slope:.3}/{:.2}e", dist / eps));
    }
    Ok((ok, format!("seed:slope/distance {}", detail.join(" "))))
}

fn lightcone_exact(_: NonlinearityFn) -> Outcome {
    let p = ProfileParams::unit(3.0, Beta::Infinite).map_err(err)?;
    let cfg = LightconeConfig { cells: 2048, s_max: 100f64.ln(), record_every: 8, ..Default::default() };
    let run = lightcone_solver(&p, &ZeroPerturbation, &cfg).map_err(err)?;
    let mut worst = 0.0f64;
    for st in &run.states {
        for (x, u) in st.x_nodes.iter().zip(&st.u) {
            worst = worst.max((u - physical_u_eval(&p, st.t, *x).map_err(err)?).abs());
        }
    }
    let t_star = run.blowup.ok_or("no blow-up fit")?.t_star;
    Ok((worst < 1e-4 && (0.99..=1.01).contains(&t_star), format!("max error {worst:.1e}, T* = {t_star:.6}")))
}

fn obstruction(_: NonlinearityFn) -> Outcome {
    let fit = log_obstruction().map_err(err)?;
    let c = g_taylor_coefficients(3, 0.5, 64);
    let exact = [-1.5, -11.0 / 4.0, 27.0 / 4.0];
    let taylor = c.iter().zip(exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let log_err = (fit.c_log - LOG_COEFFICIENT).abs();
    Ok((log_err < 0.05 && taylor < 1e-10, format!("log coefficient {:.4}, Taylor error {taylor:.1e}", fit.c_log)))
}

/// Observed orders of the first-order remainder of the data map in `α` and `T`.
pub fn data_expansion_orders(cfg: &EvolutionConfig) -> Result<[f64; 2], String> {
    let grid = cfg.grid().map_err(err)?;
    let a0 = cfg.alpha0;
    let (f0, f1, g0) = (sample_f0(&grid), sample_f1(&grid, a0), sample_g0(&grid, a0));
    let hs = [1e-2, 5e-3, 2.5e-3];
    let remainder = |h: f64, alpha_dir: bool| -> Result<f64, String> {
        let (alpha, t, linear) = if alpha_dir {
            (a0 + h, cfg.t0, g0.scaled(-h))
        } else {
            (a0, cfg.t0 * (1.0 + h), f1.combine(h, &f0, -a0 * h))
        };
        let q = initial_data_map(cfg, alpha, cfg.kappa0, t, &ZeroPerturbation).map_err(err)?;
        norm_dblk(&grid, &q.combine(1.0, &linear, -1.0), cfg.k_norm).map_err(err)
    };
    let mut orders = [f64::INFINITY; 2];
    for (i, dir) in [true, false].into_iter().enumerate() {
        let r: Vec<f64> = hs.iter().map(|&h| remainder(h, dir)).collect::<Result<_, _>>()?;
        orders[i] = r.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    }
    Ok(orders)
}

fn data_expansion(_: NonlinearityFn) -> Outcome {
    let cfg = EvolutionConfig::default();
    let [oa, ot] = data_expansion_orders(&cfg)?;
    let grid = cfg.grid().map_err(err)?;
    let q = initial_data_map(&cfg, cfg.alpha0, cfg.kappa0 + 1e-2, cfg.t0, &ZeroPerturbation).map_err(err)?;
    let rk = norm_dblk(&grid, &q.combine(1.0, &sample_f0(&grid), 1e-2), cfg.k_norm).map_err(err)?;
    Ok((oa >= 1.9 && ot >= 1.9 && rk < 1e-10, format!("orders alpha {oa:.3}, T {ot:.3}; kappa remainder {rk:.0e}")))
}
