use blowuplab::evolve::selfsim::{evolve_linear_state, evolve_nonlinear_with};
use blowuplab::evolve::*;
use blowuplab::linop::{norm_dblk, sample_f0, sample_f1, sample_g0, CollocationGrid, GridFunctionPair};
use blowuplab::profiles::{physical_u_eval, Beta, ProfileParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: usize = 2;

/// Chebyshev series pair, first half of `coeffs` for `q1`.
fn resolved_pair(grid: &CollocationGrid, coeffs: &[f64]) -> GridFunctionPair<f64> {
    let half = coeffs.len() / 2;
    let series = |c: &[f64], y: f64| c.iter().enumerate().map(|(k, ck)| ck * (k as f64 * y.acos()).cos()).sum::<f64>();
    GridFunctionPair::from_fns(grid, |y| series(&coeffs[..half], y), |y| series(&coeffs[half..], y))
}

/// Random pair of degree 8 with decaying coefficients, normalized in the working norm.
fn random_unit_pair(grid: &CollocationGrid, rng: &mut ChaCha8Rng) -> GridFunctionPair<f64> {
    let deg = 8;
    let c: Vec<f64> = (0..2 * deg).map(|j| rng.random_range(-1.0..1.0) / (1.0 + (j % deg) as f64).powi(2)).collect();
    let q = resolved_pair(grid, &c);
    q.scaled(1.0 / norm_dblk(grid, &q, K).unwrap())
}

fn lipschitz_constant(n: usize, seed: u64) -> f64 {
    let grid = CollocationGrid::new(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c: f64 = 0.0;
    for _ in 0..100 {
        let q = random_unit_pair(&grid, &mut rng);
        let r = random_unit_pair(&grid, &mut rng).scaled(rng.random_range(0.1..1.0));
        let diff = nonlinearity(&grid, &q).unwrap().combine(1.0, &nonlinearity(&grid, &r).unwrap(), -1.0);
        let lhs = norm_dblk(&grid, &diff, K).unwrap();
        let rhs = (norm_dblk(&grid, &q, K).unwrap() + norm_dblk(&grid, &r, K).unwrap()) * norm_dblk(&grid, &q.combine(1.0, &r, -1.0), K).unwrap();
        c = c.max(lhs / rhs);
    }
    c
}

#[test]
fn nonlinearity_homogeneity_on_random_pairs() {
    let grid = CollocationGrid::new(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let q = random_unit_pair(&grid, &mut rng);
        let base = norm_dblk(&grid, &nonlinearity(&grid, &q).unwrap(), K).unwrap();
        for sigma in [1.0, 0.5, 0.25] {
            let scaled = norm_dblk(&grid, &nonlinearity(&grid, &q.scaled(sigma)).unwrap(), K).unwrap();
            assert_eq!(scaled, sigma * sigma * base);
        }
    }
}

#[test]
fn nonlinearity_lipschitz_constant_is_stable_under_refinement() {
    let c32 = lipschitz_constant(32, 2);
    let c64 = lipschitz_constant(64, 2);
    eprintln!("empirical Lipschitz constant: N=32 {c32:.4}, N=64 {c64:.4}");
    assert!(c32.is_finite() && c64 > 0.0);
    assert!((c64 / c32 - 1.0).abs() < 0.05, "{c32} vs {c64}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nonlinearity_is_quadratic(c in prop::collection::vec(-1.0f64..1.0, 16), sigma in -4.0f64..4.0) {
        let grid = CollocationGrid::new(16).unwrap();
        let q = resolved_pair(&grid, &c);
        let n1 = nonlinearity(&grid, &q).unwrap();
        let n2 = nonlinearity(&grid, &q.scaled(sigma)).unwrap();
        let scale = n1.max_abs().max(1e-300);
        for (a, b) in n1.q2.iter().zip(&n2.q2) {
            prop_assert!((b - sigma * sigma * a).abs() <= 1e-12 * sigma * sigma * scale + 1e-300);
            prop_assert!(*b >= 0.0);
        }
        prop_assert!(n2.q1.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn rk4_error_drops_sixteenfold_when_dt_halves() {
    let base = EvolutionConfig { s_max: 0.5, ..EvolutionConfig::default() };
    let grid = base.grid().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q0 = random_unit_pair(&grid, &mut rng);
    let run = |dt: f64| evolve_linear_state(3.0, &grid, &q0, &EvolutionConfig { dt, ..base }).unwrap().1;
    let dt = base.dt;
    let reference = run(dt / 8.0);
    let err = |q: GridFunctionPair<f64>| q.combine(1.0, &reference, -1.0).max_abs();
    let ratio = err(run(dt)) / err(run(dt / 2.0));
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn mixed_mode_law() {
    let cfg = EvolutionConfig { s_max: 2.0, grid_n: 48, dt: default_dt(48), ..EvolutionConfig::default() };
    let grid = cfg.grid().unwrap();
    let (f0, f1, g0) = (sample_f0(&grid), sample_f1(&grid, 3.0), sample_g0(&grid, 3.0));
    let q0 = f1.combine(1.0, &g0, 1.0);
    let (_, q) = evolve_linear_state(3.0, &grid, &q0, &cfg).unwrap();
    let s = cfg.s_max;
    let expected = f1.scaled(s.exp()).combine(1.0, &g0.combine(1.0, &f0, s), 1.0);
    let err = norm_dblk(&grid, &q.combine(1.0, &expected, -1.0), K).unwrap();
    assert!(err < 1e-4 * norm_dblk(&grid, &expected, K).unwrap(), "{err}");
}

fn clenshaw(c: &[f64], y: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * y * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    y * b1 - b2 + c[0]
}

#[test]
fn self_similar_and_physical_frames_agree() {
    let s_end = 4f64.ln();
    let cfg = EvolutionConfig { s_max: s_end, ..EvolutionConfig::default() };
    let grid = cfg.grid().unwrap();
    let raw = RandomSmoothEven::new(5, cfg.t0);
    let q = initial_data_map(&cfg, 3.0, 0.0, 1.0, &raw).unwrap();
    let eps = 1e-4;
    let pert = raw.scaled(eps / norm_dblk(&grid, &q, cfg.k_norm).unwrap());
    let (_, q_end) = evolve_nonlinear_with(&cfg, &pert, nonlinearity).unwrap();
    let coeffs = grid.cheb_coefficients(&q_end.q1);

    let params = ProfileParams::unit(3.0, Beta::Infinite).unwrap();
    let lc = LightconeConfig { cells: 1024, s_max: s_end, record_every: usize::MAX, ..Default::default() };
    let run = lightcone_solver(&params, &pert, &lc).unwrap();
    let st = run.states.last().unwrap();
    let gap = 1.0 - st.t;
    assert!((gap - 0.25).abs() < 1e-12);
    let mut err: f64 = 0.0;
    for (x, u) in st.x_nodes.iter().zip(&st.u) {
        let physical = u - physical_u_eval(&params, st.t, *x).unwrap();
        err = err.max((physical - clenshaw(&coeffs, x / gap)).abs());
    }
    assert!(err < 1e-3 * eps, "{err:e}");
}

#[test]
fn nonlinear_evolution_is_reproducible() {
    let cfg = EvolutionConfig { s_max: 1.0, ..EvolutionConfig::default() };
    let p = RandomSmoothEven::new(9, cfg.t0).scaled(1e-5);
    let a = evolve_nonlinear(&cfg, &p).unwrap();
    let b = evolve_nonlinear(&cfg, &p).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}
