use ::blowuplab::cli::CliError;
use ::blowuplab::evolve::{
    self, initial_data_map, lightcone_solver, EvolutionConfig, EvolutionTrace, LightconeConfig, Mode, ModePerturbation, Perturbation,
    RandomSmoothEven, ZeroPerturbation,
};
use ::blowuplab::linop::{assemble_and_eig, norm_dblk, CollocationGrid};
use ::blowuplab::modes::{self, StabilityVerdict};
use ::blowuplab::profiles::{self, Beta, ProfileParams};
use ::blowuplab::specfun;
use ::blowuplab::verify::{self, Level};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(blowuplab, NumericalError, PyRuntimeError);

fn to_py<E: Into<CliError>>(e: E) -> PyErr {
    match e.into() {
        CliError::Validation(m) => PyValueError::new_err(m),
        CliError::Numerical { name, message } => NumericalError::new_err(format!("{name}: {message}")),
    }
}

fn parse_beta(beta: &Bound<'_, PyAny>) -> PyResult<Beta> {
    if let Ok(s) = beta.extract::<String>() {
        return Beta::parse(&s).map_err(to_py);
    }
    Beta::from_f64(beta.extract::<f64>()?).map_err(to_py)
}

fn beta_value(beta: Beta) -> f64 {
    match beta {
        Beta::Zero => 0.0,
        Beta::Finite(b) => b,
        Beta::Infinite => f64::INFINITY,
    }
}

/// A member of the self-similar profile family.
#[pyclass(name = "Profile", frozen)]
struct PyProfile {
    inner: ProfileParams,
}

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (alpha, beta, kappa = 0.0, t_blowup = 1.0, x0 = 0.0))]
    fn new(alpha: f64, beta: &Bound<'_, PyAny>, kappa: f64, t_blowup: f64, x0: f64) -> PyResult<Self> {
        let inner = ProfileParams::new(alpha, parse_beta(beta)?, kappa, t_blowup, x0).map_err(to_py)?;
        Ok(PyProfile { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        beta_value(self.inner.beta)
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn t_blowup(&self) -> f64 {
        self.inner.t_blowup
    }

    fn tilde_u(&self, y: f64) -> PyResult<f64> {
        profiles::tilde_u_eval(&self.inner, y).map_err(to_py)
    }

    fn h(&self, y: f64) -> f64 {
        profiles::h_eval(self.inner.alpha, self.inner.beta, y)
    }

    fn physical_u(&self, t: f64, x: f64) -> PyResult<f64> {
        profiles::physical_u_eval(&self.inner, t, x).map_err(to_py)
    }

    #[pyo3(signature = (y, h = 1e-4))]
    fn riccati_residual(&self, y: f64, h: f64) -> PyResult<f64> {
        profiles::riccati_residual(&self.inner, y, h).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("Profile(alpha={}, beta={}, kappa={}, t_blowup={}, x0={})", p.alpha, beta_value(p.beta), p.kappa, p.t_blowup, p.x0)
    }
}

/// Gauss hypergeometric series `2F1(a, b; c; z)`.
#[pyfunction]
fn gauss_2f1(a: Complex64, b: Complex64, c: Complex64, z: Complex64) -> PyResult<Complex64> {
    specfun::gauss_2f1_default(a, b, c, z)
        .map(|s| s.value)
        .map_err(|e| NumericalError::new_err(e.to_string()))
}

fn verdict_dict<'py>(py: Python<'py>, v: &StabilityVerdict) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("lambda", v.lambda)?;
    d.set_item("smooth", v.smooth)?;
    d.set_item("evidence", v.evidence.as_str())?;
    d.set_item("ratio_tail", v.ratio_tail)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (lam, alpha, n_max = modes::DEFAULT_N_MAX))]
fn mode_stability<'py>(py: Python<'py>, lam: Complex64, alpha: f64, n_max: u64) -> PyResult<Bound<'py, PyDict>> {
    let v = py.detach(|| modes::mode_stability_verdict(lam, alpha, n_max)).map_err(to_py)?;
    verdict_dict(py, &v)
}

#[pyfunction]
#[pyo3(signature = (alpha, re = (-0.9, 4.0), im = (-4.0, 4.0), grid = (40, 40), n_max = modes::DEFAULT_N_MAX))]
fn scan_modes<'py>(
    py: Python<'py>,
    alpha: f64,
    re: (f64, f64),
    im: (f64, f64),
    grid: (usize, usize),
    n_max: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = py.detach(|| modes::scan_halfplane(alpha, re, im, grid, n_max)).map_err(to_py)?;
    rows.iter().map(|v| verdict_dict(py, v)).collect()
}

/// Eigenvalues of the collocated linearized operator.
#[pyfunction]
#[pyo3(signature = (alpha, n = 64, k_norm = 2))]
fn spectrum<'py>(py: Python<'py>, alpha: f64, n: usize, k_norm: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| {
            let grid = CollocationGrid::new(n)?;
            assemble_and_eig(alpha, &grid, k_norm)
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("eigenvalues", r.eigenvalues.clone())?;
    d.set_item("residuals", r.residuals.clone())?;
    d.set_item("classes", r.classification.iter().map(|c| c.as_str()).collect::<Vec<_>>())?;
    d.set_item("tail_energy", r.tail_energy.clone())?;
    Ok(d)
}

fn trace_dict<'py>(py: Python<'py>, tr: &EvolutionTrace, cfg: &EvolutionConfig) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("s", tr.times.clone())?;
    d.set_item("norm_k", tr.norm_k.clone())?;
    d.set_item("proj_f0", tr.proj_f0.clone())?;
    d.set_item("proj_f1", tr.proj_f1.clone())?;
    d.set_item("proj_g0", tr.proj_g0.clone())?;
    if let Some(f) = tr.fitted {
        d.set_item("alpha_star", f.alpha_star)?;
        d.set_item("kappa_star", f.kappa_star)?;
        d.set_item("t_star", f.t_star)?;
        d.set_item("distance", f.distance(&cfg.base()))?;
    }
    Ok(d)
}

fn evolution_config(alpha: f64, s_max: f64, grid_n: usize) -> PyResult<EvolutionConfig> {
    let cfg = EvolutionConfig { s_max, grid_n, dt: evolve::default_dt(grid_n), ..EvolutionConfig::with_alpha(alpha) };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

fn perturbation(kind: &str, amp: f64, seed: u64, cfg: &EvolutionConfig) -> PyResult<Box<dyn Perturbation + Send + Sync>> {
    let mode = match kind {
        "f0" => Mode::F0,
        "f1" => Mode::F1,
        "g0" => Mode::G0,
        "random" => {
            let grid = cfg.grid().map_err(to_py)?;
            let raw = RandomSmoothEven::new(seed, cfg.t0);
            let q = initial_data_map(cfg, cfg.alpha0, cfg.kappa0, cfg.t0, &raw).map_err(to_py)?;
            let norm = norm_dblk(&grid, &q, cfg.k_norm).map_err(to_py)?;
            return Ok(Box::new(raw.scaled(amp / norm)));
        }
        other => return Err(PyValueError::new_err(format!("unknown perturbation {other:?}, expected f0, f1, g0 or random"))),
    };
    Ok(Box::new(ModePerturbation::new(mode, amp, cfg)))
}

/// Linearized flow from `amp` times a symmetry mode or normalized random data.
#[pyfunction]
#[pyo3(signature = (alpha = 3.0, mode = "f1", amp = 1.0, s_max = 5.0, grid_n = 32, seed = 0))]
fn evolve_linear<'py>(
    py: Python<'py>,
    alpha: f64,
    mode: &str,
    amp: f64,
    s_max: f64,
    grid_n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = evolution_config(alpha, s_max, grid_n)?;
    let p = perturbation(mode, amp, seed, &cfg)?;
    let tr = py
        .detach(|| {
            let grid = cfg.grid()?;
            let q0 = initial_data_map(&cfg, cfg.alpha0, cfg.kappa0, cfg.t0, p.as_ref())?;
            evolve::evolve_linear(cfg.alpha0, &grid, &q0, &cfg)
        })
        .map_err(to_py)?;
    trace_dict(py, &tr, &cfg)
}

/// Full nonlinear flow around the profile, with the fitted modulation parameters.
#[pyfunction]
#[pyo3(signature = (alpha = 3.0, perturbation_kind = "random", eps = 1e-4, s_max = 5.0, grid_n = 32, seed = 0))]
fn evolve_nonlinear<'py>(
    py: Python<'py>,
    alpha: f64,
    perturbation_kind: &str,
    eps: f64,
    s_max: f64,
    grid_n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = evolution_config(alpha, s_max, grid_n)?;
    let p: Box<dyn Perturbation + Send + Sync> = if eps == 0.0 { Box::new(ZeroPerturbation) } else { perturbation(perturbation_kind, eps, seed, &cfg)? };
    let tr = py.detach(|| evolve::evolve_nonlinear(&cfg, p.as_ref())).map_err(to_py)?;
    let d = trace_dict(py, &tr, &cfg)?;
    d.set_item("decay_slope", tr.decay_slope(s_max.min(2.0) / 2.0, s_max))?;
    Ok(d)
}

/// Characteristic solver in physical variables; returns the blow-up history and fit.
#[pyfunction]
#[pyo3(signature = (profile, cells = 2048, s_max = None, eps = 0.0, seed = 0))]
fn lightcone<'py>(
    py: Python<'py>,
    profile: &PyProfile,
    cells: usize,
    s_max: Option<f64>,
    eps: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let d = LightconeConfig::default();
    let cfg = LightconeConfig { cells, s_max: s_max.unwrap_or(d.s_max), record_every: usize::MAX, ..d };
    let p = profile.inner;
    let pert = RandomSmoothEven::new(seed, p.t_blowup).scaled(eps);
    let run = py.detach(|| lightcone_solver(&p, &pert, &cfg)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t", run.history.iter().map(|h| h.0).collect::<Vec<_>>())?;
    out.set_item("max_u_t", run.history.iter().map(|h| h.1).collect::<Vec<_>>())?;
    out.set_item("u_t_center", run.history.iter().map(|h| h.2).collect::<Vec<_>>())?;
    if let Some(st) = run.states.last() {
        out.set_item("final_t", st.t)?;
        out.set_item("x", st.x_nodes.clone())?;
        out.set_item("u", st.u.clone())?;
    }
    if let Some(b) = run.blowup {
        out.set_item("t_star", b.t_star)?;
        out.set_item("alpha_star", b.alpha_star)?;
        out.set_item("t_star_center", b.t_star_center)?;
    }
    Ok(out)
}

/// Runs the self-check suite; one dict per check.
#[pyfunction]
#[pyo3(signature = (level = "fast"))]
fn verify_suite<'py>(py: Python<'py>, level: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let level = match level {
        "fast" => Level::Fast,
        "full" => Level::Full,
        other => return Err(PyValueError::new_err(format!("unknown level {other:?}, expected fast or full"))),
    };
    let results = py.detach(|| verify::verify_suite(level));
    results
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("name", r.name)?;
            d.set_item("passed", r.passed)?;
            d.set_item("detail", &r.detail)?;
            d.set_item("seconds", r.seconds)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "blowuplab")]
fn blowuplab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyProfile>()?;
    m.add_function(wrap_pyfunction!(gauss_2f1, m)?)?;
    m.add_function(wrap_pyfunction!(mode_stability, m)?)?;
    m.add_function(wrap_pyfunction!(scan_modes, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_linear, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_nonlinear, m)?)?;
    m.add_function(wrap_pyfunction!(lightcone, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    Ok(())
}
