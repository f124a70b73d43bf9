//! Command-line frontend: argument and config resolution, dispatch, artifact output.

use crate::evolve::{
    evolve_linear, evolve_nonlinear, initial_data_map, lightcone_solver, EvolutionConfig, EvolutionTrace,
    EvolveError, LightconeConfig, Mode, ModePerturbation, Perturbation, RandomSmoothEven, ZeroPerturbation,
};
use crate::linop::{assemble_and_eig, norm_dblk, CollocationGrid, LinopError};
use crate::modes::{scan_halfplane, ModeError};
use crate::profiles::{profile_row, Beta, ProfileError, ProfileParams};
use crate::verify::{format_table, verify_suite, Level};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "BLOWUPLAB_OUT";
pub const DEFAULT_OUT: &str = "blowuplab-out";

#[derive(Debug, Parser)]
#[command(name = "blowuplab", version, about = "Self-similar blow-up of u_tt - u_xx = (u_x)^2: profiles, spectra, evolutions")]
pub struct Cli {
    /// Output directory (overridden by BLOWUPLAB_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file of defaults keyed by flag name; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a profile: y, tildeU, dtildeU, H.
    Profile(ProfileArgs),
    /// Mode-stability verdicts on a lattice of eigenvalue candidates.
    ScanModes(ScanArgs),
    /// Discrete spectrum of the linearized operator.
    Spectrum(SpectrumArgs),
    /// Linear evolution of a symmetry mode or random data.
    EvolveLinear(LinearArgs),
    /// Nonlinear evolution with modulation fitting.
    EvolveNonlinear(NonlinearArgs),
    /// Physical-space evolution on the backward lightcone.
    Lightcone(LightconeArgs),
    /// Run the self-check suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ProfileFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// `0`, `inf` or a positive number.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub params: ProfileFlags,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Real-part range `lo:hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub re: Option<String>,
    /// Imaginary-part range `lo:hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub im: Option<String>,
    /// Lattice size `NxM`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long = "n-max")]
    pub n_max: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "k-norm")]
    pub k_norm: Option<usize>,
    /// Also write eigenvectors of the resolved eigenvalues with Re > -0.9.
    #[arg(long)]
    pub eigenvectors: bool,
}

#[derive(Debug, Args)]
pub struct EvolutionFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa0: Option<f64>,
    #[arg(long = "T0", allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long = "k-norm")]
    pub k_norm: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub w0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long = "s-max", allow_hyphen_values = true)]
    pub s_max: Option<f64>,
    #[arg(long = "grid-N")]
    pub grid_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    F0,
    F1,
    G0,
    Random,
}

#[derive(Debug, Args)]
pub struct LinearArgs {
    #[command(flatten)]
    pub cfg: EvolutionFlags,
    #[arg(long, value_enum)]
    pub mode: Option<Initial>,
    /// Amplitude of the initial state in the working norm for `random`, mode multiple otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub amp: Option<f64>,
}

#[derive(Debug, Args)]
pub struct NonlinearArgs {
    #[command(flatten)]
    pub cfg: EvolutionFlags,
    #[arg(long, value_enum)]
    pub perturbation: Option<Initial>,
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    /// Comma-separated seeds run in parallel; defaults to `--seed`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct LightconeArgs {
    #[command(flatten)]
    pub params: ProfileFlags,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long = "s-max", allow_hyphen_values = true)]
    pub s_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub cfl: Option<f64>,
    #[arg(long = "record-every")]
    pub record_every: Option<usize>,
    /// Scale of random smooth even data added to the profile.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub level: Option<Level>,
}

#[derive(Debug)]
pub enum CliError {
    /// Exit 1.
    Validation(String),
    /// Exit 2, with the error name.
    Numerical { name: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical { .. } => 2,
        }
    }

    pub fn diagnostic(&self) -> String {
        let line = match self {
            CliError::Validation(m) => format!("error: {m}"),
            CliError::Numerical { name, message } => format!("error: {name}: {message}"),
        };
        line.replace('\n', " ")
    }
}

fn invalid(m: impl Into<String>) -> CliError {
    CliError::Validation(m.into())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Numerical { name: "IOError", message: format!("{}: {e}", path.display()) }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::InvalidParams(m) => CliError::Validation(m),
            ProfileError::OutsideLightcone { .. } => CliError::Numerical { name: "OutsideLightcone", message: e.to_string() },
            ProfileError::Domain(_) => CliError::Numerical { name: "DomainError", message: e.to_string() },
            ProfileError::Quadrature(_) => CliError::Numerical { name: "QuadratureError", message: e.to_string() },
        }
    }
}

impl From<ModeError> for CliError {
    fn from(e: ModeError) -> Self {
        match e {
            ModeError::InvalidAlpha(_) | ModeError::OutOfHalfPlane(_) => CliError::Validation(e.to_string()),
            ModeError::LogCase => CliError::Numerical { name: "LogCase", message: e.to_string() },
            ModeError::ResonantDivision(_) => CliError::Numerical { name: "ResonantDivision", message: e.to_string() },
        }
    }
}

impl From<LinopError> for CliError {
    fn from(e: LinopError) -> Self {
        match e {
            LinopError::InvalidAlpha(_) | LinopError::InvalidGrid(_) | LinopError::UnderResolved { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical { name: "LinopError", message: e.to_string() },
        }
    }
}

impl From<EvolveError> for CliError {
    fn from(e: EvolveError) -> Self {
        match e {
            EvolveError::InvalidConfig(m) => CliError::Validation(m),
            EvolveError::HypothesisViolation { .. } => CliError::Validation(e.to_string()),
            EvolveError::Linop(l) => l.into(),
            EvolveError::Profile(p) => p.into(),
            _ => CliError::Numerical { name: e.name(), message: e.to_string() },
        }
    }
}

/// Defaults read from `--config`.
struct ConfigFile(Map<String, Value>);

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(ConfigFile(Map::new())) };
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(m)) => Ok(ConfigFile(m)),
            Ok(_) => Err(invalid(format!("config {} must hold a JSON object", path.display()))),
            Err(e) => Err(invalid(format!("config {} is not valid JSON: {e}", path.display()))),
        }
    }

    /// Flag, then config entry, then default.
    fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.0.get(key) {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| invalid(format!("config key '{key}': {e}"))),
            None => Ok(default),
        }
    }

    /// Like [`pick`](Self::pick) for textual values that may be given as JSON numbers.
    fn pick_text(&self, flag: Option<String>, key: &str, default: &str) -> Result<String, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.0.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(Value::Number(n)) => Ok(n.to_string()),
            Some(v) => Err(invalid(format!("config key '{key}': expected a string, got {v}"))),
            None => Ok(default.to_string()),
        }
    }
}

pub fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || invalid(format!("range '{s}' must have the form lo:hi with lo <= hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((lo, hi))
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || invalid(format!("grid '{s}' must have the form NxM with positive N, M"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

/// Shortest text that round-trips, in 17-significant-digit scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, &target)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_error(&target, e));
    }
    Ok(target)
}

/// Fully resolved invocation, echoed as `config.json` next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub params: Value,
    pub output_dir: String,
    pub seed: u64,
}

/// Canonical JSON of the echo: sorted keys, trailing newline.
pub fn config_echo(cfg: &RunConfig) -> String {
    let v = serde_json::to_value(cfg).expect("config echo is serializable");
    let mut s = serde_json::to_string_pretty(&v).expect("config echo is serializable");
    s.push('\n');
    s
}

pub fn emit_config_echo(cfg: &RunConfig, dir: &Path) -> Result<PathBuf, CliError> {
    write_atomic(dir, "config.json", config_echo(cfg).as_bytes())
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| invalid(format!("output_dir {} is not writable: {e}", dir.display())))?;
    let probe = dir.join(format!(".probe.{}.tmp", std::process::id()));
    fs::write(&probe, b"").map_err(|e| invalid(format!("output_dir {} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(&probe);
    Ok(())
}

/// Everything a subcommand needs besides its own flags.
struct Ctx {
    file: ConfigFile,
    out: PathBuf,
    seed: u64,
}

impl Ctx {
    fn finish(&self, command: &'static str, params: &impl Serialize) -> Result<RunConfig, CliError> {
        prepare_dir(&self.out)?;
        let cfg = RunConfig {
            command,
            params: serde_json::to_value(params).expect("params are serializable"),
            output_dir: self.out.display().to_string(),
            seed: self.seed,
        };
        emit_config_echo(&cfg, &self.out)?;
        Ok(cfg)
    }
}

fn resolve_profile(f: ProfileFlags, file: &ConfigFile) -> Result<ProfileParams, CliError> {
    let alpha = file.pick(f.alpha, "alpha", 3.0)?;
    let beta = Beta::parse(&file.pick_text(f.beta, "beta", "inf")?)?;
    let kappa = file.pick(f.kappa, "kappa", 0.0)?;
    let t = file.pick(f.t, "T", 1.0)?;
    let x0 = file.pick(f.x0, "x0", 0.0)?;
    Ok(ProfileParams::new(alpha, beta, kappa, t, x0)?)
}

fn resolve_evolution(f: EvolutionFlags, file: &ConfigFile) -> Result<EvolutionConfig, CliError> {
    let d = EvolutionConfig::default();
    let grid_n = file.pick(f.grid_n, "grid-N", d.grid_n)?;
    let cfg = EvolutionConfig {
        alpha0: file.pick(f.alpha0, "alpha0", d.alpha0)?,
        kappa0: file.pick(f.kappa0, "kappa0", d.kappa0)?,
        t0: file.pick(f.t0, "T0", d.t0)?,
        x0: file.pick(f.x0, "x0", d.x0)?,
        k_norm: file.pick(f.k_norm, "k-norm", d.k_norm)?,
        w0: file.pick(f.w0, "w0", d.w0)?,
        dt: file.pick(f.dt, "dt", crate::evolve::default_dt(grid_n))?,
        s_max: file.pick(f.s_max, "s-max", d.s_max)?,
        grid_n,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_profile(a: ProfileArgs, ctx: &Ctx) -> Result<String, CliError> {
    let p = resolve_profile(a.params, &ctx.file)?;
    let samples = ctx.file.pick(a.samples, "samples", 201)?;
    if samples < 2 {
        return Err(invalid(format!("samples must be at least 2, got {samples}")));
    }
    ctx.finish("profile", &json!({ "profile": p, "samples": samples }))?;
    let mut csv = String::from("y,tildeU,dtildeU,H\n");
    for y in crate::modes::lattice(-1.0, 1.0, samples) {
        let r = profile_row(&p, y)?;
        csv.push_str(&format!("{},{},{},{}\n", num(r[0]), num(r[1]), num(r[2]), num(r[3])));
    }
    let path = write_atomic(&ctx.out, "profile.csv", csv.as_bytes())?;
    Ok(format!("wrote {} ({samples} rows)", path.display()))
}

fn run_scan(a: ScanArgs, ctx: &Ctx) -> Result<String, CliError> {
    let alpha = ctx.file.pick(a.alpha, "alpha", 3.0)?;
    let re = parse_range(&ctx.file.pick_text(a.re, "re", "-0.9:4")?)?;
    let im = parse_range(&ctx.file.pick_text(a.im, "im", "-4:4")?)?;
    let grid = parse_grid(&ctx.file.pick_text(a.grid, "grid", "40x40")?)?;
    let n_max = ctx.file.pick(a.n_max, "n-max", 2000)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must satisfy alpha > 0, got {alpha}")));
    }
    if re.0 <= -1.0 {
        return Err(invalid(format!("re range must lie in Re > -1, got {}:{}", re.0, re.1)));
    }
    ctx.finish("scan-modes", &json!({ "alpha": alpha, "re": [re.0, re.1], "im": [im.0, im.1], "grid": [grid.0, grid.1], "n_max": n_max }))?;
    let verdicts = scan_halfplane(alpha, re, im, grid, n_max)?;
    let mut csv = String::from("re_lambda,im_lambda,smooth,evidence,ratio_tail\n");
    for v in &verdicts {
        csv.push_str(&format!("{},{},{},{},{}\n", num(v.lambda.re), num(v.lambda.im), v.smooth, v.evidence.as_str(), num(v.ratio_tail)));
    }
    let path = write_atomic(&ctx.out, "scan.csv", csv.as_bytes())?;
    let smooth = verdicts.iter().filter(|v| v.smooth).count();
    Ok(format!("wrote {} ({} rows, {smooth} smooth)", path.display(), verdicts.len()))
}

fn run_spectrum(a: SpectrumArgs, ctx: &Ctx) -> Result<String, CliError> {
    let alpha = ctx.file.pick(a.alpha, "alpha", 3.0)?;
    let n = ctx.file.pick(a.n, "N", 64)?;
    let k_norm = ctx.file.pick(a.k_norm, "k-norm", 2)?;
    let eigenvectors = a.eigenvectors || ctx.file.pick(None, "eigenvectors", false)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must satisfy alpha > 0, got {alpha}")));
    }
    let grid = CollocationGrid::new(n)?;
    grid.check_order(k_norm + 1)?;
    ctx.finish("spectrum", &json!({ "alpha": alpha, "N": n, "k_norm": k_norm, "eigenvectors": eigenvectors }))?;
    let r = assemble_and_eig(alpha, &grid, k_norm)?;
    let eig: Vec<Value> = (0..r.eigenvalues.len())
        .map(|i| json!({ "re": r.eigenvalues[i].re, "im": r.eigenvalues[i].im, "residual": r.residuals[i], "class": r.classification[i].as_str() }))
        .collect();
    let report = json!({ "alpha": alpha, "N": n, "k_norm": k_norm, "eigenvalues": eig });
    let path = write_atomic(&ctx.out, "spectrum.json", json_text(&report).as_bytes())?;
    let unstable = r.unstable_resolved();
    if eigenvectors {
        let mut csv = String::from("index,re_lambda,im_lambda,y,re_q1,im_q1,re_q2,im_q2\n");
        for (i, l) in r.eigenvalues.iter().enumerate() {
            if !unstable.iter().any(|(u, _)| u == l) {
                continue;
            }
            let v = &r.eigenvectors[i];
            for (j, y) in grid.nodes().iter().enumerate() {
                csv.push_str(&format!(
                    "{i},{},{},{},{},{},{},{}\n",
                    num(l.re), num(l.im), num(*y), num(v.q1[j].re), num(v.q1[j].im), num(v.q2[j].re), num(v.q2[j].im)
                ));
            }
        }
        write_atomic(&ctx.out, "eigenvectors.csv", csv.as_bytes())?;
    }
    let listed: Vec<String> = unstable.iter().map(|(l, c)| format!("{:.3e}{:+.3e}i ({})", l.re, l.im, c.as_str())).collect();
    Ok(format!("wrote {}; resolved with Re > -0.9: {}", path.display(), listed.join(", ")))
}

fn mode_of(i: Initial) -> Option<Mode> {
    match i {
        Initial::F0 => Some(Mode::F0),
        Initial::F1 => Some(Mode::F1),
        Initial::G0 => Some(Mode::G0),
        Initial::Random => None,
    }
}

/// Random data scaled to working norm `eps`, or `eps` times a symmetry mode.
fn build_perturbation(kind: Initial, eps: f64, seed: u64, cfg: &EvolutionConfig) -> Result<Box<dyn Perturbation>, CliError> {
    Ok(match mode_of(kind) {
        Some(m) => Box::new(ModePerturbation::new(m, eps, cfg)),
        None => {
            let grid = cfg.grid()?;
            let raw = RandomSmoothEven::new(seed, cfg.t0);
            let q = initial_data_map(cfg, cfg.alpha0, cfg.kappa0, cfg.t0, &raw)?;
            Box::new(raw.scaled(eps / norm_dblk(&grid, &q, cfg.k_norm)?))
        }
    })
}

fn slope_window(s_max: f64) -> (f64, f64) {
    (s_max.min(2.0) / 2.0, s_max)
}

fn summary(trace: &EvolutionTrace, cfg: &EvolutionConfig, extra: Value) -> Value {
    let (lo, hi) = slope_window(cfg.s_max);
    let mut v = json!({
        "rate_slope": trace.decay_slope(lo, hi),
        "slope_window": [lo, hi],
        "fitted": trace.fitted,
        "distance": trace.fitted.map(|f| f.distance(&cfg.base())),
        "config": cfg,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    v
}

fn run_linear(a: LinearArgs, ctx: &Ctx) -> Result<String, CliError> {
    let cfg = resolve_evolution(a.cfg, &ctx.file)?;
    let mode = ctx.file.pick(a.mode, "mode", Initial::F1)?;
    let amp = ctx.file.pick(a.amp, "amp", 1.0)?;
    ctx.finish("evolve-linear", &json!({ "config": cfg, "mode": mode, "amp": amp }))?;
    let p = build_perturbation(mode, amp, ctx.seed, &cfg)?;
    let grid = cfg.grid()?;
    let q0 = initial_data_map(&cfg, cfg.alpha0, cfg.kappa0, cfg.t0, p.as_ref())?;
    let trace = evolve_linear(cfg.alpha0, &grid, &q0, &cfg)?;
    write_atomic(&ctx.out, "trace.csv", trace.to_csv().as_bytes())?;
    let s = summary(&trace, &cfg, json!({ "seed": ctx.seed, "mode": mode, "amp": amp }));
    let path = write_atomic(&ctx.out, "summary.json", json_text(&s).as_bytes())?;
    Ok(format!("wrote {} ({} samples)", path.display(), trace.len()))
}

fn run_nonlinear(a: NonlinearArgs, ctx: &Ctx) -> Result<String, CliError> {
    let cfg = resolve_evolution(a.cfg, &ctx.file)?;
    let kind = ctx.file.pick(a.perturbation, "perturbation", Initial::Random)?;
    let eps = ctx.file.pick(a.eps, "eps", 1e-4)?;
    let seeds = ctx.file.pick(a.seeds, "seeds", vec![ctx.seed])?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(invalid(format!("eps must be finite and nonnegative, got {eps}")));
    }
    if seeds.is_empty() {
        return Err(invalid("seeds must not be empty"));
    }
    ctx.finish("evolve-nonlinear", &json!({ "config": cfg, "perturbation": kind, "eps": eps, "seeds": seeds }))?;
    let runs: Vec<Result<String, CliError>> = seeds
        .par_iter()
        .map(|&seed| {
            let p: Box<dyn Perturbation> = if eps == 0.0 { Box::new(ZeroPerturbation) } else { build_perturbation(kind, eps, seed, &cfg)? };
            let trace = evolve_nonlinear(&cfg, p.as_ref())?;
            write_atomic(&ctx.out, &format!("trace_seed{seed}.csv"), trace.to_csv().as_bytes())?;
            let s = summary(&trace, &cfg, json!({ "seed": seed, "perturbation": kind, "eps": eps }));
            write_atomic(&ctx.out, &format!("summary_seed{seed}.json"), json_text(&s).as_bytes())?;
            let slope = trace.decay_slope(slope_window(cfg.s_max).0, cfg.s_max).unwrap_or(f64::NAN);
            Ok(format!("seed {seed}: slope {slope:.4}"))
        })
        .collect();
    let lines = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(lines.join("\n"))
}

fn run_lightcone(a: LightconeArgs, ctx: &Ctx) -> Result<String, CliError> {
    let p = resolve_profile(a.params, &ctx.file)?;
    let d = LightconeConfig::default();
    let lc = LightconeConfig {
        cells: ctx.file.pick(a.cells, "cells", d.cells)?,
        s_max: ctx.file.pick(a.s_max, "s-max", d.s_max)?,
        cfl: ctx.file.pick(a.cfl, "cfl", d.cfl)?,
        record_every: ctx.file.pick(a.record_every, "record-every", d.record_every)?,
    };
    let eps = ctx.file.pick(a.eps, "eps", 0.0)?;
    if !eps.is_finite() {
        return Err(invalid(format!("eps must be finite, got {eps}")));
    }
    if lc.cells < 4 || lc.cells % 2 != 0 || lc.record_every == 0 || !(lc.s_max > 0.0 && lc.s_max.is_finite()) {
        return Err(invalid("lightcone needs even cells >= 4, record-every >= 1 and s-max > 0"));
    }
    ctx.finish("lightcone", &json!({ "profile": p, "lightcone": lc, "eps": eps }))?;
    let pert = RandomSmoothEven::new(ctx.seed, p.t_blowup).scaled(eps);
    let run = lightcone_solver(&p, &pert, &lc)?;
    let mut states = String::from("t,x,u,u_t\n");
    for st in &run.states {
        for j in 0..st.x_nodes.len() {
            states.push_str(&format!("{},{},{},{}\n", num(st.t), num(st.x_nodes[j]), num(st.u[j]), num(st.u_t[j])));
        }
    }
    write_atomic(&ctx.out, "lightcone_states.csv", states.as_bytes())?;
    let mut hist = String::from("t,max_u_t,u_t_center\n");
    for (t, m, c) in &run.history {
        hist.push_str(&format!("{},{},{}\n", num(*t), num(*m), num(*c)));
    }
    write_atomic(&ctx.out, "lightcone_history.csv", hist.as_bytes())?;
    let s = json!({ "seed": ctx.seed, "eps": eps, "blowup": run.blowup, "states": run.states.len(), "steps": run.history.len() });
    let path = write_atomic(&ctx.out, "summary.json", json_text(&s).as_bytes())?;
    let t_star = run.blowup.map(|b| b.t_star).unwrap_or(f64::NAN);
    Ok(format!("wrote {}; fitted blow-up time {t_star:.8}", path.display()))
}

fn run_verify(a: VerifyArgs, ctx: &Ctx) -> Result<String, CliError> {
    let level = ctx.file.pick(a.level, "level", Level::Fast)?;
    let results = verify_suite(level);
    print!("{}", format_table(&results));
    match results.iter().find(|r| !r.passed) {
        None => Ok(format!("all {} checks passed", results.len())),
        Some(first) => {
            let failed = results.iter().filter(|r| !r.passed).count();
            Err(CliError::Numerical { name: "VerifyFailure", message: format!("{failed} check(s) failed, first: {}", first.name) })
        }
    }
}

fn dispatch(cli: Cli, out_override: Option<PathBuf>) -> Result<String, CliError> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let seed = file.pick(cli.seed, "seed", 0)?;
    let out = match out_override {
        Some(o) => o,
        None => file.pick(cli.out, "out", PathBuf::from(DEFAULT_OUT))?,
    };
    let jobs = file.pick(cli.jobs, "jobs", 0)?;
    let ctx = Ctx { file, out, seed };
    let work = move || match cli.command {
        Command::Profile(a) => run_profile(a, &ctx),
        Command::ScanModes(a) => run_scan(a, &ctx),
        Command::Spectrum(a) => run_spectrum(a, &ctx),
        Command::EvolveLinear(a) => run_linear(a, &ctx),
        Command::EvolveNonlinear(a) => run_nonlinear(a, &ctx),
        Command::Lightcone(a) => run_lightcone(a, &ctx),
        Command::Verify(a) => run_verify(a, &ctx),
    };
    if jobs == 0 {
        return work();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| invalid(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(work)
}

/// Runs one invocation (`argv` without the program name) with an explicit
/// output-directory override in place of the environment.
pub fn dispatch_args<I, T>(argv: I, out_override: Option<PathBuf>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = std::iter::once(OsString::from("blowuplab")).chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return 1;
        }
    };
    match dispatch(cli, out_override) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}

/// Entry point: `BLOWUPLAB_OUT` overrides `--out`.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_out = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    dispatch_args(argv, env_out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_grids() {
        assert_eq!(parse_range("-0.9:3").unwrap(), (-0.9, 3.0));
        assert!(parse_range("3:-1").is_err() && parse_range("3").is_err());
        assert_eq!(parse_grid("20x30").unwrap(), (20, 30));
        assert!(parse_grid("0x3").is_err() && parse_grid("20").is_err());
    }

    #[test]
    fn numbers_use_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn config_precedence() {
        let file = ConfigFile(serde_json::from_str(r#"{"alpha": 5.0, "beta": 0}"#).unwrap());
        assert_eq!(file.pick(Some(2.0), "alpha", 3.0).unwrap(), 2.0);
        assert_eq!(file.pick(None, "alpha", 3.0).unwrap(), 5.0);
        assert_eq!(file.pick(None, "kappa", 0.5).unwrap(), 0.5);
        assert_eq!(file.pick_text(None, "beta", "inf").unwrap(), "0");
        assert!(file.pick::<usize>(None, "alpha", 1).is_err());
    }

    #[test]
    fn echo_is_canonical() {
        let cfg = RunConfig { command: "profile", params: json!({"b": 1, "a": 2}), output_dir: "d".into(), seed: 7 };
        let s = config_echo(&cfg);
        assert_eq!(s, config_echo(&cfg.clone()));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("\"seed\": 7"));
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::from(EvolveError::InvalidConfig("x".into())).exit_code(), 1);
        let e = CliError::from(EvolveError::CflViolation { dt: 1.0, dx: 0.5 });
        assert_eq!(e.exit_code(), 2);
        assert!(e.diagnostic().contains("CFLViolation"));
        assert_eq!(CliError::from(ProfileError::InvalidParams("bad".into())).exit_code(), 1);
    }
}
