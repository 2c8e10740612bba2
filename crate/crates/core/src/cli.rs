//! Batch front end behind the `kconvex` binary: one config file in, a
//! directory of JSON/CSV artifacts plus `manifest.json` out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, BoundCheck, FitWindow, RateReport};
use crate::barrier::{self, BarrierDiagnostics, BarrierRecord, SubsolutionCheck, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::exponents::{GrowthParams, Violation};
use crate::geometry::{self, BoundaryFrame, ConvexDomain, ConvexityCertificate, KConvexity};
use crate::oracle::{ExactKind, ExactSolution, HessianSource};
use crate::report::{csv_float, to_json};
use crate::rhs::{RhsModel, RhsSpec};
use crate::solver::{self, ComparisonReport, Grid, Init, SolveConfig, SolverState};

pub const DEFAULT_SEED: u64 = 0x5a3c;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Malformed or incomplete configuration; nothing is written.
    pub const CONFIG: i32 = 2;
    /// Growth parameters outside the admissible class.
    pub const PARAM_DOMAIN: i32 = 3;
    /// No barrier found on the epsilon ladder.
    pub const SEARCH_FAILURE: i32 = 4;
    /// Solver hit `max_iters`.
    pub const NON_CONVERGENCE: i32 = 5;
    /// A checked inequality failed (certificate, bound, comparison, residual).
    pub const BOUND_VIOLATION: i32 = 6;
    /// Any other runtime failure (geometry, I/O, data).
    pub const RUNTIME: i32 = 7;
}

pub const EXIT_CODE_HELP: &str = "Exit codes:
  0  success
  2  configuration error (malformed or incomplete config; no outputs written)
  3  parameter-domain error (inadmissible growth parameters)
  4  barrier search failure
  5  solver non-convergence
  6  bound violation (certificate, rate bound, comparison or residual check failed)
  7  other runtime error";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Exponent,
    Certify,
    Barrier,
    Solve,
    Rate,
    VerifyExamples,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Exponent => "exponent",
            Command::Certify => "certify",
            Command::Barrier => "barrier",
            Command::Solve => "solve",
            Command::Rate => "rate",
            Command::VerifyExamples => "verify-examples",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexitySpec {
    pub k: usize,
    pub a: Vec<f64>,
    pub eta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Barrier,
    Zero,
}

/// Everything a run may need; each command reads the fields it uses.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<ConvexDomain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_params: Option<GrowthParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convexity: Option<ConvexitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<RhsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitKind>,
    /// `tol_geom = c h^(1/2)` in the comparison check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_geom_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<FitWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_theory: Option<f64>,
    /// `rate` on precomputed `(d, |u|)` pairs instead of a solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    /// SHA-256 of the canonical (re-serialized) form.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }

    fn need<'a, T>(field: &'a Option<T>, name: &str, cmd: Command) -> Result<&'a T> {
        field
            .as_ref()
            .ok_or_else(|| Error::Config(format!("`{}` needs `{name}` in the config", cmd.name())))
    }
}

#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub status: String,
    pub exit_code: i32,
    pub seed: u64,
    pub threads: Option<usize>,
    pub config_sha256: String,
    pub files: Vec<FileEntry>,
    pub summary: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Artifacts and verdict of one command.
pub struct Products {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: serde_json::Value,
    pub code: i32,
    pub error: Option<String>,
}

impl Products {
    fn ok(summary: serde_json::Value) -> Self {
        Products { files: Vec::new(), summary, code: exit::OK, error: None }
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.files.push((name.to_string(), to_json(value)?.into_bytes()));
        Ok(())
    }

    fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body.into_bytes()));
    }

    fn fail(&mut self, code: i32, message: String) {
        if self.code == exit::OK {
            self.code = code;
            self.error = Some(message);
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => exit::CONFIG,
        Error::ParamDomain(_) => exit::PARAM_DOMAIN,
        Error::SearchFailure(_) | Error::BoundUnavailable { .. } => exit::SEARCH_FAILURE,
        Error::IterationLimit { .. } => exit::NON_CONVERGENCE,
        Error::BoundViolation(_) => exit::BOUND_VIOLATION,
        _ => exit::RUNTIME,
    }
}

fn load_config(inv: &Invocation) -> Result<RunConfig> {
    let cfg = match &inv.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None if inv.command == Command::VerifyExamples => RunConfig::default(),
        None => return Err(Error::Config(format!("`{}` needs --config", inv.command.name()))),
    };
    if let Some(c) = cfg.command {
        if c != inv.command {
            return Err(Error::Config(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                inv.command.name()
            )));
        }
    }
    Ok(cfg)
}

/// Runs one command end to end and returns the process exit code.
pub fn run(inv: &Invocation) -> i32 {
    let cfg = match load_config(inv) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    if let Some(t) = inv.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return exit::CONFIG;
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let seed = inv.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let digest = match cfg.digest() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    let products = match execute(inv.command, &cfg, seed) {
        Ok(p) => p,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e}");
            if code == exit::CONFIG {
                return code;
            }
            Products { files: Vec::new(), summary: serde_json::Value::Null, code, error: Some(e.to_string()) }
        }
    };
    if let Some(msg) = &products.error {
        if products.code != exit::OK {
            eprintln!("{}: {msg}", inv.command.name());
        }
    }
    match write_outputs(&inv.out, inv, seed, digest, products) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error writing outputs: {e}");
            exit::RUNTIME
        }
    }
}

fn write_outputs(out: &Path, inv: &Invocation, seed: u64, digest: String, p: Products) -> Result<i32> {
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for (name, bytes) in &p.files {
        fs::write(out.join(name), bytes)?;
        files.push(FileEntry { name: name.clone(), bytes: bytes.len(), sha256: hex::encode(Sha256::digest(bytes)) });
    }
    let status = match p.code {
        exit::OK => "ok",
        exit::BOUND_VIOLATION => "violation",
        _ => "error",
    };
    let manifest = Manifest {
        tool: "kconvex".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: inv.command,
        status: status.into(),
        exit_code: p.code,
        seed,
        threads: inv.threads,
        config_sha256: digest,
        files,
        summary: p.summary,
        error: p.error,
    };
    fs::write(out.join("manifest.json"), to_json(&manifest)?)?;
    Ok(p.code)
}

/// Dispatches without touching the file system.
pub fn execute(cmd: Command, cfg: &RunConfig, seed: u64) -> Result<Products> {
    match cmd {
        Command::Exponent => exponent(cfg),
        Command::Certify => certify(cfg),
        Command::Barrier => barrier_cmd(cfg, seed),
        Command::Solve => solve_cmd(cfg, seed),
        Command::Rate => rate_cmd(cfg, seed),
        Command::VerifyExamples => verify_examples(seed),
    }
}

#[derive(Serialize)]
struct ExponentReport<'a> {
    growth_params: &'a GrowthParams,
    admissible: bool,
    violations: Vec<Violation>,
    mu: Option<f64>,
    mu_flat: Option<f64>,
    b: Option<Vec<f64>>,
}

fn exponent(cfg: &RunConfig) -> Result<Products> {
    let g = RunConfig::need(&cfg.growth_params, "growth_params", Command::Exponent)?;
    let violations = g.validate();
    let report = ExponentReport {
        growth_params: g,
        admissible: violations.is_empty(),
        violations,
        mu: g.mu().ok(),
        mu_flat: g.mu_flat().ok(),
        b: g.b_coeffs().ok(),
    };
    let mut p = Products::ok(serde_json::json!({
        "mu": report.mu, "mu_flat": report.mu_flat, "b": report.b, "admissible": report.admissible,
    }));
    println!(
        "mu = {}  mu_flat = {}  b = {:?}  admissible = {}",
        fmt_opt(report.mu),
        fmt_opt(report.mu_flat),
        report.b,
        report.admissible
    );
    if !report.admissible {
        let msg = Error::ParamDomain(report.violations.clone()).to_string();
        p.fail(exit::PARAM_DOMAIN, msg);
    }
    p.json("exponent.json", &report)?;
    Ok(p)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.17}"))
}

struct Setup {
    domain: Arc<ConvexDomain>,
    x0: Vec<f64>,
    conv: ConvexitySpec,
}

fn setup(cfg: &RunConfig, cmd: Command) -> Result<Setup> {
    let domain = RunConfig::need(&cfg.domain, "domain", cmd)?.clone();
    let x0 = RunConfig::need(&cfg.contact_point, "contact_point", cmd)?.clone();
    let conv = RunConfig::need(&cfg.convexity, "convexity", cmd)?.clone();
    if x0.len() != domain.dim() {
        return Err(Error::Config("contact_point has the wrong dimension".into()));
    }
    Ok(Setup { domain: Arc::new(domain), x0, conv })
}

fn certificate_of(s: &Setup) -> Result<KConvexity> {
    let count = s.conv.sample_count.unwrap_or_else(|| geometry::default_sample_count(s.domain.dim()));
    geometry::certify_k_convexity(&s.domain, &s.x0, s.conv.k, &s.conv.a, &s.conv.eta, count)
}

fn require_certified(kc: KConvexity) -> Result<ConvexityCertificate> {
    match kc {
        KConvexity::Certified(c) => Ok(c),
        KConvexity::Violated { worst_point, slack, .. } => Err(Error::BoundViolation(format!(
            "domain is not k-strictly convex at the contact point: slack {slack:e} at {worst_point:?}"
        ))),
    }
}

fn certify(cfg: &RunConfig) -> Result<Products> {
    let s = setup(cfg, Command::Certify)?;
    let kc = certificate_of(&s)?;
    let mut p = match &kc {
        KConvexity::Certified(c) => Products::ok(serde_json::json!({"status": "certified", "margin": c.margin})),
        KConvexity::Violated { slack, .. } => {
            let mut p = Products::ok(serde_json::json!({"status": "violated", "slack": slack}));
            p.fail(exit::BOUND_VIOLATION, format!("k-strict convexity violated (slack {slack:e})"));
            p
        }
    };
    p.json("certificate.json", &kc)?;
    Ok(p)
}

#[derive(Serialize)]
struct BarrierReport {
    barrier: BarrierRecord,
    check: SubsolutionCheck,
    diagnostics: Option<BarrierDiagnostics>,
    ladder_index: Option<usize>,
    m_exponent: i32,
    seed: u64,
}

/// Certificate plus certified barrier for the configured contact point.
fn certified_barrier(s: &Setup, model: &RhsModel, seed: u64) -> Result<(barrier::CertifiedBarrier, Vec<Vec<f64>>)> {
    if s.conv.k == 0 {
        let n = s.domain.dim();
        let frame = BoundaryFrame::at(&s.domain, &s.x0, n - 1)?;
        let samples = barrier::default_samples(&s.domain, &frame, seed);
        let cb = barrier::flat_barrier(&s.domain, model, model.params(), &frame, Some(&samples), DEFAULT_MARGIN)?;
        return Ok((cb, samples));
    }
    let cert = require_certified(certificate_of(s)?)?;
    let samples = barrier::default_samples(&s.domain, &cert.frame, seed);
    let cb = barrier::find_eps_m(&s.domain, &cert, model, model.params(), Some(&samples), DEFAULT_MARGIN)?;
    Ok((cb, samples))
}

fn model_of(cfg: &RunConfig, domain: &Arc<ConvexDomain>, cmd: Command) -> Result<RhsModel> {
    let spec = RunConfig::need(&cfg.rhs, "rhs", cmd)?.clone();
    RhsModel::from_spec(spec, domain.clone())
}

fn barrier_cmd(cfg: &RunConfig, seed: u64) -> Result<Products> {
    let s = setup(cfg, Command::Barrier)?;
    let model = model_of(cfg, &s.domain, Command::Barrier)?;
    let (cb, samples) = certified_barrier(&s, &model, seed)?;
    let report = BarrierReport {
        barrier: cb.record(),
        check: cb.check.clone(),
        diagnostics: cb.diagnostics.clone(),
        ladder_index: cb.ladder_index,
        m_exponent: cb.m_exponent,
        seed,
    };
    let mut csv = String::new();
    let n = s.domain.dim();
    for i in 0..n {
        let _ = write!(csv, "x{i},");
    }
    csv.push_str("y_normal,F_W\n");
    let frame = cb.barrier.frame();
    let nax = frame.normal_axis;
    for x in &samples {
        let fw = cb.barrier.fw(&model, x)?;
        let y = frame.to_frame(x);
        for v in x {
            csv.push_str(&csv_float(*v));
            csv.push(',');
        }
        let _ = writeln!(csv, "{},{}", csv_float(y[nax]), csv_float(fw));
    }
    let mut p = Products::ok(serde_json::json!({
        "epsilon": report.barrier.epsilon, "M": report.barrier.m, "min_FW": report.check.min_fw,
        "ladder_index": report.ladder_index,
    }));
    p.json("barrier.json", &report)?;
    p.text("fw_samples.csv", csv);
    Ok(p)
}

#[derive(Serialize)]
struct ConvergenceReport<'a> {
    solver: &'a SolveConfig,
    h: f64,
    nodes: usize,
    converged: bool,
    iterations: usize,
    last_update: f64,
    residual_max: f64,
    history: &'a [f64],
    comparison: Option<ComparisonReport>,
}

struct Solved {
    grid: Grid,
    state: SolverState,
    barrier: Option<barrier::CertifiedBarrier>,
    setup: Option<Setup>,
    model: RhsModel,
}

fn solve_common(cfg: &RunConfig, seed: u64, cmd: Command, p: &mut Products) -> Result<Option<Solved>> {
    let domain = Arc::new(RunConfig::need(&cfg.domain, "domain", cmd)?.clone());
    let model = model_of(cfg, &domain, cmd)?;
    let h = *RunConfig::need(&cfg.h, "h", cmd)?;
    let scfg = cfg.solver.clone().unwrap_or_default();
    scfg.validate()?;
    let init_kind = cfg.init.unwrap_or_default();
    let (setup, cb) = if init_kind == InitKind::Barrier || cmd == Command::Rate {
        let s = setup(cfg, cmd)?;
        let (cb, _) = certified_barrier(&s, &model, seed)?;
        (Some(s), Some(cb))
    } else {
        (None, None)
    };
    let grid = Grid::build(&domain, h, scfg.stencil_width)?;
    let init = match (&cb, init_kind) {
        (Some(b), InitKind::Barrier) => Init::Barrier(&b.barrier),
        _ => Init::Zero,
    };
    let state = match solver::solve(&grid, &model, &scfg, init) {
        Ok(s) => s,
        Err(Error::IterationLimit { iterations, last_update, history, residual }) => {
            let rep = ConvergenceReport {
                solver: &scfg,
                h,
                nodes: grid.len(),
                converged: false,
                iterations,
                last_update,
                residual_max: residual.iter().fold(0.0, |m: f64, r| m.max(r.abs())),
                history: &history,
                comparison: None,
            };
            p.json("convergence.json", &rep)?;
            p.summary = serde_json::json!({"converged": false, "iterations": iterations, "last_update": last_update});
            p.fail(exit::NON_CONVERGENCE, format!("no convergence after {iterations} sweeps"));
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let comparison = match &cb {
        Some(b) => Some(solver::discrete_comparison_check(
            &grid,
            &state,
            &b.barrier,
            solver::default_tol_geom(h, cfg.tol_geom_c.unwrap_or(1.0)),
        )?),
        None => None,
    };
    let rep = ConvergenceReport {
        solver: &scfg,
        h,
        nodes: grid.len(),
        converged: true,
        iterations: state.iterations,
        last_update: state.last_update,
        residual_max: state.residual.iter().fold(0.0, |m: f64, r| m.max(r.abs())),
        history: &state.history,
        comparison: comparison.clone(),
    };
    p.json("convergence.json", &rep)?;
    if let Some(c) = &comparison {
        if !c.passed || !c.nonpositive {
            p.fail(
                exit::BOUND_VIOLATION,
                format!("discrete comparison failed at {:?} (excess {:e})", c.worst_point, c.worst_excess),
            );
        }
    }
    p.summary = serde_json::json!({
        "converged": true, "iterations": state.iterations, "nodes": grid.len(),
        "residual_max": rep.residual_max, "comparison_passed": comparison.as_ref().map(|c| c.passed),
    });
    let mut csv = Vec::new();
    solver::write_field_csv(&mut csv, &grid, &state)?;
    p.files.push(("solution.csv".into(), csv));
    Ok(Some(Solved { grid, state, barrier: cb, setup, model }))
}

fn solve_cmd(cfg: &RunConfig, seed: u64) -> Result<Products> {
    let mut p = Products::ok(serde_json::Value::Null);
    solve_common(cfg, seed, Command::Solve, &mut p)?;
    Ok(p)
}

#[derive(Serialize)]
struct RateOutput {
    report: RateReport,
    bound_check: Option<BoundCheck>,
    /// `1.1 C_fitted`, the constant used by the bound check.
    bound_constant: f64,
    holder_constant: Option<f64>,
    empirical_seminorm: Option<f64>,
    fit_window: Option<FitWindow>,
}

fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E')) {
            continue;
        }
        let mut it = line.split(',').map(|f| f.trim().parse::<f64>());
        match (it.next(), it.next()) {
            (Some(Ok(d)), Some(Ok(u))) => out.push((d, u.abs())),
            _ => return Err(Error::Config(format!("{}:{}: expected `d,abs_u`", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn rate_cmd(cfg: &RunConfig, seed: u64) -> Result<Products> {
    let mut p = Products::ok(serde_json::Value::Null);
    let (pairs, mu_theory, diameter, seminorm, window) = if let Some(path) = &cfg.profile_csv {
        let pairs = read_pairs(path)?;
        let mu = cfg.mu_theory.or_else(|| cfg.growth_params.as_ref().and_then(|g| g.mu().ok()));
        (pairs, mu, cfg.domain.as_ref().map(|d| d.diameter()), None, None)
    } else {
        let Some(sol) = solve_common(cfg, seed, Command::Rate, &mut p)? else {
            return Ok(p);
        };
        let s = sol.setup.as_ref().expect("rate always certifies");
        let cb = sol.barrier.as_ref().expect("rate always certifies");
        let frame = cb.barrier.frame();
        let mut e = vec![0.0; frame.dim()];
        e[frame.normal_axis] = 1.0;
        let normal = frame.vector_to_world(&e);
        let window = cfg.fit_window.unwrap_or_default();
        let profile = analysis::ray_profile(&sol.grid, &sol.state.u, &s.x0, &normal);
        let sel = window.select(&profile, sol.grid.h(), s.domain.diameter());
        let mu = cfg.mu_theory.or_else(|| sol.model.params().mu().ok());
        let semi = mu.map(|m| {
            analysis::empirical_holder_seminorm(
                sol.grid.points(),
                &sol.state.u,
                m,
                analysis::DEFAULT_PAIR_COUNT,
                seed,
            )
        });
        (sel, mu, Some(s.domain.diameter()), semi, Some(window))
    };
    let mut report = analysis::fit_rate(&pairs)?;
    if let Some(m) = mu_theory {
        report = report.with_theory(m);
    }
    let c_bound = 1.1 * report.c_fitted;
    let bound_check = mu_theory.map(|m| analysis::check_bound(&pairs, m, c_bound));
    let out = RateOutput {
        holder_constant: match (mu_theory, diameter) {
            (Some(m), Some(d)) => Some(analysis::holder_constant(c_bound, m, d)),
            _ => None,
        },
        empirical_seminorm: seminorm,
        bound_constant: c_bound,
        bound_check: bound_check.clone(),
        report,
        fit_window: window,
    };
    if let Some(b) = &bound_check {
        if !b.passed {
            p.fail(
                exit::BOUND_VIOLATION,
                format!("|u| <= C d^mu fails: worst ratio {} at d = {}", b.worst_ratio, b.worst_pair.0),
            );
        }
    }
    let summary = serde_json::json!({
        "mu_fitted": out.report.mu_fitted, "C_fitted": out.report.c_fitted, "mu_theory": mu_theory,
        "bound_passed": bound_check.as_ref().map(|b| b.passed),
    });
    if p.code == exit::OK || p.code == exit::BOUND_VIOLATION {
        p.summary = summary;
    }
    println!("mu_fitted = {:.17}  C_fitted = {:.17}", out.report.mu_fitted, out.report.c_fitted);
    p.json("rate.json", &out)?;
    let mut csv = Vec::new();
    analysis::write_pairs_csv(&mut csv, &pairs)?;
    p.files.push(("profile.csv".into(), csv));
    Ok(p)
}

pub const RESIDUAL_TOL: f64 = 1e-6;
pub const RATE_TOL: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub example: ExactKind,
    pub n: usize,
    pub hessian: String,
    pub points: usize,
    pub max_residual: f64,
    pub mu_expected: f64,
    pub mu_fitted: f64,
    pub passed: bool,
}

/// Residual maxima at `points` interior samples and the boundary-rate fit on
/// `d in [1e-4, 1e-1]` for each exact solution and each `n`.
pub fn example_table(dims: &[usize], points: usize, seed: u64) -> Result<Vec<ExampleRow>> {
    let mut rows = Vec::new();
    for &n in dims {
        for kind in [ExactKind::Ball, ExactKind::Cylinder, ExactKind::Cone] {
            let ex = ExactSolution { kind, n };
            let source = if kind == ExactKind::Ball { HessianSource::ClosedForm } else { HessianSource::FiniteDifference };
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 8) ^ kind as u64);
            let mut worst: f64 = 0.0;
            for x in ex.sample_points(points, &mut rng) {
                worst = worst.max(ex.residual(&x, source)?);
            }
            let profile = ex.normal_profile(&analysis::log_spaced(1e-4, 1e-1, 40))?;
            let fit = analysis::fit_rate(&profile)?;
            let expected = ex.boundary_exponent();
            rows.push(ExampleRow {
                example: kind,
                n,
                hessian: match source {
                    HessianSource::ClosedForm => "closed_form".into(),
                    HessianSource::FiniteDifference => "finite_difference".into(),
                },
                points,
                max_residual: worst,
                mu_expected: expected,
                mu_fitted: fit.mu_fitted,
                passed: worst <= RESIDUAL_TOL && (fit.mu_fitted - expected).abs() <= RATE_TOL,
            });
        }
    }
    Ok(rows)
}

fn verify_examples(seed: u64) -> Result<Products> {
    let rows = example_table(&[2, 3], 1000, seed)?;
    let mut csv = String::from("example,n,hessian,points,max_residual,mu_expected,mu_fitted,passed\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            serde_json::to_value(r.example)?.as_str().unwrap_or("?"),
            r.n,
            r.hessian,
            r.points,
            csv_float(r.max_residual),
            csv_float(r.mu_expected),
            csv_float(r.mu_fitted),
            r.passed
        );
        println!(
            "{:<9} n={} residual {:.3e}  mu {:.4} (expected {:.4})  {}",
            format!("{:?}", r.example).to_lowercase(),
            r.n,
            r.max_residual,
            r.mu_fitted,
            r.mu_expected,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    let all = rows.iter().all(|r| r.passed);
    let mut p = Products::ok(serde_json::json!({"all_passed": all, "rows": rows.len()}));
    if !all {
        p.fail(exit::BOUND_VIOLATION, "an exact-solution check failed".into());
    }
    p.json("examples.json", &rows)?;
    p.text("examples.csv", csv);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let text = r#"{
            "command": "solve",
            "domain": {"dim": 2, "constraints": [{"type": "ball", "center": [0, 0], "radius": 1}]},
            "rhs": {"kind": "pure_hyperbolic",
                    "growth_params": {"n": 2, "k": 1, "a": [2], "eta": [0.5], "alpha": 4, "beta": 3, "gamma": 0, "A": 1}},
            "contact_point": [0, -1],
            "convexity": {"k": 1, "a": [2], "eta": [0.5]},
            "solver": {"stencil_width": 3, "pairing": "conjugate"},
            "h": 0.125
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let once = serde_json::to_string(&cfg).unwrap();
        let twice = serde_json::to_string(&RunConfig::from_json(&once).unwrap()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(cfg.digest().unwrap(), RunConfig::from_json(&once).unwrap().digest().unwrap());
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let e = RunConfig::from_json(r#"{"bogus": 1}"#).unwrap_err();
        assert_eq!(exit_code(&e), exit::CONFIG);
        assert_eq!(exit_code(&RunConfig::from_json("{").unwrap_err()), exit::CONFIG);
    }

    #[test]
    fn exit_codes_are_distinct() {
        let mut codes = vec![
            exit::OK,
            exit::CONFIG,
            exit::PARAM_DOMAIN,
            exit::SEARCH_FAILURE,
            exit::NON_CONVERGENCE,
            exit::BOUND_VIOLATION,
            exit::RUNTIME,
        ];
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 7);
    }
}
