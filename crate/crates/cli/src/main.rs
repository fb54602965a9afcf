use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sigma_pinch::catalog::{build_catalog_manifold, CatalogId, Resolution};
use sigma_pinch::conformal::{transformation_check, ConformalFactor};
use sigma_pinch::curvature::CurvatureBundle;
use sigma_pinch::field::{MetricField, ScalarField};
use sigma_pinch::identities::{boundary_identities, conformal_laws_check, lemma_change_check};
use sigma_pinch::minimizer::{bochner_decomposition_check, minimize_ii, MinimizerConfig, QtProblem};
use sigma_pinch::operators::Geometry;
use sigma_pinch::pinching::{diagnose_geometry, PinchOptions};
use sigma_pinch::radial::RadialModel;
use sigma_pinch::solver::{conclusions, continuity_solve, SolverConfig};
use sigma_pinch::symmetric::cone_lemma_suite;
use sigma_pinch::{json as sjson, Error};

/// Relative tolerance of the verify suites.
const SUITE_TOLERANCE: f64 = 1e-3;
/// Tangential resolution of the verify grids; the test factors are radial.
const VERIFY_TANGENTIAL: usize = 16;
const T0_SNAP: f64 = 5e-5;

#[derive(Parser, Debug)]
#[command(name = "sigma-pinch", version, about = "Curvature reports, identity suites, the sigma_2 continuity solver and the Q/T minimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Curvature summary, integral invariants and pinching conditions.
    Report(Common),
    /// Run a property suite.
    Verify(VerifyArgs),
    /// Continuity method for the sigma_2 boundary problem.
    Solve(SolveArgs),
    /// Minimize the Q/T functional over radial Neumann fields.
    Minimize(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Catalog name, e.g. hemisphere4, round-sphere3, flat-torus3.
    #[arg(long)]
    manifold: Option<String>,
    #[arg(long)]
    radius: Option<f64>,
    /// Nodes on the first axis.
    #[arg(long)]
    n: Option<usize>,
    /// Coefficients c_k of a radial conformal factor exp(2 Σ c_k cos^k θ).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    perturb: Option<Vec<f64>>,
    /// TOML file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file for the JSON document (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON-lines trace file (solve, minimize).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "lowercase")]
enum Suite {
    Conformal,
    Sigma,
    Boundary,
}

/// Everything a run needs, merged from defaults, the config file and flags.
#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    manifold: Option<String>,
    radius: f64,
    n: Option<usize>,
    perturb: Vec<f64>,
    output: Option<PathBuf>,
    trace: Option<PathBuf>,
    suite: Option<Suite>,
    seed: u64,
    trials: usize,
    solver: SolverConfig,
    minimizer: MinimizerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifold: None,
            radius: 1.0,
            n: None,
            perturb: Vec::new(),
            output: None,
            trace: None,
            suite: None,
            seed: 7,
            trials: 10_000,
            solver: SolverConfig::default(),
            minimizer: MinimizerConfig::default(),
        }
    }
}

/// Failure with its exit code: 1 numerical, 2 validation, 3 continuation abort.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure { code: 2, kind: "validation", message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::UnknownManifold(_)
            | Error::InvalidParameter(_)
            | Error::ResolutionTooLow { .. }
            | Error::DimensionMismatch { .. }
            | Error::NoBoundary
            | Error::NotTotallyGeodesic { .. }
            | Error::NeumannViolation { .. } => (2, "validation"),
            Error::StepUnderflow { .. } => (3, "continuation"),
            _ => (1, "numerical"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

type Outcome = std::result::Result<(Value, bool), Failure>;

impl RunConfig {
    fn load(common: &Common) -> std::result::Result<Self, Failure> {
        let mut cfg = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if common.manifold.is_some() {
            cfg.manifold.clone_from(&common.manifold);
        }
        if let Some(r) = common.radius {
            cfg.radius = r;
        }
        if common.n.is_some() {
            cfg.n = common.n;
        }
        if let Some(p) = &common.perturb {
            cfg.perturb.clone_from(p);
        }
        if common.output.is_some() {
            cfg.output.clone_from(&common.output);
        }
        if common.trace.is_some() {
            cfg.trace.clone_from(&common.trace);
        }
        if !(cfg.radius > 0.0) {
            return Err(Failure::validation(format!("radius must be positive, got {}", cfg.radius)));
        }
        Ok(cfg)
    }

    fn catalog(&self, default: &str) -> std::result::Result<CatalogId, Failure> {
        let base = CatalogId::parse(self.manifold.as_deref().unwrap_or(default), self.radius)?;
        if self.perturb.is_empty() {
            return Ok(base);
        }
        if self.perturb.iter().skip(1).step_by(2).any(|c| *c != 0.0) && base.has_boundary() {
            return Err(Failure::validation("perturbations of a manifold with boundary must be even in cos θ"));
        }
        Ok(CatalogId::ConformalRadial { base: Box::new(base), coefficients: self.perturb.clone() })
    }

    fn nodes(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }
}

fn curvature_summary(curv: &CurvatureBundle, g: &MetricField) -> Value {
    let r = curv.scalar();
    let defects = curv.algebraic_defects(g);
    json!({
        "dimension": curv.dim(),
        "nodes": curv.grid().len(),
        "scalar_min": r.min(),
        "scalar_max": r.max(),
        "max_weyl_norm": curv.weyl_norm2().max_abs().sqrt(),
        "max_trace_free_ricci_norm": curv.trace_free_norm2().max_abs().sqrt(),
        "max_ricci_norm": curv.ricci_norm2().max_abs().sqrt(),
        "schur_residual": curv.schur_residual(),
        "symmetry_defect": defects.symmetry,
        "bianchi_defect": defects.bianchi,
    })
}

fn cmd_report(common: &Common) -> Outcome {
    let cfg = RunConfig::load(common)?;
    let id = cfg.catalog("hemisphere4")?;
    let (_, g) = build_catalog_manifold(&id, &Resolution::new(cfg.nodes(32)))?;
    let geo = Geometry::new(&g)?;
    let invariants = geo.invariants(id.euler_characteristic())?;
    let pinching = diagnose_geometry(&geo, &PinchOptions::default())?;
    let doc = json!({
        "manifold": id.label(),
        "n": cfg.nodes(32),
        "curvature_summary": curvature_summary(&geo.curvature, &g),
        "invariants": invariants,
        "yamabe_is_proxy": pinching.yamabe_is_proxy,
        "pinching": pinching,
    });
    Ok((doc, true))
}

fn residual_entry(name: &str, relative: f64) -> Value {
    json!({"name": name, "relative": relative, "passed": relative <= SUITE_TOLERANCE})
}

fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let mut cfg = RunConfig::load(&args.common)?;
    if args.suite.is_some() {
        cfg.suite = args.suite;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    let suite = cfg.suite.ok_or_else(|| Failure::validation("--suite is required"))?;
    match suite {
        Suite::Sigma => {
            let reports = [3, 4].map(|n| cone_lemma_suite(cfg.seed, cfg.trials, n));
            let mut out = Vec::new();
            let mut passed = true;
            for r in reports {
                let r = r?;
                passed &= r.passed();
                out.push(serde_json::to_value(&r).expect("report serializes"));
            }
            Ok((json!({"suite": "sigma", "seed": cfg.seed, "trials": cfg.trials, "reports": out, "passed": passed}), passed))
        }
        Suite::Conformal => {
            let id = cfg.catalog("hemisphere4")?;
            let n = cfg.nodes(32);
            let res = Resolution::new(n).with_tangential(VERIFY_TANGENTIAL.min(n));
            let (grid, g) = build_catalog_manifold(&id, &res)?;
            let w = ScalarField::from_fn(grid.clone(), |x| 0.1 * (2.0 * x[0]).cos() + 0.05 * x[0].cos().powi(3));
            let mut checks = Vec::new();
            if id.dim() == 4 {
                let factor = if id.has_boundary() {
                    ConformalFactor::expand(w.clone()).with_neumann()?
                } else {
                    ConformalFactor::expand(w.clone())
                };
                let phi = ScalarField::from_fn(grid.clone(), |x| 0.3 * x[0].cos() + 0.1 * x[0].cos().powi(2));
                for r in conformal_laws_check(&g, &factor, &phi)?.residuals {
                    checks.push(residual_entry(&r.name, r.relative));
                }
            }
            for t in [0.0, 0.5, 1.0] {
                let c = transformation_check(&g, &ConformalFactor::shrink(w.clone()), t)?;
                checks.push(residual_entry(&format!("transformation-t{t}"), c.relative));
            }
            if id.dim() == 3 {
                let u = ScalarField::from_fn(grid.clone(), |x| 0.2 * (2.0 * x[0]).cos());
                let c = lemma_change_check(&g, &u)?;
                checks.push(residual_entry("change-general", c.general.relative));
                if id.has_boundary() {
                    checks.push(residual_entry("change-specialized", c.specialized.relative));
                }
            }
            if id.dim() == 4 {
                let u = ScalarField::from_fn(grid.clone(), |x| (2.0 * x[0]).cos());
                let b = bochner_decomposition_check(&Geometry::new(&g)?, &u)?;
                checks.push(residual_entry("bochner-decomposition", b.relative));
            }
            if id.has_boundary() {
                let u = ScalarField::from_fn(grid.clone(), |x| 0.3 * x[0].cos().powi(2) - 0.2 * x[0].cos().powi(4));
                let b = boundary_identities(&g, &u)?;
                checks.push(residual_entry("normal-gradient-norm", b.normal_gradient_norm));
                checks.push(residual_entry("schouten-mixed", b.schouten_mixed));
                checks.push(residual_entry("bochner", b.bochner.relative));
            }
            finish_suite("conformal", &id, n, checks)
        }
        Suite::Boundary => {
            let id = cfg.catalog("hemisphere3")?;
            let n = cfg.nodes(32);
            let res = Resolution::new(n).with_tangential(VERIFY_TANGENTIAL.min(n));
            let (grid, g) = build_catalog_manifold(&id, &res)?;
            let u = ScalarField::from_fn(grid.clone(), |x| 0.2 * (2.0 * x[0]).cos());
            let b = boundary_identities(&g, &u)?;
            let mut checks = vec![
                residual_entry("normal-gradient-norm", b.normal_gradient_norm),
                residual_entry("schouten-mixed", b.schouten_mixed),
                residual_entry("bochner", b.bochner.relative),
            ];
            if id.dim() == 3 {
                let c = lemma_change_check(&g, &u)?;
                checks.push(residual_entry("change-specialized", c.specialized.relative));
            }
            finish_suite("boundary", &id, n, checks)
        }
    }
}

fn finish_suite(name: &str, id: &CatalogId, n: usize, checks: Vec<Value>) -> Outcome {
    let passed = checks.iter().all(|c| c["passed"] == json!(true));
    let failures: Vec<Value> = checks.iter().filter(|c| c["passed"] != json!(true)).cloned().collect();
    Ok((json!({"suite": name, "manifold": id.label(), "n": n, "checks": checks, "failures": failures, "passed": passed}), passed))
}

fn write_trace(path: Option<&Path>, lines: &str) -> std::result::Result<(), Failure> {
    if let Some(p) = path {
        std::fs::write(p, lines).map_err(|e| Failure { code: 1, kind: "io", message: format!("{}: {e}", p.display()) })?;
    }
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Outcome {
    let mut cfg = RunConfig::load(&args.common)?;
    let id = cfg.catalog("hemisphere3")?;
    let mut sc = cfg.solver.clone();
    sc.dimension = id.dim();
    if let Some(t0) = args.t0 {
        sc.t0 = t0;
    }
    // a bound typed to four decimals (0.6667) means the bound itself
    let bound = if sc.dimension == 3 { 2.0 / 3.0 } else { 1.0 };
    let snapped = sc.t0 != bound && (sc.t0 - bound).abs() <= T0_SNAP;
    if snapped {
        sc.t0 = bound;
    }
    if let Some(a) = args.alpha {
        sc.alpha = a;
    }
    if let Some(n) = cfg.n {
        sc.nodes = n;
    }
    sc.validate()?;
    cfg.solver = sc.clone();
    let model = RadialModel::new(&id, sc.nodes)?;
    let state = continuity_solve(&model, &sc)?;
    write_trace(cfg.trace.as_deref(), &state.trace_lines())?;
    let report = conclusions(&model, &state, sc.alpha)?;
    let passed = report.passed();
    let doc = json!({
        "manifold": id.label(),
        "config": sc,
        "t0_snapped": snapped,
        "delta": state.delta,
        "t": state.t,
        "residual": state.residual,
        "min_cone_margin": state.min_margin(),
        "max_u": state.max_u,
        "min_u": state.min_u,
        "max_grad_u": state.max_grad_u,
        "steps": state.trace.len(),
        "theta": state.theta,
        "u": state.u,
        "conclusions": report,
        "passed": passed,
    });
    Ok((doc, passed))
}

fn cmd_minimize(common: &Common) -> Outcome {
    let cfg = RunConfig::load(common)?;
    let id = cfg.catalog("hemisphere4")?;
    let mut mc = cfg.minimizer.clone();
    if let Some(n) = cfg.n {
        mc.nodes = n;
    }
    let problem = QtProblem::new(&id, mc.nodes)?;
    let spectrum = problem.spectrum();
    let state = minimize_ii(&problem, &mc)?;
    write_trace(cfg.trace.as_deref(), &state.trace_lines())?;
    let el = problem.el_residual_of(&state)?.summary();
    let passed = el.passed;
    let spread = state.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - state.u.iter().copied().fold(f64::INFINITY, f64::min);
    let doc = json!({
        "manifold": id.label(),
        "config": mc,
        "spectrum": {
            "min_eigenvalue": spectrum.min_eigenvalue,
            "second_eigenvalue": spectrum.second_eigenvalue,
            "kernel_residual": spectrum.kernel_residual,
        },
        "II": state.value,
        "grad_norm": state.grad_norm,
        "iterations": state.iterations,
        "normalization_residual": state.normalization_residual,
        "mean": state.mean,
        "spread": spread,
        "theta": state.theta,
        "u": state.u,
        "el_residual": el,
        "passed": passed,
    });
    Ok((doc, passed))
}

fn output_path(cmd: &Command) -> Option<PathBuf> {
    let common = match cmd {
        Command::Report(c) | Command::Minimize(c) => c,
        Command::Verify(v) => &v.common,
        Command::Solve(s) => &s.common,
    };
    if common.output.is_some() {
        return common.output.clone();
    }
    RunConfig::load(common).ok().and_then(|c| c.output)
}

fn configure_threads() {
    let threads = std::env::var("SIGMA_PINCH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(1).max(1);
    // a second initialization only happens in tests that call main twice; ignore it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let outcome = match &cli.command {
        Command::Report(c) => cmd_report(c),
        Command::Verify(v) => cmd_verify(v),
        Command::Solve(s) => cmd_solve(s),
        Command::Minimize(c) => cmd_minimize(c),
    };
    let (doc, code) = match outcome {
        Ok((doc, passed)) => (doc, if passed { 0 } else { 1 }),
        Err(f) => {
            eprintln!("error: {}", f.message);
            (json!({"error": {"kind": f.kind, "message": f.message, "exit_code": f.code}}), f.code)
        }
    };
    let text = sjson::to_pretty(&doc) + "\n";
    match output_path(&cli.command) {
        Some(p) => {
            if let Err(e) = std::fs::write(&p, text) {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(code)
}
