//! End-to-end acceptance run. Prints one line per criterion and exits non-zero
//! if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use sigma_pinch::catalog::{build_catalog_manifold, radial_polynomial, CatalogId, Resolution};
use sigma_pinch::conformal::{conformal_rebuild, transformation_check, ConformalFactor};
use sigma_pinch::curvature::compute_curvature;
use sigma_pinch::field::{MetricField, ScalarField};
use sigma_pinch::identities::{boundary_identities, conformal_laws_check, lemma_change_check};
use sigma_pinch::minimizer::{bochner_decomposition_check, minimize_ii, MinimizerConfig, QtProblem};
use sigma_pinch::operators::Geometry;
use sigma_pinch::pinching::margerin_wp;
use sigma_pinch::radial::RadialModel;
use sigma_pinch::solver::{conclusions, continuity_solve, residual, select_delta, SolverConfig};
use sigma_pinch::symmetric::cone_lemma_suite;
use sigma_pinch::Error;

/// One measured quantity against its bound.
struct Item {
    name: String,
    value: f64,
    bound: f64,
    ok: bool,
}

fn at_most(name: &str, value: f64, bound: f64) -> Item {
    Item { name: name.into(), value, bound, ok: value <= bound }
}

fn at_least(name: &str, value: f64, bound: f64) -> Item {
    Item { name: name.into(), value, bound, ok: value >= bound }
}

fn above(name: &str, value: f64, bound: f64) -> Item {
    Item { name: name.into(), value, bound, ok: value > bound }
}

fn flag(name: &str, ok: bool) -> Item {
    Item { name: name.into(), value: ok as u8 as f64, bound: 1.0, ok }
}

type Outcome = Result<Vec<Item>, Error>;

fn sphere(n: usize) -> CatalogId {
    CatalogId::RoundSphere { n, r: 1.0 }
}

fn hemisphere(n: usize) -> CatalogId {
    CatalogId::Hemisphere { n, r: 1.0 }
}

fn radial(base: CatalogId, c: &[f64]) -> CatalogId {
    CatalogId::ConformalRadial { base: Box::new(base), coefficients: c.to_vec() }
}

fn metric(id: &CatalogId, res: Resolution) -> Result<MetricField, Error> {
    Ok(build_catalog_manifold(id, &res)?.1)
}

/// `R̃ = e^{−2w}(12 − 6Δw − 6|∇w|²)` for `e^{2w}` times the unit 4-sphere, radial `w`.
fn conformal_scalar4(c: &[f64], theta: f64) -> f64 {
    let (s, co) = theta.sin_cos();
    let (mut d1, mut d2) = (0.0, 0.0);
    for (k, ck) in c.iter().enumerate().skip(1) {
        let k = k as i32;
        d1 -= ck * k as f64 * co.powi(k - 1) * s;
        d2 -= ck * k as f64 * co.powi(k);
        if k >= 2 {
            d2 += ck * (k * (k - 1)) as f64 * co.powi(k - 2) * s * s;
        }
    }
    let lap = d2 + 3.0 * co / s * d1;
    (-2.0 * radial_polynomial(c, theta)).exp() * (12.0 - 6.0 * lap - 6.0 * d1 * d1)
}

fn scalar_error4(c: &[f64], n: usize) -> Result<f64, Error> {
    let g = metric(&radial(sphere(4), c), Resolution::new(n).with_tangential(16))?;
    let r = compute_curvature(&g)?.scalar();
    let grid = g.grid();
    Ok((0..grid.len()).map(|l| (r.values[l] - conformal_scalar4(c, grid.coords(l)[0])).abs()).fold(0.0, f64::max))
}

fn curvature_oracle() -> Outcome {
    let start = Instant::now();
    let g = metric(&sphere(4), Resolution::new(64))?;
    let c = compute_curvature(&g)?;
    let (mut r, mut ric, mut w) = (0.0f64, 0.0f64, 0.0f64);
    for l in 0..g.grid().len() {
        r = r.max((c.scalar_at(l) - 12.0).abs());
        let (m, gm) = (c.ricci_at(l), g.at(l));
        for i in 0..4 {
            for j in 0..4 {
                ric = ric.max((m[i][j] - 3.0 * gm[i][j]).abs());
            }
        }
        w = w.max(c.norms_at(l).0.max(0.0).sqrt());
    }
    let oracle_seconds = start.elapsed().as_secs_f64();
    let coefficients = [0.0, 0.3, 0.2];
    let (e32, e64) = (scalar_error4(&coefficients, 32)?, scalar_error4(&coefficients, 64)?);
    Ok(vec![
        at_most("max|R-12|", r, 1e-5),
        at_most("max|Ric-3g|", ric, 1e-5),
        at_most("max|W|", w, 1e-8),
        at_least("order(32,64)", (e32 / e64).log2(), 3.0),
        at_most("seconds", oracle_seconds, 60.0),
    ])
}

fn sigma2_identities() -> Outcome {
    let mut worst = [0.0f64; 2];
    let ids = [
        sphere(4),
        hemisphere(4),
        radial(sphere(4), &[0.0, 0.3, 0.2]),
        radial(hemisphere(4), &[0.0, 0.0, 0.2]),
        CatalogId::FlatTorus { n: 4 },
        sphere(3),
        hemisphere(3),
        radial(sphere(3), &[0.0, 0.3, 0.2]),
        radial(hemisphere(3), &[0.0, 0.0, 0.2]),
        CatalogId::FlatTorus { n: 3 },
    ];
    for id in &ids {
        let g = metric(id, Resolution::new(24).with_tangential(12))?;
        let geo = Geometry::new(&g)?;
        let s2 = geo.sigma2()?;
        let n = g.dim();
        for l in 0..g.grid().len() {
            let r = geo.curvature.scalar_at(l);
            let (_, e2, ric2) = geo.curvature.norms_at(l);
            let formula = if n == 4 { r * r / 96.0 - e2 / 8.0 } else { 3.0 / 16.0 * r * r - 0.5 * ric2 };
            let k = n - 3;
            worst[k] = worst[k].max((s2.values[l] - formula).abs() / formula.abs().max(1.0));
        }
    }
    Ok(vec![at_most("n=3", worst[0], 1e-8), at_most("n=4", worst[1], 1e-8)])
}

fn reference_values() -> Outcome {
    let res = || Resolution::new(48).with_tangential(16);
    let hemi = Geometry::new(&metric(&hemisphere(4), res())?)?.invariants(1)?;
    let closed = Geometry::new(&metric(&sphere(4), res())?)?.invariants(2)?;
    let kappa = hemi.kappa_total.unwrap_or(f64::NAN);
    let target = 8.0 * 3f64.sqrt() * PI;
    Ok(vec![
        at_most("kappa rel", (kappa - 4.0 * PI * PI).abs() / (4.0 * PI * PI), 1e-4),
        at_most("yamabe rel", (hemi.yamabe_quotient - target).abs() / target, 1e-4),
        at_most("gbc chi=1", hemi.gbc_residual.unwrap_or(f64::NAN).abs(), 1e-3 * 4.0 * PI * PI),
        at_most("gbc chi=2", closed.gbc_residual.unwrap_or(f64::NAN).abs(), 1e-3 * 4.0 * PI * PI),
    ])
}

fn sigma_suite() -> Outcome {
    let start = Instant::now();
    let mut items = Vec::new();
    for n in [3, 4] {
        let r = cone_lemma_suite(7, 10_000, n)?;
        items.push(at_most(&format!("n={n} identity error"), r.max_identity_error, 1e-12));
        let violations: usize = r.checks.iter().map(|c| c.violations).sum();
        items.push(at_most(&format!("n={n} violations"), violations as f64, 0.0));
    }
    items.push(at_most("seconds", start.elapsed().as_secs_f64(), 10.0));
    Ok(items)
}

fn conformal_laws() -> Outcome {
    const TOL: f64 = 1e-3;
    let mut items = Vec::new();
    let res = || Resolution::new(96).with_tangential(16);
    let (grid, g) = build_catalog_manifold(&hemisphere(4), &res())?;
    let w = ScalarField::from_fn(grid.clone(), |x| 0.1 * (2.0 * x[0]).cos() + 0.05 * x[0].cos().powi(2));
    let phi = ScalarField::from_fn(grid.clone(), |x| 0.3 * x[0].cos() + 0.1 * x[0].cos().powi(2));
    for r in conformal_laws_check(&g, &ConformalFactor::expand(w.clone()).with_neumann()?, &phi)?.residuals {
        items.push(at_most(&r.name, r.relative, TOL));
    }
    for t in [0.0, 0.5, 1.0] {
        let c = transformation_check(&g, &ConformalFactor::shrink(w.clone()), t)?;
        items.push(at_most(&format!("transformation t={t}"), c.relative, TOL));
    }
    let u = ScalarField::from_fn(grid.clone(), |x| 0.3 * x[0].cos().powi(2) - 0.2 * x[0].cos().powi(4));
    let b = boundary_identities(&g, &u)?;
    items.push(at_most("boundary normal-gradient-norm", b.normal_gradient_norm, TOL));
    items.push(at_most("boundary schouten-mixed", b.schouten_mixed, TOL));
    items.push(at_most("boundary bochner", b.bochner.relative, TOL));
    let v = ScalarField::from_fn(grid, |x| (2.0 * x[0]).cos());
    items.push(at_most("bochner integral", bochner_decomposition_check(&Geometry::new(&g)?, &v)?.relative, TOL));
    let (grid3, g3) = build_catalog_manifold(&hemisphere(3), &res())?;
    let u3 = ScalarField::from_fn(grid3, |x| 0.2 * (2.0 * x[0]).cos());
    let c = lemma_change_check(&g3, &u3)?;
    items.push(at_most("change general", c.general.relative, TOL));
    items.push(at_most("change specialized", c.specialized.relative, TOL));
    Ok(items)
}

fn solver() -> Outcome {
    let start = Instant::now();
    let mut items = Vec::new();
    let nodes = 256;
    let id3 = radial(hemisphere(3), &[0.0, 0.0, 0.1]);
    let model = RadialModel::new(&id3, nodes)?;
    let (delta, f) = select_delta(&model, 2.0 / 3.0, 0.0, 1e-8)?;
    let r0 = residual(&model, &vec![0.0; model.len()], delta, &f, 0.0)?;
    items.push(at_most("residual(u=0, t=delta)", r0.iter().fold(0.0, |m, v| m.max(v.abs())), 1e-12));
    let cfg = SolverConfig { dimension: 3, t0: 2.0 / 3.0, nodes, ..SolverConfig::default() };
    let state = continuity_solve(&model, &cfg)?;
    let report = conclusions(&model, &state, 0.0)?;
    let ricci = report.get("ricci-lower").map_or(f64::NAN, |i| i.min_margin);
    items.push(above("n=3 ricci-lower margin", ricci, 0.0));
    items.push(flag("n=3 conclusions", report.passed()));

    let id4 = radial(hemisphere(4), &[0.0, 0.0, 0.1]);
    let model = RadialModel::new(&id4, nodes)?;
    let cfg = SolverConfig { dimension: 4, t0: 1.0, alpha: 1.0, nodes, ..SolverConfig::default() };
    let state = continuity_solve(&model, &cfg)?;
    let report = conclusions(&model, &state, 1.0)?;
    let weyl = report.get("sigma2-weyl").map_or(f64::NAN, |i| i.min_margin);
    items.push(above("n=4 sigma2 - |W|^2/16 margin", weyl, 0.0));
    items.push(flag("n=4 conclusions", report.passed()));
    let gt = conformal_rebuild(&model.g, &ConformalFactor::shrink(model.broadcast(&state.u)))?;
    let (_, wp) = margerin_wp(&gt)?;
    items.push(Item { name: "n=4 max WP".into(), value: wp, bound: 1.0 / 6.0, ok: wp < 1.0 / 6.0 });
    items.push(at_most("seconds", start.elapsed().as_secs_f64(), 300.0));
    Ok(items)
}

fn spectral() -> Outcome {
    let s = QtProblem::new(&hemisphere(4), 128)?.spectrum();
    let (grid, g) = build_catalog_manifold(&hemisphere(4), &Resolution::new(96).with_tangential(16))?;
    let u = ScalarField::from_fn(grid, |x| (2.0 * x[0]).cos() + 0.5 * x[0].cos().powi(2));
    let b = bochner_decomposition_check(&Geometry::new(&g)?, &u)?;
    Ok(vec![
        at_least("min eigenvalue", s.min_eigenvalue, -1e-8),
        above("second eigenvalue", s.second_eigenvalue, 0.0),
        at_most("kernel residual", s.kernel_residual, 1e-8),
        at_most("bochner", b.relative, 1e-3),
    ])
}

fn minimizer() -> Outcome {
    let perturbed = QtProblem::new(&radial(hemisphere(4), &[0.0, 0.0, 0.1]), 128)?;
    let u = perturbed.model.sample(|th| 0.05 * (2.0 * th).cos() - 0.03 * (4.0 * th).cos());
    let (v0, g0) = perturbed.value_and_gradient(&u);
    let mut translation = 0.0f64;
    for c in [-1.0, -0.3, 0.25, 1.0] {
        let v = perturbed.value_and_gradient(&u.iter().map(|x| x + c).collect::<Vec<_>>()).0;
        translation = translation.max((v - v0).abs() / v0.abs().max(1.0));
    }
    let dir = perturbed.model.sample(|th| 0.2 * (2.0 * th).cos() + 0.1 * (6.0 * th).cos() + 0.3);
    let h = 1e-5;
    let at = |s: f64| perturbed.value_and_gradient(&u.iter().zip(&dir).map(|(a, d)| a + s * d).collect::<Vec<_>>()).0;
    let fd = (at(h) - at(-h)) / (2.0 * h);
    let exact: f64 = g0.iter().zip(&dir).map(|(a, b)| a * b).sum();

    let nodes = 256;
    let round = QtProblem::new(&hemisphere(4), nodes)?;
    let cfg = MinimizerConfig { nodes, initial: vec![0.0, 0.1], ..MinimizerConfig::default() };
    let state = minimize_ii(&round, &cfg)?;
    let (lo, hi) = state.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let el = round.el_residual_of(&state)?;
    Ok(vec![
        at_most("translation", translation, 1e-9),
        at_most("gradient vs fd", (fd - exact).abs() / exact.abs().max(1.0), 1e-6),
        at_most("round oscillation", hi - lo, 1e-6),
        at_most("round el_residual", el.max(), 1e-5),
    ])
}

/// Exit code and stdout. A failed property check still has to be reproducible.
fn run_cli(args: &[&str]) -> Option<(Option<i32>, Vec<u8>)> {
    let out = Command::new(env!("CARGO_BIN_EXE_sigma-pinch")).args(args).output().ok()?;
    Some((out.status.code(), out.stdout))
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("sigma-pinch-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| Error::InvalidParameter(format!("temp dir: {e}")))?;
    let trace = |k: usize| dir.join(format!("trace{k}.jsonl"));
    let read = |p: &Path| std::fs::read(p).unwrap_or_default();
    let mut items = Vec::new();
    let runs: [Vec<String>; 5] = [
        ["report", "--manifold", "hemisphere4", "--n", "16"].map(String::from).to_vec(),
        ["verify", "--suite", "sigma", "--trials", "2000", "--seed", "7"].map(String::from).to_vec(),
        ["solve", "--manifold", "hemisphere3", "--t0", "0.6667", "--n", "64", "--perturb", "0,0,0.1"]
            .map(String::from)
            .to_vec(),
        ["minimize", "--manifold", "hemisphere4", "--n", "64"].map(String::from).to_vec(),
        ["minimize", "--manifold", "hemisphere4", "--n", "64", "--perturb", "0,0,0.1"].map(String::from).to_vec(),
    ];
    for args in runs {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            let path = trace(k);
            let p = path.to_string_lossy().into_owned();
            let traced = matches!(a[0], "solve" | "minimize");
            if traced {
                a.extend(["--trace", p.as_str()]);
            }
            let stdout = run_cli(&a);
            outputs.push((stdout, if traced { read(&path) } else { Vec::new() }));
        }
        let same = match (&outputs[0], &outputs[1]) {
            ((Some(a), ta), (Some(b), tb)) => a == b && ta == tb && !a.1.is_empty(),
            _ => false,
        };
        items.push(flag(&args.join(" "), same));
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(items)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("curvature oracle", curvature_oracle),
        ("sigma2 algebraic identities", sigma2_identities),
        ("kappa, yamabe and gauss-bonnet values", reference_values),
        ("sigma_k property suite", sigma_suite),
        ("conformal law suite", conformal_laws),
        ("continuity solver", solver),
        ("spectral claims", spectral),
        ("minimizer", minimizer),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(items) => {
                let ok = items.iter().all(|i| i.ok);
                let detail: Vec<String> = items
                    .iter()
                    .map(|i| format!("{}{} {:.3e} (bound {:.1e})", if i.ok { "" } else { "FAILED " }, i.name, i.value, i.bound))
                    .collect();
                (ok, detail.join("; "))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {} {} {name} [{:.1}s]: {detail}",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
