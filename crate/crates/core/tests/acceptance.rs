//! Acceptance run at desk scale: n = 2, N = 8, rank 2, L = 2π, dealiasing
//! on, band-2 random data, pinned seeds. One line per criterion; the
//! process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ymbar::calculus::{bianchi_parts, relative, CheckStatus, OperatorReport};
use ymbar::cli::{run_suite, RunManifest, SuiteContext};
use ymbar::flow::{self, FlowConfig, FlowRun};
use ymbar::functional::{classify, lambda_lambda_bracket, ymbar, ymbar_gradient, ymbar_gradient_projected, HolomorphyClass};
use ymbar::{gauge_complex_hat, gauge_unitary, par, Connection, FormPQ, GaugeTransform, TorusGeometry, C64};

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn torus() -> Arc<TorusGeometry> {
    TorusGeometry::new(2, 8, 2.0 * PI, true).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_connection(seed: u64) -> Connection {
    Connection::random(&torus(), 2, 0.1, 2, &mut rng(seed)).unwrap()
}

/// Reports whose name starts with one of `prefixes`; all must pass (skips
/// are tolerated only for structurally empty bidegrees). `tol_for` may
/// tighten a check; `None` keeps the suite's own tolerance.
fn from_reports(reports: &[OperatorReport], prefixes: &[&str], tol_for: impl Fn(&str) -> Option<f64>) -> Outcome {
    let picked: Vec<&OperatorReport> =
        reports.iter().filter(|r| prefixes.iter().any(|p| r.name.starts_with(p))).collect();
    if picked.is_empty() {
        return Outcome::new(false, "no matching checks ran");
    }
    let mut worst = (0.0f64, "");
    let mut pass = true;
    for r in &picked {
        let tol = tol_for(&r.name).unwrap_or(r.tolerance);
        let ok = match r.status {
            CheckStatus::Skip => true,
            _ => r.passed() && r.residual <= tol,
        };
        pass &= ok;
        if r.status != CheckStatus::Skip && r.residual / tol >= worst.0 {
            worst = (r.residual / tol, &r.name);
        }
    }
    let ran = picked.iter().filter(|r| r.status != CheckStatus::Skip).count();
    Outcome::new(pass, format!("{ran} checks, worst {} at {:.2} of tolerance", worst.1, worst.0))
}

fn hodge_kahler(reports: &[OperatorReport]) -> Outcome {
    from_reports(reports, &["forms.", "kahler."], |name| {
        Some(if name.starts_with("kahler.") { 1e-9 } else { 1e-12 })
    })
}

fn adjoint_exactness(reports: &[OperatorReport]) -> Outcome {
    from_reports(reports, &["adjoint."], |name| Some(if name.starts_with("adjoint.routes") { 1e-10 } else { 1e-12 }))
}

/// `d_A F = 0` part by part. On a complex surface the `(0,3)` part is zero
/// for want of room; the substantive parts are `(2,1)` and `(1,2)`.
fn bianchi() -> Outcome {
    let results = par::map_range(10, |i| {
        let a = random_connection(100 + i as u64);
        let scale = a.geom().wavenumber(1) * a.curvature().norm();
        let mut structural = 0.0f64;
        let mut substantive = 0.0f64;
        for ((p, q), part) in bianchi_parts(&a) {
            if p > 2 || q > 2 {
                structural = structural.max(part.norm().abs());
            } else {
                substantive = substantive.max(relative(part.norm(), scale));
            }
        }
        (structural, substantive)
    });
    let structural = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Outcome::new(
        structural == 0.0 && worst <= 1e-9,
        format!("10 seeds, worst relative (2,1)/(1,2) part {worst:.2e}, (0,3) part {structural:.1e}"),
    )
}

/// `t ↦ YM^b(A + t a)` is a quartic, so the five-point stencil gives the
/// exact derivative; the centered difference must approach it at order two.
fn first_variation() -> Outcome {
    let a = random_connection(SEED);
    let dir = FormPQ::random(a.geom(), 2, (0, 1), 2, 0.3, &mut rng(SEED + 7)).unwrap();
    let e = |t: f64| ymbar(&a.with_a01(a.a01().axpy(C64::new(t, 0.0), &dir)).unwrap());
    let h = 0.05;
    let exact = (8.0 * (e(h) - e(-h)) - (e(2.0 * h) - e(-2.0 * h))) / (12.0 * h);
    let predicted = ymbar_gradient(&a).inner(&dir);
    let oracle = relative((predicted - exact).abs(), exact.abs());
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&t| ((e(t) - e(-t)) / (2.0 * t) - predicted).abs()).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let in_band = ratios.iter().all(|r| (3.5..=4.5).contains(r));
    Outcome::new(
        in_band && oracle <= 1e-8,
        format!("ratios {:.4}, {:.4}; gradient pairing vs stencil {oracle:.1e}", ratios[0], ratios[1]),
    )
}

fn corollaries(reports: &[OperatorReport]) -> Outcome {
    from_reports(reports, &["corollary."], |_| Some(1e-9))
}

fn weitzenbock(reports: &[OperatorReport]) -> Outcome {
    from_reports(reports, &["weitzenbock."], |name| {
        Some(if name.starts_with("weitzenbock.closed_form") { 1e-10 } else { 1e-9 })
    })
}

/// Suite checks plus a hand oracle: with `f` the `dz̄_1∧dz̄_2` coefficient,
/// `⟨[θ, F^{0,2}], F^{0,2}⟩ = 4 Re Tr(θ[f, f^*])` and
/// `⟨θ, ΛΛ[F^{0,2}∧F^{2,0}]⟩ = −8 Re Tr(θ[f, f^*])` pointwise.
fn integrability(reports: &[OperatorReport]) -> (Outcome, String) {
    let suite = from_reports(reports, &["integrability."], |name| {
        Some(match name {
            "integrability.pointwise" => 1e-10,
            "integrability.affine" => 1e-12,
            _ => 1e-9,
        })
    });
    let a = random_connection(SEED);
    let theta = FormPQ::random(a.geom(), 2, (0, 0), 2, 1.0, &mut rng(SEED + 11)).unwrap();
    let th = &theta.components()[0];
    let f02 = a.f02();
    let f = &f02.components()[0];
    let comm = f.matmul(&f.adjoint()).sub(&f.adjoint().matmul(f));
    let re_tr = |x: &ymbar::MatrixField| {
        let t = x.trace();
        t.add(&t.adjoint()).scale_re(0.5)
    };
    let oracle = re_tr(&th.matmul(&comm));
    let ll = FormPQ::from_components(0, 0, vec![lambda_lambda_bracket(&a)]).unwrap();
    let lhs = f02.bracket_with(th).pointwise_inner(&f02);
    let pair = theta.pointwise_inner(&ll);
    let scale = oracle.max_abs();
    let lhs_dev = lhs.max_abs_diff(&oracle.scale_re(4.0)) / (4.0 * scale);
    let ll_dev = pair.max_abs_diff(&oracle.scale_re(-8.0)) / (8.0 * scale);
    let doubled = relative(lhs.add(&pair.scale_re(2.0)).max_abs(), lhs.max_abs().max(2.0 * pair.max_abs()));
    let pass = suite.pass && lhs_dev <= 1e-12 && ll_dev <= 1e-12;
    let detail = format!("{}; hand oracle {:.1e}/{:.1e}", suite.detail, lhs_dev, ll_dev);
    let info = format!("pointwise residual with the coefficient 2 in place of 1/2: {doubled:.3}");
    (Outcome::new(pass, detail), info)
}

fn symbols(reports: &[OperatorReport]) -> Outcome {
    from_reports(reports, &["symbol."], |_| None)
}

/// Background `√-1 (dz_1∧dz_2 + dz̄_1∧dz̄_2)` on the trivial line bundle:
/// `‖F^{0,2}‖² = 4 · vol`, so `YM^b = 2 (2π)^4`.
fn fixture() -> Outcome {
    let g = torus();
    let a = Connection::holomorphic_pair_fixture(&g).unwrap();
    let f11_zero = a.f11().max_abs() == 0.0;
    let class = classify(&a, 1e-10).class;
    let want = 2.0 * (2.0 * PI).powi(4);
    let energy = relative((ymbar(&a) - want).abs(), want);
    let grad = ymbar_gradient(&a).norm().max(ymbar_gradient_projected(&a).norm());
    let dt = FlowConfig::for_geometry(&g, 0.2).dt0;
    let mut b = a.clone();
    for _ in 0..100 {
        b = flow::step(&b, dt).unwrap();
    }
    let drift = b.a01().sub(a.a01()).max_abs().max(relative((ymbar(&b) - ymbar(&a)).abs(), ymbar(&a)));
    let pass = f11_zero && class == HolomorphyClass::AlmostHolomorphic && energy <= 1e-12 && grad <= 1e-12 && drift <= 1e-11;
    Outcome::new(
        pass,
        format!(
            "F11 zero {f11_zero}, class {}, energy {energy:.1e}, gradient {grad:.1e}, 100-step drift {drift:.1e}",
            class.label()
        ),
    )
}

fn gauge() -> Outcome {
    let a = random_connection(SEED);
    let e0 = ymbar(&a);
    let curv = a.curvature();
    let rows = par::map_range(10, |i| {
        let mut r = rng(200 + i as u64);
        let u = GaugeTransform::random_unitary(a.geom(), 2, 1 + i % 2, &mut r).unwrap();
        let b = gauge_unitary(&a, &u).unwrap();
        let inv = relative((ymbar(&b) - e0).abs(), e0);
        let want = curv.conjugated(&u);
        let eq = relative(b.curvature().sub(&want).norm(), want.norm());
        let hat = gauge_complex_hat(&a, &u).unwrap();
        let hat_dev = relative(hat.a01().sub(b.a01()).norm(), b.a01().norm());
        (inv, eq, hat_dev)
    });
    let worst = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let (inv, eq, hat) = (worst(|r| r.0), worst(|r| r.1), worst(|r| r.2));
    Outcome::new(
        inv <= 1e-12 && eq <= 1e-12 && hat <= 1e-11,
        format!("10 gauges: energy {inv:.1e}, curvature {eq:.1e}, complex action {hat:.1e}"),
    )
}

fn flow_run(seed: u64, steps: usize) -> FlowRun {
    let a = random_connection(seed);
    let mut cfg = FlowConfig::for_geometry(a.geom(), 0.2);
    cfg.max_steps = steps;
    flow::run(&a, &cfg).unwrap()
}

fn flow_behaviour() -> Outcome {
    let runs = par::map_range(5, |i| flow_run(300 + i as u64, 200));
    let monotone = runs.iter().all(|r| r.trace.is_monotone());
    let mut worst_first = 0.0f64;
    for r in &runs {
        let acc: Vec<_> = r.trace.accepted().collect();
        let (r0, r1) = (acc[0], acc[1]);
        let predicted = r1.dt * r0.grad_norm * r0.grad_norm;
        worst_first = worst_first.max(relative((r0.energy - r1.energy - predicted).abs(), predicted));
    }
    // replay one seed on the sequential path and compare the prefix
    par::set_parallel(false);
    let replay = flow_run(300, 50);
    par::set_parallel(true);
    let same = replay.trace.records.iter().zip(&runs[0].trace.records).all(|(x, y)| {
        x.energy.to_bits() == y.energy.to_bits() && x.dt.to_bits() == y.dt.to_bits() && x.grad_norm.to_bits() == y.grad_norm.to_bits()
    });
    let decay: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.2e}", r.trace.accepted().last().unwrap().energy / r.trace.records[0].energy))
        .collect();
    Outcome::new(
        monotone && worst_first <= 0.2 && same,
        format!(
            "monotone {monotone}, first-step deviation {worst_first:.3}, bit-exact replay {same}, E_final/E_0 [{}]",
            decay.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let manifest = RunManifest::default();
    let ctx = SuiteContext::new(&manifest).expect("default manifest is valid");
    let reports = run_suite(&ctx).expect("suite runs");

    let (integ, integ_info) = integrability(&reports);
    let criteria: Vec<(&str, Outcome)> = vec![
        ("Hodge-Kahler identities", hodge_kahler(&reports)),
        ("adjoint exactness", adjoint_exactness(&reports)),
        ("Bianchi identity", bianchi()),
        ("first variation", first_variation()),
        ("Laplacian corollaries", corollaries(&reports)),
        ("Weitzenbock formulas", weitzenbock(&reports)),
        ("integrability", integ),
        ("principal symbols", symbols(&reports)),
        ("almost holomorphic fixture", fixture()),
        ("gauge invariance", gauge()),
        ("flow behaviour", flow_behaviour()),
    ];

    let mut failed = 0;
    for (i, (name, o)) in criteria.iter().enumerate() {
        println!("[{}] {:>2} {:<28} {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, name, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("[info]  7 {integ_info}");
    println!("{} of {} criteria passed in {:.0?}", criteria.len() - failed, criteria.len(), start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
