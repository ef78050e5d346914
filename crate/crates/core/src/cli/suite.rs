//! The identity suite behind `verify`.
//!
//! Every check draws its random data from its own ChaCha stream keyed by
//! the manifest seed and the check's position, so checks can run in any
//! order (or concurrently) and still reproduce bit-for-bit.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{
    bianchi_parts, bracket_lambda, d_a_real_projected, dbar_a, dbar_a_antisymmetrized, dbar_laplacian_via_d,
    dbar_star, dbar_star_frame, dbar_star_hodge, dbar_star_kahler, dbar_star_lambda, family_inner, laplacian,
    laplacian_difference_curvature, nabla_bar, nabla_bar_star, partial_a, partial_star, partial_star_hodge,
    partial_star_kahler, relative, weitz_r, weitz_r_closed, weitz_r_folded, CheckStatus, LaplacianKind,
    MixedForm, OperatorReport,
};
use crate::cli::manifest::RunManifest;
use crate::connection::{gauge_complex_hat, gauge_unitary, Background, Connection, GaugeTransform};
use crate::error::Result;
use crate::field::{MatrixField, C64, I, ONE};
use crate::flow;
use crate::forms::{basis_of, top_form_ratio, CoeffRule, FormPQ};
use crate::functional::{
    classify, integrability_p, lambda_lambda_bracket, symbol_check, ymbar, ymbar_gradient, HolomorphyClass,
    VariationProbe, INTEGRABILITY_COEFF,
};
use crate::geometry::{TangentVector, TorusGeometry};
use crate::par;

/// Round-off class: pointwise algebra and exact pairings.
const ALGEBRAIC: f64 = 1e-12;
/// Operator identities through products of band-limited fields.
const DISCRETE: f64 = 1e-9;
const ROUTES: f64 = 1e-10;

/// Everything a check needs. Built once per suite run.
pub struct SuiteContext {
    pub geom: Arc<TorusGeometry>,
    pub connection: Connection,
    pub manifest: RunManifest,
    label: String,
}

impl SuiteContext {
    pub fn new(m: &RunManifest) -> Result<Self> {
        let geom = TorusGeometry::new(m.n, m.grid, m.period, m.dealias)?;
        let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
        let connection = build_connection(&geom, m, &mut rng)?;
        let label = format!("n={} N={} r={} seed={}", m.n, m.grid, connection.rank(), m.seed);
        Ok(Self { geom, connection, manifest: m.clone(), label })
    }

    fn rank(&self) -> usize {
        self.connection.rank()
    }

    fn n(&self) -> usize {
        self.geom.n()
    }

    fn random(&self, (p, q): (usize, usize), rng: &mut ChaCha8Rng) -> FormPQ {
        FormPQ::random(&self.geom, self.rank(), (p, q), self.manifest.band, 1.0, rng).expect("bidegree within n")
    }

    /// Builds a report with the tolerance scaled. `products` marks checks
    /// whose residual depends on exact products; those are flagged rather
    /// than failed when dealiasing is off.
    fn report(&self, name: &str, residual: f64, tol: f64, products: bool, extra: &str) -> OperatorReport {
        let context = if extra.is_empty() { self.label.clone() } else { format!("{} {extra}", self.label) };
        let r = OperatorReport::check(name, residual, tol * self.manifest.tol_scale, context);
        if products && !self.manifest.dealias {
            r.flag_failure()
        } else {
            r
        }
    }

    fn skip(&self, name: &str, why: &str) -> OperatorReport {
        OperatorReport::skipped(name, format!("{} {why}", self.label))
    }
}

/// The connection under test: random `a^{0,1}` with the manifest's
/// amplitude and band, on top of the constant background when requested.
pub fn build_connection(geom: &Arc<TorusGeometry>, m: &RunManifest, rng: &mut ChaCha8Rng) -> Result<Connection> {
    let a = Connection::random(geom, m.rank, m.amplitude, m.band, rng)?;
    if m.background {
        Connection::new(a.a01().clone(), Some(Background::holomorphic_pair()))
    } else {
        Ok(a)
    }
}

type Check = fn(&SuiteContext, &mut ChaCha8Rng) -> Result<Vec<OperatorReport>>;

const CHECKS: &[Check] = &[
    star_pairing,
    contraction_normalization,
    contraction_commutators,
    lambda_adjoint,
    elementary_adjoints,
    kahler_identities,
    pairing_defects,
    adjoint_routes,
    corollaries_0q,
    laplacian_corollaries,
    bianchi,
    first_variation,
    weitzenbock,
    frames,
    integrability,
    symbols,
    fixture,
    gauge,
];

/// Runs every check. Order of the returned reports is fixed.
pub fn run_suite(ctx: &SuiteContext) -> Result<Vec<OperatorReport>> {
    let seed = ctx.manifest.seed;
    let results = par::map_range(CHECKS.len(), |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        CHECKS[i](ctx, &mut rng)
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Summary {
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
    pub flagged: usize,
}

impl Summary {
    pub fn of(reports: &[OperatorReport]) -> Self {
        let mut s = Self { total: reports.len(), ..Self::default() };
        for r in reports {
            match r.status {
                CheckStatus::Pass => s.pass += 1,
                CheckStatus::Fail => s.fail += 1,
                CheckStatus::Skip => s.skip += 1,
                CheckStatus::Flagged => s.flagged += 1,
            }
        }
        s
    }

    /// Every check that ran passed.
    pub fn ok(&self) -> bool {
        self.fail == 0 && self.flagged == 0
    }

    pub fn to_text(&self) -> String {
        format!(
            "summary.total = {}\nsummary.pass = {}\nsummary.fail = {}\nsummary.flagged = {}\nsummary.skip = {}\nsummary.status = {}\n",
            self.total,
            self.pass,
            self.fail,
            self.flagged,
            self.skip,
            if self.ok() { "pass" } else { "fail" }
        )
    }
}

fn rel(x: &FormPQ, y: &FormPQ) -> f64 {
    relative(x.sub(y).norm(), x.norm().max(y.norm()))
}

fn bidegrees(n: usize) -> Vec<(usize, usize)> {
    (0..=n).flat_map(|p| (0..=n).map(move |q| (p, q))).collect()
}

fn fmt_worst(worst: Option<(usize, usize)>) -> String {
    worst.map_or(String::new(), |(p, q)| format!("worst=({p},{q})"))
}

/// `⟨α, β⟩ = −λ Tr(top coefficient of α ∧ *̄β)` pointwise, complex-valued,
/// with `e_top = λ vol`.
fn star_pairing(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let n = ctx.n();
    let lambda = top_form_ratio(n);
    let (mut worst, mut at) = (0.0f64, None);
    for (p, q) in bidegrees(n) {
        let alpha = ctx.random((p, q), rng);
        let beta = ctx.random((p, q), rng);
        let mut lhs = MatrixField::zeros(&ctx.geom, 1);
        for (a, b) in alpha.components().iter().zip(beta.components()) {
            lhs = lhs.add(&a.herm_pair(b));
        }
        let lhs = lhs.scale_re(f64::from(1u32 << (p + q)));
        let w = alpha.wedge(&beta.hodge_star_bar(), CoeffRule::Plain)?;
        let rhs = w.components()[0].trace().scale(-lambda);
        let r = relative(lhs.max_abs_diff(&rhs), lhs.max_abs());
        if r >= worst {
            (worst, at) = (r, Some((p, q)));
        }
    }
    Ok(vec![ctx.report("forms.star_pairing", worst, ALGEBRAIC, true, &fmt_worst(at))])
}

/// The factor 2 in contractions and `‖dz̄_1∧dz̄_2‖² = 4`.
fn contraction_normalization(ctx: &SuiteContext, _: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let g = &ctx.geom;
    let one = MatrixField::identity(g, 1);
    let val = |f: &FormPQ, i, k| f.component(i, k).data()[0];
    let mut err = 0.0f64;
    // i_1(dz_1 ∧ dz̄_1) = 2 dz̄_1
    let f = FormPQ::basis(one.clone(), 0b01, 0b01);
    err = err.max((val(&f.contract(0, false)?, 0, 0b01) - 2.0).norm());
    let mut extra = String::new();
    if ctx.n() >= 2 {
        // i_1(dz_2 ∧ dz̄_1) = 0, i_1(dz_1 ∧ dz̄_2) = 2 dz̄_2, ī_2(dz̄_1 ∧ dz̄_2) = −2 dz̄_1
        err = err.max(FormPQ::basis(one.clone(), 0b10, 0b01).contract(0, false)?.max_abs());
        let f = FormPQ::basis(one.clone(), 0b01, 0b10);
        err = err.max((val(&f.contract(0, false)?, 0, 0b10) - 2.0).norm());
        let f = FormPQ::basis(one.clone(), 0, 0b11);
        err = err.max((val(&f.contract(1, true)?, 0, 0b01) + 2.0).norm());
        let w = f.wedge(&f.hodge_star_bar(), CoeffRule::Plain)?;
        let norm = val(&w, 0b11, 0b11) * -top_form_ratio(2);
        err = err.max((norm - 4.0).norm());
        extra = format!("|dzb1^dzb2|^2={:.3}", norm.re);
    }
    Ok(vec![ctx.report("forms.contraction_normalization", err, ALGEBRAIC, false, &extra)])
}

/// `S = Σ_m ī_m i_m`, or `Σ_m i_m ī_m = −S` when `swapped`; `None` where
/// the result space is zero.
fn sum_contractions(phi: &FormPQ, swapped: bool) -> Result<Option<FormPQ>> {
    let (p, q) = phi.bidegree();
    if p == 0 || q == 0 {
        return Ok(None);
    }
    let mut acc: Option<FormPQ> = None;
    for m in 0..phi.n() {
        let t = if swapped {
            phi.contract(m, true)?.contract(m, false)?
        } else {
            phi.contract(m, false)?.contract(m, true)?
        };
        acc = Some(match acc {
            Some(s) => s.add(&t),
            None => t,
        });
    }
    Ok(acc)
}

/// `½[e∧, S]φ = ½(e ∧ Sφ − S(e ∧ φ))`, with zero spaces dropped.
fn half_commutator(phi: &FormPQ, k: usize, bar: bool, target: &FormPQ) -> Result<FormPQ> {
    let mut out = FormPQ::zero(phi.geom(), phi.rank(), target.bidegree().0, target.bidegree().1)?;
    if let Some(s) = sum_contractions(phi, bar)? {
        out = out.add(&s.ext(k, bar)?);
    }
    if let Some(s) = sum_contractions(&phi.ext(k, bar)?, bar)? {
        if s.bidegree() == out.bidegree() {
            out = out.sub(&s);
        }
    }
    Ok(out.scale_re(0.5))
}

/// `−ī_k = ½[dz_k∧, Σ ī_m i_m]` and its mirror `−i_k = ½[dz̄_k∧, Σ i_m ī_m]`
/// on every basis form. The mirror swaps the contraction order along with
/// the orientation; with `Σ ī_m i_m` kept, the sign of `i_k` flips, as the
/// elementary adjoint formula for `e_ji i_k` also says.
fn contraction_commutators(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let n = ctx.n();
    let mut errs = [0.0f64; 2];
    for (p, q) in bidegrees(n) {
        for (i, kk) in basis_of(n, p, q) {
            let coeff = FormPQ::random(&ctx.geom, ctx.rank(), (0, 0), 0, 1.0, rng)?.components()[0].clone();
            let phi = FormPQ::basis(coeff, i, kk);
            for k in 0..n {
                if q >= 1 {
                    let want = phi.contract(k, true)?.scale_re(-1.0);
                    let got = half_commutator(&phi, k, false, &want)?;
                    errs[0] = errs[0].max(got.sub(&want).max_abs());
                }
                if p >= 1 {
                    let want = phi.contract(k, false)?.scale_re(-1.0);
                    let got = half_commutator(&phi, k, true, &want)?;
                    errs[1] = errs[1].max(got.sub(&want).max_abs());
                }
            }
        }
    }
    Ok(vec![
        ctx.report("forms.contraction_commutator_dz", errs[0], ALGEBRAIC, false, "full basis"),
        ctx.report("forms.contraction_commutator_dzbar", errs[1], ALGEBRAIC, false, "full basis"),
    ])
}

/// `⟨ω ∧ α, β⟩ = ⟨α, Λβ⟩`.
fn lambda_adjoint(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let n = ctx.n();
    let omega = FormPQ::kahler(&ctx.geom, ctx.rank());
    let mut worst = 0.0f64;
    for p in 0..n {
        for q in 0..n {
            let alpha = ctx.random((p, q), rng);
            let beta = ctx.random((p + 1, q + 1), rng);
            let l = omega.wedge(&alpha, CoeffRule::Plain)?.inner(&beta);
            let r = alpha.inner(&beta.lambda());
            worst = worst.max(relative((l - r).abs(), alpha.norm() * beta.norm()));
        }
    }
    Ok(vec![ctx.report("forms.lambda_adjoint_of_omega", worst, ALGEBRAIC, true, "")])
}

/// For every elementary `A^{1,0} = e_ij dz_k` and `A^{0,1} = −(A^{1,0})^*`:
/// the pointwise adjoint of `[A^{0,1} ∧ ·]` is `√-1[A^{1,0}, Λ]` and that of
/// `[A^{1,0} ∧ ·]` is `−√-1[A^{0,1}, Λ]`. Checked on constant forms.
fn elementary_adjoints(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let (n, r) = (ctx.n(), ctx.rank());
    let g = &ctx.geom;
    let constant = |bideg, rng: &mut ChaCha8Rng| FormPQ::random(g, r, bideg, 0, 1.0, rng);
    let mut errs = [0.0f64; 2];
    for e in 0..r * r {
        for k in 0..n {
            let mut m = vec![C64::new(0.0, 0.0); r * r];
            m[e] = ONE;
            let a10 = FormPQ::basis(MatrixField::constant(g, r, &m), 1 << k, 0);
            let a01 = a10.conj_transpose().scale_re(-1.0);
            for (p, q) in bidegrees(n) {
                if q < n {
                    let phi = constant((p, q), rng)?;
                    let psi = constant((p, q + 1), rng)?;
                    let l = a01.wedge(&phi, CoeffRule::LieBracket)?.inner(&psi);
                    let adj = bracket_lambda(&a10, &psi).map(|f| f.scale(I));
                    let rr = adj.map_or(0.0, |f| phi.inner(&f));
                    errs[0] = errs[0].max(relative((l - rr).abs(), phi.norm() * psi.norm()));
                }
                if p < n {
                    let phi = constant((p, q), rng)?;
                    let psi = constant((p + 1, q), rng)?;
                    let l = a10.wedge(&phi, CoeffRule::LieBracket)?.inner(&psi);
                    let adj = bracket_lambda(&a01, &psi).map(|f| f.scale(-I));
                    let rr = adj.map_or(0.0, |f| phi.inner(&f));
                    errs[1] = errs[1].max(relative((l - rr).abs(), phi.norm() * psi.norm()));
                }
            }
        }
    }
    Ok(vec![
        ctx.report("forms.elementary_adjoint_01", errs[0], ALGEBRAIC, false, "all e_ij dz_k"),
        ctx.report("forms.elementary_adjoint_10", errs[1], ALGEBRAIC, false, "all e_ij dz_k"),
    ])
}

/// `∂̄_A^* = √-1[∂_A, Λ]` and `∂_A^* = −√-1[∂̄_A, Λ]` on every bidegree.
fn kahler_identities(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let a = &ctx.connection;
    let (mut wb, mut ab, mut wp, mut ap) = (0.0f64, None, 0.0f64, None);
    for (p, q) in bidegrees(ctx.n()) {
        let phi = ctx.random((p, q), rng);
        if q >= 1 {
            let r = rel(&dbar_star(a, &phi), &dbar_star_kahler(a, &phi));
            if r >= wb {
                (wb, ab) = (r, Some((p, q)));
            }
        }
        if p >= 1 {
            let r = rel(&partial_star(a, &phi), &partial_star_kahler(a, &phi));
            if r >= wp {
                (wp, ap) = (r, Some((p, q)));
            }
        }
    }
    Ok(vec![
        ctx.report("kahler.dbar_star_commutator", wb, DISCRETE, true, &fmt_worst(ab)),
        ctx.report("kahler.partial_star_commutator", wp, DISCRETE, true, &fmt_worst(ap)),
    ])
}

/// Summation by parts: `⟨Dφ, ψ⟩ = ⟨φ, D^*ψ⟩` for `∂̄_A`, `∂_A` and `∇̄_A`.
fn pairing_defects(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let a = &ctx.connection;
    let n = ctx.n();
    let (mut db, mut dp) = (0.0f64, 0.0f64);
    for (p, q) in bidegrees(n) {
        let phi = ctx.random((p, q), rng);
        if q < n {
            let psi = ctx.random((p, q + 1), rng);
            let d = dbar_a(a, &phi);
            let (l, r) = (d.inner(&psi), phi.inner(&dbar_star(a, &psi)));
            db = db.max(relative((l - r).abs(), d.norm() * psi.norm()));
        }
        if p < n {
            let psi = ctx.random((p + 1, q), rng);
            let d = partial_a(a, &phi);
            let (l, r) = (d.inner(&psi), phi.inner(&partial_star(a, &psi)));
            dp = dp.max(relative((l - r).abs(), d.norm() * psi.norm()));
        }
    }
    let mut nb = 0.0f64;
    for q in 1..=n {
        let phi = ctx.random((0, q), rng);
        let fam: Vec<FormPQ> = (0..n).map(|_| ctx.random((0, q), rng)).collect();
        let d = nabla_bar(a, &phi)?;
        let l = family_inner(&d, &fam);
        let r = phi.inner(&nabla_bar_star(a, &fam));
        let scale = family_inner(&d, &d).sqrt() * family_inner(&fam, &fam).sqrt();
        nb = nb.max(relative((l - r).abs(), scale));
    }
    Ok(vec![
        ctx.report("adjoint.pairing_dbar", db, ALGEBRAIC, true, ""),
        ctx.report("adjoint.pairing_partial", dp, ALGEBRAIC, true, ""),
        ctx.report("adjoint.pairing_nabla_bar", nb, ALGEBRAIC, true, ""),
    ])
}

/// Pairing adjoint, `−*̄D*̄` and the Kähler commutator agree pairwise.
fn adjoint_routes(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let a = &ctx.connection;
    let (mut wb, mut wp) = (0.0f64, 0.0f64);
    for (p, q) in bidegrees(ctx.n()) {
        let phi = ctx.random((p, q), rng);
        if q >= 1 {
            let routes = [dbar_star(a, &phi), dbar_star_hodge(a, &phi), dbar_star_kahler(a, &phi)];
            wb = wb.max(rel(&routes[0], &routes[1])).max(rel(&routes[0], &routes[2])).max(rel(&routes[1], &routes[2]));
        }
        if p >= 1 {
            let routes = [partial_star(a, &phi), partial_star_hodge(a, &phi), partial_star_kahler(a, &phi)];
            wp = wp.max(rel(&routes[0], &routes[1])).max(rel(&routes[0], &routes[2])).max(rel(&routes[1], &routes[2]));
        }
    }
    Ok(vec![
        ctx.report("adjoint.routes_dbar_star", wb, ROUTES, true, "pairing/star/commutator"),
        ctx.report("adjoint.routes_partial_star", wp, ROUTES, true, "pairing/star/commutator"),
    ])
}

/// On `(0,q)`-forms: `∂̄_A^* = −√-1 Λ∂_A`, and the integrated curvature
/// identity `⟨√-1 Λ[F^{1,1}∧φ], ψ⟩ = −⟨∂̄^*φ, ∂̄^*ψ⟩ + ⟨∂φ, ∂ψ⟩ − ⟨∂̄φ, ∂̄ψ⟩`.
fn corollaries_0q(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let a = &ctx.connection;
    let f11 = a.f11();
    let mut out = Vec::new();
    for q in [1, 2] {
        let (n1, n2) = (format!("corollary.dbar_star_lambda.0{q}"), format!("corollary.integrated_curvature.0{q}"));
        if q > ctx.n() {
            out.push(ctx.skip(&n1, "no (0,2)-forms on n=1"));
            out.push(ctx.skip(&n2, "no (0,2)-forms on n=1"));
            continue;
        }
        let phi = ctx.random((0, q), rng);
        let psi = ctx.random((0, q), rng);
        out.push(ctx.report(&n1, rel(&dbar_star(a, &phi), &dbar_star_lambda(a, &phi)), DISCRETE, true, ""));
        let lf = f11.wedge_or_vanish(&phi, CoeffRule::LieBracket)?.lambda();
        let lhs = if lf.bidegree() == (0, q) { lf.scale(I).inner(&psi) } else { 0.0 };
        let terms = [
            dbar_star(a, &phi).inner(&dbar_star(a, &psi)),
            partial_a(a, &phi).inner(&partial_a(a, &psi)),
            dbar_a(a, &phi).inner(&dbar_a(a, &psi)),
        ];
        let rhs = -terms[0] + terms[1] - terms[2];
        let scale = terms.iter().map(|t| t.abs()).fold(lhs.abs(), f64::max);
        out.push(ctx.report(&n2, relative((lhs - rhs).abs(), scale), DISCRETE, true, ""));
    }
    Ok(out)
}

/// `Δ^∂ − Δ^∂̄ = −√-1[F^{1,1}∧, Λ]` and
/// `Δ^∂̄ = ½(Δ^d + √-1[F^{1,1} − F^{2,0} + F^{0,2}, Λ])` on every bidegree.
fn laplacian_corollaries(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let a = &ctx.connection;
    let (mut w1, mut a1, mut w2, mut a2) = (0.0f64, None, 0.0f64, None);
    for (p, q) in bidegrees(ctx.n()) {
        let phi = ctx.random((p, q), rng);
        let lb = laplacian(a, &phi, LaplacianKind::Dbar);
        let diff = laplacian(a, &phi, LaplacianKind::Partial).sub(&lb);
        let rhs = laplacian_difference_curvature(a, &phi);
        // Against the Laplacian's size: both sides vanish for abelian connections.
        let r = relative(diff.sub(&rhs).norm(), diff.norm().max(rhs.norm()).max(lb.norm()));
        if r >= w1 {
            (w1, a1) = (r, Some((p, q)));
        }
        let via = dbar_laplacian_via_d(a, &phi);
        let r = relative(via.sub(&MixedForm::from_form(lb.clone())).norm(), lb.norm());
        if r >= w2 {
            (w2, a2) = (r, Some((p, q)));
        }
    }
    Ok(vec![
        ctx.report("corollary.laplacian_difference", w1, DISCRETE, true, &fmt_worst(a1)),
        ctx.report("corollary.dbar_laplacian_via_d", w2, DISCRETE, true, &fmt_worst(a2)),
    ])
}

/// `d_A F = 0` by bidegree, relative to `k_1 ‖F‖`.
fn bianchi(ctx: &SuiteContext, _: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let a = &ctx.connection;
    let n = ctx.n();
    let scale = ctx.geom.wavenumber(1) * a.curvature().norm();
    let mut out = Vec::new();
    for ((p, q), part) in bianchi_parts(a) {
        let name = format!("bianchi.part_{p}{q}");
        if p > n || q > n {
            out.push(ctx.skip(&name, &format!("({p},{q})-forms vanish identically for n={n}")));
        } else {
            out.push(ctx.report(&name, relative(part.norm(), scale), DISCRETE, true, ""));
        }
    }
    Ok(out)
}

/// Centered differences of `t ↦ YM^b(A + t a)` converge at second order.
fn first_variation(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let dir = FormPQ::random(&ctx.geom, ctx.rank(), (0, 1), ctx.manifest.band, 0.3, rng)?;
    let probe = VariationProbe::new(ctx.connection.clone(), dir, vec![1e-2, 5e-3, 2.5e-3])?;
    let res = probe.run()?;
    let ratios = res.ratios();
    let extra = ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(",");
    // For abelian connections the functional is quadratic in `a^{0,1}` and
    // centered differences are exact, so there is no ratio to measure.
    let scale = res.samples.iter().map(|s| s.1.abs()).fold(res.predicted.abs(), f64::max);
    let worst = res.samples.iter().map(|s| s.2).fold(0.0, f64::max);
    // Cancellation in `(E(t) − E(−t))/2t` bounds what is measurable.
    let t_min = res.samples.last().map_or(1.0, |s| s.0);
    let noise = 64.0 * f64::EPSILON * ymbar(&ctx.connection) / t_min;
    if worst <= (1e-10 * scale).max(noise) {
        let extra = format!("error {:.1e} at cancellation level, functional quadratic here", relative(worst, scale));
        return Ok(vec![ctx.report("variation.order_ratio_minus_4", 0.0, 0.5, true, &extra)]);
    }
    let dev = ratios.iter().map(|r| (r - 4.0).abs()).fold(0.0, f64::max);
    let dev = if dev.is_finite() { dev } else { f64::INFINITY };
    Ok(vec![ctx.report("variation.order_ratio_minus_4", dev, 0.5, true, &format!("ratios={extra}"))])
}

/// Flat-base Weitzenböck identities and the curvature-term forms.
fn weitzenbock(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let a = &ctx.connection;
    let mut out = Vec::new();
    for q in [1, 2] {
        let names = [
            format!("weitzenbock.flat_base.0{q}"),
            format!("weitzenbock.folded_frame.0{q}"),
            format!("weitzenbock.closed_form.0{q}"),
        ];
        if q > ctx.n() {
            for name in &names {
                out.push(ctx.skip(name, "no (0,2)-forms on n=1"));
            }
            continue;
        }
        let phi = ctx.random((0, q), rng);
        let lhs = laplacian(a, &phi, LaplacianKind::Dbar);
        let frame = weitz_r(a, &phi)?;
        let rhs = nabla_bar_star(a, &nabla_bar(a, &phi)?).add(&frame);
        out.push(ctx.report(&names[0], rel(&lhs, &rhs), DISCRETE, true, ""));
        out.push(ctx.report(&names[1], rel(&frame, &weitz_r_folded(a, &phi)?), ROUTES, true, ""));
        out.push(ctx.report(&names[2], rel(&frame, &weitz_r_closed(a, &phi)?), ROUTES, true, ""));
    }
    Ok(out)
}

fn random_antiholomorphic(n: usize, rng: &mut ChaCha8Rng) -> TangentVector {
    use rand::Rng;
    let mut v = TangentVector::zero(n);
    for k in 0..n {
        v.anti[k] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    v
}

/// Frame formulas: `∂̄_A^*` from covariant derivatives, `∂̄_A` as an
/// antisymmetrized covariant derivative, and `∂_A` as the `(1,0)`
/// projection of `d_A`.
fn frames(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let a = &ctx.connection;
    let n = ctx.n();
    let (mut rec, mut anti, mut proj) = (0.0f64, 0.0f64, 0.0f64);
    for q in 1..=n {
        let phi = ctx.random((0, q), rng);
        rec = rec.max(rel(&dbar_star(a, &phi), &dbar_star_frame(a, &phi)?));
        proj = proj.max(rel(&partial_a(a, &phi), &d_a_real_projected(a, &phi, true)));
        if q < n {
            proj = proj.max(rel(&dbar_a(a, &phi), &d_a_real_projected(a, &phi, false)));
            let vs: Vec<TangentVector> = (0..=q).map(|_| random_antiholomorphic(n, rng)).collect();
            let lhs = dbar_a(a, &phi).evaluate(&vs)?;
            let rhs = dbar_a_antisymmetrized(a, &phi, &vs)?;
            let scale = lhs.norm_sq().sqrt().max(rhs.norm_sq().sqrt());
            anti = anti.max(relative(lhs.sub(&rhs).norm_sq().sqrt(), scale));
        }
    }
    let anti = if n == 1 {
        ctx.skip("frames.antisymmetrized_dbar", "no (0,2)-forms on n=1")
    } else {
        ctx.report("frames.antisymmetrized_dbar", anti, ROUTES, true, "")
    };
    Ok(vec![
        ctx.report("frames.dbar_star_reconstruction", rec, ROUTES, true, ""),
        anti,
        ctx.report("frames.real_projection", proj, ROUTES, true, ""),
    ])
}

/// The affine integrability operator `P_A`.
fn integrability(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let names = [
        "integrability.pointwise",
        "integrability.global",
        "integrability.affine",
        "integrability.annihilates_gradient",
    ];
    if ctx.n() < 2 {
        return Ok(names.iter().map(|nm| ctx.skip(nm, "needs (0,2)-forms")).collect());
    }
    let a = &ctx.connection;
    let g = &ctx.geom;
    let r = ctx.rank();
    let f02 = a.f02();
    let ll = FormPQ::from_components(0, 0, vec![lambda_lambda_bracket(a)])?;

    let theta = ctx.random((0, 0), rng);
    let lhs = f02.bracket_with(&theta.components()[0]).pointwise_inner(&f02);
    let pairing = theta.pointwise_inner(&ll).scale_re(INTEGRABILITY_COEFF);
    let pointwise = relative(lhs.add(&pairing).max_abs(), lhs.max_abs().max(pairing.max_abs()));

    // Both sides vanish for abelian connections; `k_1² ‖F^{0,2}‖` keeps the
    // scale honest there.
    let floor = ctx.geom.wavenumber(1).powi(2) * f02.norm();
    let dd = dbar_star(a, &dbar_star(a, &f02));
    let rhs = ll.scale_re(INTEGRABILITY_COEFF);
    let global = relative(dd.sub(&rhs).norm(), dd.norm().max(rhs.norm()).max(floor));

    let pp = |f: &FormPQ| integrability_p(a, f);
    let x = ctx.random((0, 1), rng);
    let y = ctx.random((0, 1), rng);
    let z = FormPQ::zero(g, r, 0, 1)?;
    let aff = pp(&x.add(&y))?.sub(&pp(&x)?).sub(&pp(&y)?).add(&pp(&z)?);
    let affine = relative(aff.norm(), pp(&x)?.norm().max(pp(&y)?.norm()));

    let grad = ymbar_gradient(a);
    let p_grad = pp(&grad)?;
    let scale = dbar_star(a, &grad).norm().max(rhs.norm()).max(floor);
    let annihilates = relative(p_grad.norm(), scale);
    Ok(vec![
        ctx.report(names[0], pointwise, 1e-10, true, "coefficient 1/2"),
        ctx.report(names[1], global, DISCRETE, true, "coefficient 1/2"),
        ctx.report(names[2], affine, ALGEBRAIC, true, ""),
        ctx.report(names[3], annihilates, DISCRETE, true, ""),
    ])
}

/// Plane-wave probes on a grid refined along `x_1`.
fn symbols(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let m = &ctx.manifest;
    let mut dims = vec![m.grid; 2 * m.n];
    dims[0] = 64;
    let g = TorusGeometry::with_dims(m.n, dims, m.period, m.dealias)?;
    let mut a = Connection::random(&g, ctx.rank(), m.amplitude.max(0.1), 1, rng)?;
    if let Some(bg) = ctx.connection.background() {
        a = Connection::new(a.a01().clone(), Some(*bg))?;
    }
    let (report, _) = symbol_check(&a, 0, &[4, 8, 16], 1e-4, rng)?;
    let mut out = ctx.report("symbol.gradient_and_P", report.residual, report.tolerance, true, &report.context);
    if report.status == CheckStatus::Fail {
        out.status = if m.dealias { CheckStatus::Fail } else { CheckStatus::Flagged };
    }
    Ok(vec![out])
}

/// The constant-curvature line bundle `√-1(dz_1∧dz_2 + dz̄_1∧dz̄_2)`.
fn fixture(ctx: &SuiteContext, _: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let names = [
        "fixture.f11_zero",
        "fixture.energy",
        "fixture.gradient",
        "fixture.classify",
        "fixture.stationary_flow",
    ];
    if ctx.n() != 2 {
        return Ok(names.iter().map(|nm| ctx.skip(nm, "fixture lives on n=2")).collect());
    }
    let a = Connection::holomorphic_pair_fixture(&ctx.geom)?;
    let l = ctx.geom.period();
    let want = 2.0 * l.powi(4);
    let energy = relative((ymbar(&a) - want).abs(), want);
    let c = classify(&a, 1e-10);
    let class_ok = c.class == HolomorphyClass::AlmostHolomorphic;
    let dt = flow::FlowConfig::for_geometry(&ctx.geom, ctx.manifest.flow.safety).dt0;
    let mut b = a.clone();
    for _ in 0..100 {
        b = flow::step(&b, dt)?;
    }
    let drift = b.a01().sub(a.a01()).max_abs();
    Ok(vec![
        ctx.report(names[0], a.f11().max_abs(), 0.0, false, "exact"),
        ctx.report(names[1], energy, ALGEBRAIC, false, &format!("YM={:.12e} want={want:.12e}", ymbar(&a))),
        ctx.report(names[2], ymbar_gradient(&a).norm(), ALGEBRAIC, false, "absolute"),
        ctx.report(names[3], if class_ok { 0.0 } else { 1.0 }, 0.0, false, c.class.label()),
        ctx.report(names[4], drift, 1e-11, false, &format!("100 steps dt={dt:.3e}")),
    ])
}

/// Invariance and equivariance under unitary gauge transformations.
fn gauge(ctx: &SuiteContext, rng: &mut ChaCha8Rng) -> Result<Vec<OperatorReport>> {
    let a = &ctx.connection;
    let e0 = ymbar(a);
    let f0 = a.curvature();
    let (mut de, mut df, mut dh) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let u = GaugeTransform::random_unitary(&ctx.geom, ctx.rank(), 1, rng)?;
        let b = gauge_unitary(a, &u)?;
        de = de.max(relative((ymbar(&b) - e0).abs(), e0));
        df = df.max(relative(b.curvature().sub(&f0.conjugated(&u)).norm(), f0.norm()));
        let c = gauge_complex_hat(a, &u)?;
        dh = dh.max(relative(c.a01().sub(b.a01()).max_abs(), b.a01().max_abs().max(1.0)));
    }
    Ok(vec![
        ctx.report("gauge.energy_invariance", de, ALGEBRAIC, true, "10 transforms"),
        ctx.report("gauge.curvature_equivariance", df, ALGEBRAIC, true, "10 transforms"),
        ctx.report("gauge.hat_matches_unitary", dh, 1e-11, true, "10 transforms"),
    ])
}
