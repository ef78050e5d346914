//! The Yang-Mills bar functional `YM^b(A) = ½ ∫ ‖F^{0,2}_A‖²`, its gradient
//! `∂̄_A^* F^{0,2}_A`, the holomorphy predicates, the affine integrability
//! operator and principal-symbol probes.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::calculus::{dbar_star, dbar_star_capped, partial_a, relative, OperatorReport};
use crate::connection::Connection;
use crate::error::{Error, Result};
use crate::field::{MatrixField, C64, I, ONE};
use crate::forms::{CoeffRule, FormPQ};
use crate::geometry::TorusGeometry;

/// Coefficient `c` in `∂̄^*∂̄^* F^{0,2} = c ΛΛ[F^{0,2} ∧ F^{2,0}]` and in the
/// pointwise identity `⟨[θ, F^{0,2}], F^{0,2}⟩ = −c ⟨θ, ΛΛ[F^{0,2} ∧ F^{2,0}]⟩`.
/// With `‖dz̄_i∧dz̄_j‖² = 4` and `ΛΛ(dz_1dz_2dz̄_1dz̄_2) = 8` the pointwise
/// pairing gives `4` on the left against `−8` on the right, hence `½`.
pub const INTEGRABILITY_COEFF: f64 = 0.5;

pub fn ymbar(a: &Connection) -> f64 {
    0.5 * a.f02().norm_sq()
}

/// `∂̄_A^* F^{0,2}_A`, exact.
pub fn ymbar_gradient(a: &Connection) -> FormPQ {
    dbar_star(a, &a.f02())
}

/// The gradient projected onto the base-grid band: the gradient of `YM^b`
/// restricted to connections representable on the grid.
pub fn ymbar_gradient_projected(a: &Connection) -> FormPQ {
    let cap = a.geom().base_band();
    dbar_star_capped(a, &a.f02(), &cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HolomorphyClass {
    Holomorphic,
    AlmostHolomorphic,
    YangMillsBar,
    None,
}

impl HolomorphyClass {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Holomorphic => "holomorphic",
            Self::AlmostHolomorphic => "almost_holomorphic",
            Self::YangMillsBar => "yangmills_bar",
            Self::None => "none",
        }
    }
}

/// Relative residuals behind [`classify`]: `‖F^{0,2}‖/‖F‖`,
/// `‖∂_A F^{0,2}‖/(k_1 ‖F‖)` and `‖Λ ∂_A F^{0,2}‖/(k_1 ‖F‖)` with
/// `k_1 = 2π/L` the lowest wavenumber (one derivative's worth of scale).
#[derive(Clone, Copy, Debug)]
pub struct Classification {
    pub class: HolomorphyClass,
    pub f02_residual: f64,
    pub almost_residual: f64,
    pub ymbar_residual: f64,
}

pub fn classify(a: &Connection, tol: f64) -> Classification {
    let curv = a.curvature();
    let scale = curv.norm();
    let f02 = &curv.f02;
    let d = partial_a(a, f02);
    let ld = if d.components().is_empty() { 0.0 } else { d.lambda().norm() };
    let k1 = a.geom().wavenumber(1);
    let f02_residual = relative(f02.norm(), scale);
    let almost_residual = relative(d.norm(), k1 * scale);
    let ymbar_residual = relative(ld, k1 * scale);
    // a curvature at the round-off of `∂̄a + a∧a` is flat: the ratios above are noise
    let size = a.a01().norm();
    let flat = scale <= ROUND_OFF * (k1 * size + size * size / a.geom().volume().sqrt());
    let class = if flat || f02_residual <= tol {
        HolomorphyClass::Holomorphic
    } else if almost_residual <= tol {
        HolomorphyClass::AlmostHolomorphic
    } else if ymbar_residual <= tol {
        HolomorphyClass::YangMillsBar
    } else {
        HolomorphyClass::None
    };
    Classification { class, f02_residual, almost_residual, ymbar_residual }
}

/// `ΛΛ[F^{0,2} ∧ F^{2,0}]` with bracket coefficients; zero when `n = 1`.
pub fn lambda_lambda_bracket(a: &Connection) -> MatrixField {
    let geom = a.geom();
    if geom.n() < 2 || a.rank() == 1 {
        return MatrixField::zeros(geom, a.rank());
    }
    let f = a.curvature();
    let w = f.f02.wedge(&f.f20, CoeffRule::LieBracket).expect("(2,2)");
    w.lambda().lambda().components()[0].clone()
}

/// `P_A(φ) = ∂̄_A^* φ − c ΛΛ[F^{0,2} ∧ F^{2,0}]` on `(0,1)`-forms, with `c`
/// the [`INTEGRABILITY_COEFF`]. Affine in `φ`; annihilates the gradient.
pub fn integrability_p(a: &Connection, phi: &FormPQ) -> Result<FormPQ> {
    if phi.bidegree() != (0, 1) {
        let (p, q) = phi.bidegree();
        return Err(Error::Bidegree { p, q, reason: "integrability operator acts on (0,1)-forms".into() });
    }
    let ll = lambda_lambda_bracket(a).scale_re(-INTEGRABILITY_COEFF);
    let constant = FormPQ::from_components(0, 0, vec![ll])?;
    Ok(dbar_star(a, phi).add(&constant))
}

/// Centered-difference probe of `t ↦ YM^b(A + t a)` at `t = 0`.
#[derive(Clone, Debug)]
pub struct VariationProbe {
    pub connection: Connection,
    pub direction: FormPQ,
    pub steps: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct VariationResult {
    /// `⟨∇YM^b, a⟩`.
    pub predicted: f64,
    /// `(t, centered difference, |difference − predicted|)` per step.
    pub samples: Vec<(f64, f64, f64)>,
}

impl VariationResult {
    /// Error ratios between consecutive steps; ≈ 4 for second order.
    pub fn ratios(&self) -> Vec<f64> {
        self.samples.windows(2).map(|w| w[0].2 / w[1].2).collect()
    }
}

impl VariationProbe {
    pub fn new(connection: Connection, direction: FormPQ, steps: Vec<f64>) -> Result<Self> {
        if direction.bidegree() != (0, 1) {
            return Err(Error::Bidegree { p: direction.bidegree().0, q: direction.bidegree().1, reason: "variation must be (0,1)".into() });
        }
        if steps.is_empty() || steps.iter().any(|t| !(*t > 0.0)) || steps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("variation steps must be positive and strictly decreasing".into()));
        }
        Ok(Self { connection, direction, steps })
    }

    pub fn run(&self) -> Result<VariationResult> {
        let a = &self.connection;
        let predicted = ymbar_gradient(a).inner(&self.direction);
        let mut samples = Vec::with_capacity(self.steps.len());
        for &t in &self.steps {
            let plus = a.with_a01(a.a01().axpy(C64::new(t, 0.0), &self.direction))?;
            let minus = a.with_a01(a.a01().axpy(C64::new(-t, 0.0), &self.direction))?;
            let fd = (ymbar(&plus) - ymbar(&minus)) / (2.0 * t);
            samples.push((t, fd, (fd - predicted).abs()));
        }
        Ok(VariationResult { predicted, samples })
    }
}

const ROUND_OFF: f64 = 1e-12;

/// Per-frequency outcome of [`symbol_check`].
#[derive(Clone, Debug)]
pub struct SymbolSample {
    pub freq: i64,
    pub gradient_deviation: f64,
    pub p_deviation: f64,
}

/// Linearizes the gradient and `P` at `A` along plane waves
/// `h = e^{√-1 κ x} (α_1 dz̄_1 + … + α_n dz̄_n)`, `κ = 2π m/L`, on the real
/// axis `axis` (an `x_k` axis, so `ξ = dx_k`), and compares with the
/// leading symbols
///
/// * gradient: `(κ²/2) (α_1, …, α_n)` with the `dz̄_k` slot removed,
/// * `P`: `−√-1 κ α_k` (from `∂̄^* = −Σ ī_j ∇_{z_j}`, `∂_{z_k} ↦ √-1 κ/2`).
///
/// Deviations are relative; lower-order terms make them `O(1/m)`.
pub fn symbol_check<R: Rng + ?Sized>(
    a: &Connection,
    axis: usize,
    freqs: &[i64],
    fd_step: f64,
    rng: &mut R,
) -> Result<(OperatorReport, Vec<SymbolSample>)> {
    let geom = a.geom();
    let n = geom.n();
    if !axis.is_multiple_of(2) || axis >= geom.n_axes() {
        return Err(Error::Index(format!("symbol probe needs an x-axis, got axis {axis}")));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("frequencies must increase".into()));
    }
    let nyq = (geom.dims()[axis] / 2) as i64;
    if let Some(m) = freqs.iter().find(|m| m.unsigned_abs() as i64 >= nyq || **m <= 0) {
        return Err(Error::Config(format!("frequency {m} outside (0, {nyq})")));
    }
    let k_dir = axis / 2;
    let r = a.rank();
    let alphas: Vec<Vec<C64>> = (0..n)
        .map(|_| (0..r * r).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect())
        .collect();
    let mut samples = Vec::new();
    for &m in freqs {
        let kappa = geom.wavenumber(m);
        let wave = plane_wave(geom, r, axis, m);
        let mut h = FormPQ::zero(geom, r, 0, 1)?;
        let mut pred_grad = FormPQ::zero(geom, r, 0, 1)?;
        for k in 0..n {
            let comp = wave.matmul(&MatrixField::constant(geom, r, &alphas[k]));
            if k != k_dir {
                pred_grad.set_component(0, 1 << k, comp.clone());
            }
            h.set_component(0, 1 << k, comp);
        }
        let plus = a.with_a01(a.a01().axpy(C64::new(fd_step, 0.0), &h))?;
        let minus = a.with_a01(a.a01().axpy(C64::new(-fd_step, 0.0), &h))?;
        let lin = ymbar_gradient(&plus).sub(&ymbar_gradient(&minus)).scale_re(1.0 / (2.0 * fd_step));
        let lin = lin.scale_re(2.0 / (kappa * kappa));
        let gradient_deviation = relative(lin.sub(&pred_grad).norm(), pred_grad.norm());

        // P is affine: its linear part is P(h) − P(0).
        let p_lin = integrability_p(a, &h)?.sub(&integrability_p(a, &FormPQ::zero(geom, r, 0, 1)?)?);
        let p_lin = p_lin.scale(ONE / (-I * kappa));
        let pred_p = FormPQ::from_components(0, 0, vec![h.component(0, 1 << k_dir).clone()])?;
        let p_deviation = relative(p_lin.sub(&pred_p).norm(), pred_p.norm());
        samples.push(SymbolSample { freq: m, gradient_deviation, p_deviation });
    }
    // Strictly decreasing, except where a deviation is already round-off
    // (the gradient's symbol vanishes identically for n = 1, and both are
    // exact for abelian connections).
    let shrinks = |a: f64, b: f64| b < a || a.max(b) <= ROUND_OFF;
    let monotone = samples
        .windows(2)
        .all(|w| shrinks(w[0].gradient_deviation, w[1].gradient_deviation) && shrinks(w[0].p_deviation, w[1].p_deviation));
    let last = samples.last().map_or(0.0, |s| s.gradient_deviation.max(s.p_deviation));
    let context = samples
        .iter()
        .map(|s| format!("m={}:{:.2e}/{:.2e}", s.freq, s.gradient_deviation, s.p_deviation))
        .collect::<Vec<_>>()
        .join(" ");
    let mut report = OperatorReport::check("symbol.gradient_and_P", last, 1.0, context);
    if !monotone {
        report.status = crate::calculus::CheckStatus::Fail;
    }
    Ok((report, samples))
}

/// `e^{√-1 κ x_axis}` times the identity.
fn plane_wave(geom: &Arc<TorusGeometry>, rank: usize, axis: usize, m: i64) -> MatrixField {
    let mut band = vec![0; geom.n_axes()];
    band[axis] = m.unsigned_abs() as usize;
    MatrixField::from_modes(geom, rank, band, |k, e| {
        if e / rank == e % rank && k[axis] == m && k.iter().enumerate().all(|(i, v)| i == axis || *v == 0) {
            ONE
        } else {
            C64::new(0.0, 0.0)
        }
    })
}
