//! Frame-level descriptions of the operators: the rough derivative `∇̄_A`,
//! evaluation on tangent vectors, and the Weitzenböck curvature terms.
//!
//! The real frame is `e_k = ∂_{z_k} + ∂_{z̄_k}`, `e_{n+k} = J e_k =
//! √-1 ∂_{z_k} − √-1 ∂_{z̄_k}`, so `(Je_k)^{0,1} = −√-1 e_k^{0,1}`.

use crate::connection::{Connection, Curvature};
use crate::error::{Error, Result};
use crate::field::{MatrixField, C64, I, ZERO};
use crate::forms::{elements, subsets, CoeffRule, FormPQ};
use crate::geometry::TangentVector;

use super::nabla;

/// `∇_X φ = Σ_k X^k ∇_{z_k} φ + X^{k̄} ∇_{z̄_k} φ`.
pub fn nabla_vector(a: &Connection, phi: &FormPQ, x: &TangentVector) -> FormPQ {
    let (p, q) = phi.bidegree();
    let mut out = FormPQ::zero(phi.geom(), phi.rank(), p, q).expect("same bidegree");
    for k in 0..phi.n() {
        if x.holo[k] != ZERO {
            out = out.axpy(x.holo[k], &nabla(a, phi, k, false));
        }
        if x.anti[k] != ZERO {
            out = out.axpy(x.anti[k], &nabla(a, phi, k, true));
        }
    }
    out
}

fn require_0p(phi: &FormPQ, allowed: &[usize]) -> Result<()> {
    let (p, q) = phi.bidegree();
    if p != 0 || !allowed.contains(&q) {
        return Err(Error::Bidegree { p, q, reason: format!("expected a (0,q)-form with q in {allowed:?}") });
    }
    Ok(())
}

/// `∇̄_A φ` as the family `k ↦ ∇_{z̄_k} φ` (the `dz̄_k`-components).
pub fn nabla_bar(a: &Connection, phi: &FormPQ) -> Result<Vec<FormPQ>> {
    require_0p(phi, &[0, 1, 2])?;
    Ok((0..phi.n()).map(|k| nabla(a, phi, k, true)).collect())
}

/// Inner product on families, each slot weighted by `‖dz̄_k‖² = 2`.
pub fn family_inner(f: &[FormPQ], g: &[FormPQ]) -> f64 {
    2.0 * f.iter().zip(g).map(|(x, y)| x.inner(y)).sum::<f64>()
}

/// Adjoint of [`nabla_bar`]: `−2 Σ_k ∇_{z_k} ψ_k`.
pub fn nabla_bar_star(a: &Connection, family: &[FormPQ]) -> FormPQ {
    let first = &family[0];
    let (p, q) = first.bidegree();
    let mut out = FormPQ::zero(first.geom(), first.rank(), p, q).expect("same bidegree");
    for (k, psi) in family.iter().enumerate() {
        out = out.sub(&nabla(a, psi, k, false).scale_re(2.0));
    }
    out
}

/// `Σ_k (−1)^k (∇_{X_k} φ)(X_0, …, X̂_k, …, X_p)` for `(0,1)`-vectors.
pub fn dbar_a_antisymmetrized(a: &Connection, phi: &FormPQ, vectors: &[TangentVector]) -> Result<MatrixField> {
    require_0p(phi, &[0, 1, 2])?;
    if vectors.len() != phi.degree() + 1 {
        return Err(Error::Mismatch(format!("{} vectors for a {}-form", vectors.len(), phi.degree())));
    }
    if vectors.iter().any(|v| !v.part10().is_zero()) {
        return Err(Error::Mismatch("antisymmetrized formula needs (0,1)-vectors".into()));
    }
    let mut acc = MatrixField::zeros(phi.geom(), phi.rank());
    for (k, x) in vectors.iter().enumerate() {
        let rest: Vec<TangentVector> =
            vectors.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v.clone()).collect();
        let term = nabla_vector(a, phi, x).evaluate(&rest)?;
        acc = acc.axpy(C64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0), &term);
    }
    Ok(acc)
}

fn real_frame(n: usize) -> Vec<TangentVector> {
    (0..2 * n).map(|j| TangentVector::real_frame(n, j)).collect()
}

/// Builds a `(0,q)`-form from its values on `(∂_{z̄_{k_1}}, …, ∂_{z̄_{k_q}})`.
fn from_antiholomorphic_values(
    like: &FormPQ,
    q: usize,
    value: impl Fn(&[TangentVector]) -> Result<MatrixField>,
) -> Result<FormPQ> {
    let n = like.n();
    let mut out = FormPQ::zero(like.geom(), like.rank(), 0, q)?;
    for kk in subsets(n, q) {
        let vs: Vec<TangentVector> = elements(kk).into_iter().map(|k| TangentVector::d_zbar(n, k)).collect();
        out.set_component(0, kk, value(&vs)?);
    }
    Ok(out)
}

/// `∂̄_A^* φ = −Σ_{j=1}^{2n} (∇_{e_j^{1,0}} φ)(e_j^{0,1}, ·)` over the real
/// frame, for `(0,p)`-forms with `p ≥ 1`.
pub fn dbar_star_frame(a: &Connection, phi: &FormPQ) -> Result<FormPQ> {
    require_0p(phi, &[1, 2])?;
    let frame = real_frame(phi.n());
    let derived: Vec<(FormPQ, TangentVector)> =
        frame.iter().map(|e| (nabla_vector(a, phi, &e.part10()), e.part01())).collect();
    from_antiholomorphic_values(phi, phi.degree() - 1, |rest| {
        let mut acc = MatrixField::zeros(phi.geom(), phi.rank());
        for (d, e01) in &derived {
            let mut vs = vec![e01.clone()];
            vs.extend_from_slice(rest);
            acc = acc.sub(&d.evaluate(&vs)?);
        }
        Ok(acc)
    })
}

fn curvature_on(f: &Curvature, x: &TangentVector, y: &TangentVector) -> Result<MatrixField> {
    let v = [x.clone(), y.clone()];
    Ok(f.f20.evaluate(&v)?.add(&f.f11.evaluate(&v)?).add(&f.f02.evaluate(&v)?))
}

/// The curvature term of the Weitzenböck formula as a sum over the real
/// frame: `ℛ(φ)_X = Σ_j [F(e_j, X), φ(e_j)]` on `(0,1)`-forms and
/// `ℛ(φ)_{X,Y} = Σ_j [F(e_j, X), φ(e_j, Y)] − [F(e_j, Y), φ(e_j, X)]` on
/// `(0,2)`-forms.
pub fn weitz_r(a: &Connection, phi: &FormPQ) -> Result<FormPQ> {
    require_0p(phi, &[1, 2])?;
    let f = a.curvature();
    let frame = real_frame(phi.n());
    let q = phi.degree();
    from_antiholomorphic_values(phi, q, |xs| {
        let mut acc = MatrixField::zeros(phi.geom(), phi.rank());
        for e in &frame {
            if q == 1 {
                let fx = curvature_on(&f, e, &xs[0])?;
                acc = acc.add(&fx.commutator(&phi.evaluate(std::slice::from_ref(e))?));
            } else {
                let (x, y) = (&xs[0], &xs[1]);
                let t1 = curvature_on(&f, e, x)?.commutator(&phi.evaluate(&[e.clone(), y.clone()])?);
                let t2 = curvature_on(&f, e, y)?.commutator(&phi.evaluate(&[e.clone(), x.clone()])?);
                acc = acc.add(&t1).sub(&t2);
            }
        }
        Ok(acc)
    })
}

/// [`weitz_r`] folded onto the holomorphic frame:
/// `ℛ(φ)_{l̄} = 2 Σ_k [F_{k l̄}, φ_{k̄}]` and
/// `ℛ(φ)_{k̄ l̄} = 2 Σ_j [F_{j k̄}, φ_{j̄ l̄}] − [F_{j l̄}, φ_{j̄ k̄}]`.
pub fn weitz_r_folded(a: &Connection, phi: &FormPQ) -> Result<FormPQ> {
    require_0p(phi, &[1, 2])?;
    let n = phi.n();
    let f11 = a.curvature().f11;
    let fc = |j: usize, k: usize| f11.component(1 << j, 1 << k);
    // φ_{j̄ l̄} extended antisymmetrically.
    let phi2 = |j: usize, l: usize| -> Option<MatrixField> {
        if j == l {
            return None;
        }
        let c = phi.component(0, (1 << j) | (1 << l));
        Some(if j < l { c.clone() } else { c.scale_re(-1.0) })
    };
    let mut out = FormPQ::zero(phi.geom(), phi.rank(), 0, phi.degree())?;
    if phi.degree() == 1 {
        for l in 0..n {
            let mut acc = MatrixField::zeros(phi.geom(), phi.rank());
            for k in 0..n {
                acc = acc.add(&fc(k, l).commutator(phi.component(0, 1 << k)));
            }
            out.set_component(0, 1 << l, acc.scale_re(2.0));
        }
        return Ok(out);
    }
    for kk in subsets(n, 2) {
        let (k, l) = (elements(kk)[0], elements(kk)[1]);
        let mut acc = MatrixField::zeros(phi.geom(), phi.rank());
        for j in 0..n {
            if let Some(v) = phi2(j, l) {
                acc = acc.add(&fc(j, k).commutator(&v));
            }
            if let Some(v) = phi2(j, k) {
                acc = acc.sub(&fc(j, l).commutator(&v));
            }
        }
        out.set_component(0, kk, acc.scale_re(2.0));
    }
    Ok(out)
}

/// Closed form `−√-1 { Λ[F^{1,1} ∧ φ] − [ΛF^{1,1}, φ] }`. A product
/// `F^{1,1} ∧ φ` above the complex dimension is zero.
pub fn weitz_r_closed(a: &Connection, phi: &FormPQ) -> Result<FormPQ> {
    require_0p(phi, &[1, 2])?;
    let f11 = a.curvature().f11;
    let wedge = f11.wedge_or_vanish(phi, CoeffRule::LieBracket)?;
    let mut lw = wedge.lambda();
    if lw.bidegree() != phi.bidegree() {
        lw = FormPQ::zero(phi.geom(), phi.rank(), 0, phi.degree())?;
    }
    let lf = f11.lambda();
    let bracket = phi.bracket_with(&lf.components()[0]);
    Ok(lw.sub(&bracket).scale(-I))
}

/// The `(p+1,q)` (`holo`) or `(p,q+1)` part of `d_A φ`, computed from real
/// partial derivatives and the real components `A_{x_k} = a_k + a^{1,0}_k`,
/// `A_{y_k} = √-1 (a^{1,0}_k − a_k)`, with `dx = ½(dz + dz̄)` and
/// `dy = (dz − dz̄)/(2√-1)`.
pub fn d_a_real_projected(a: &Connection, phi: &FormPQ, holo: bool) -> FormPQ {
    let n = phi.n();
    let (p, q) = phi.bidegree();
    let (tp, tq) = if holo { (p + 1, q) } else { (p, q + 1) };
    let mut out = FormPQ::zero(phi.geom(), phi.rank(), tp, tq).expect("one degree up");
    if tp > n || tq > n {
        return out;
    }
    let half = C64::new(0.5, 0.0);
    // Coefficient of dz (holo) or dz̄ in dx_k and dy_k.
    let (cx, cy) = if holo { (half, -I * 0.5) } else { (half, I * 0.5) };
    for k in 0..n {
        let ak = a.a_bar(k);
        let hk = a.a_holo(k);
        let ax = ak.add(&hk);
        let ay = hk.sub(ak).scale(I);
        for (axis, pot, c) in [(2 * k, &ax, cx), (2 * k + 1, &ay, cy)] {
            let cov = phi.map(|f| {
                let d = f.partial_real(axis);
                if a.rank() == 1 {
                    d
                } else {
                    d.add(&pot.commutator(f))
                }
            });
            out = out.axpy(c, &cov.ext(k, !holo).expect("axis"));
        }
    }
    out
}
