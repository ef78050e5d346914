//! Covariant Dolbeault operators of a unitary connection acting on
//! `End(E)`-valued forms, their adjoints and Laplacians.
//!
//! Coupling: `∇_{z̄_k} φ = ∂_{z̄_k} φ + [a_k, φ]`, `∇_{z_k} φ = ∂_{z_k} φ +
//! [a^{1,0}_k, φ]` on every coefficient; then `∂̄_A = Σ dz̄_k ∧ ∇_{z̄_k}` and
//! `∂_A = Σ dz_k ∧ ∇_{z_k}`. Since `∇_{z̄_k}^* = −∇_{z_k}` the pairing
//! adjoints are `∂̄_A^* = −Σ ī_k ∇_{z_k}` and `∂_A^* = −Σ i_k ∇_{z̄_k}`.

mod frames;
mod report;

use std::collections::BTreeMap;

pub use frames::{
    d_a_real_projected, dbar_a_antisymmetrized, dbar_star_frame, family_inner, nabla_bar, nabla_bar_star,
    nabla_vector, weitz_r, weitz_r_closed, weitz_r_folded,
};
pub use report::{relative, CheckStatus, OperatorReport};

use crate::connection::Connection;
use crate::field::{MatrixField, C64, I};
use crate::forms::{CoeffRule, FormPQ};

/// Band cap applied to every derivative and bracket (Galerkin projection);
/// `None` keeps products exact.
pub type Cap<'a> = Option<&'a [usize]>;

/// `∇_{z̄_k} φ` (`bar`) or `∇_{z_k} φ`, coefficientwise.
pub fn nabla(a: &Connection, phi: &FormPQ, k: usize, bar: bool) -> FormPQ {
    nabla_capped(a, phi, k, bar, None)
}

pub fn nabla_capped(a: &Connection, phi: &FormPQ, k: usize, bar: bool, cap: Cap) -> FormPQ {
    let coeff = if bar { a.a_bar(k).clone() } else { a.a_holo(k) };
    // Rank 1: the bracket vanishes identically.
    let abelian = a.rank() == 1;
    phi.map(|c| {
        let d = match cap {
            Some(cap) => c.wirtinger_capped(k, bar, cap),
            None => c.wirtinger(k, bar),
        };
        if abelian {
            return d;
        }
        let br = match cap {
            Some(cap) => coeff.commutator_capped(c, cap),
            None => coeff.commutator(c),
        };
        d.add(&br)
    })
}

fn d_a(a: &Connection, phi: &FormPQ, bar: bool, cap: Cap) -> FormPQ {
    let n = phi.n();
    let (p, q) = phi.bidegree();
    let (tp, tq) = if bar { (p, q + 1) } else { (p + 1, q) };
    let mut out = FormPQ::zero(phi.geom(), phi.rank(), tp, tq).expect("one degree up");
    if tp > n || tq > n {
        return out;
    }
    for k in 0..n {
        out = out.add(&nabla_capped(a, phi, k, bar, cap).ext(k, bar).expect("axis"));
    }
    out
}

/// `∂̄_A φ`; from `q = n` the empty form of bidegree `(p, n+1)`.
pub fn dbar_a(a: &Connection, phi: &FormPQ) -> FormPQ {
    d_a(a, phi, true, None)
}

/// `∂_A φ`; from `p = n` the empty form of bidegree `(n+1, q)`.
pub fn partial_a(a: &Connection, phi: &FormPQ) -> FormPQ {
    d_a(a, phi, false, None)
}

fn d_a_star(a: &Connection, phi: &FormPQ, bar: bool, cap: Cap) -> FormPQ {
    let n = phi.n();
    let (p, q) = phi.bidegree();
    let lowered = if bar { q } else { p };
    let (tp, tq) = if bar { (p, q.saturating_sub(1)) } else { (p.saturating_sub(1), q) };
    let mut out = FormPQ::zero(phi.geom(), phi.rank(), tp, tq).expect("one degree down");
    if lowered == 0 || lowered > n {
        return out;
    }
    for k in 0..n {
        let t = nabla_capped(a, phi, k, !bar, cap).contract(k, bar).expect("axis");
        out = out.sub(&t);
    }
    out
}

/// `∂̄_A^* φ`, the adjoint of [`dbar_a`] for the `L²` pairing. Zero form
/// for `q = 0`.
pub fn dbar_star(a: &Connection, phi: &FormPQ) -> FormPQ {
    d_a_star(a, phi, true, None)
}

/// [`dbar_star`] with every derivative and bracket truncated to `cap`.
pub fn dbar_star_capped(a: &Connection, phi: &FormPQ, cap: &[usize]) -> FormPQ {
    d_a_star(a, phi, true, Some(cap))
}

/// `∂_A^* φ`, the adjoint of [`partial_a`].
pub fn partial_star(a: &Connection, phi: &FormPQ) -> FormPQ {
    d_a_star(a, phi, false, None)
}

/// `∂̄_A^* = −*̄ ∂̄_A *̄`.
pub fn dbar_star_hodge(a: &Connection, phi: &FormPQ) -> FormPQ {
    if phi.bidegree().1 == 0 {
        return dbar_star(a, phi);
    }
    dbar_a(a, &phi.hodge_star_bar()).hodge_star_bar().scale_re(-1.0)
}

/// `∂_A^* = −*̄ ∂_A *̄`.
pub fn partial_star_hodge(a: &Connection, phi: &FormPQ) -> FormPQ {
    if phi.bidegree().0 == 0 {
        return partial_star(a, phi);
    }
    partial_a(a, &phi.hodge_star_bar()).hodge_star_bar().scale_re(-1.0)
}

/// `[D, Λ] φ = D Λφ − Λ D φ`; the first term is absent when `Λφ` has no
/// bidegree (`p = 0` or `q = 0`).
fn commutator_with_lambda(phi: &FormPQ, d: impl Fn(&FormPQ) -> FormPQ) -> FormPQ {
    let (p, q) = phi.bidegree();
    let second = d(phi).lambda();
    if p == 0 || q == 0 {
        return second.scale_re(-1.0);
    }
    d(&phi.lambda()).sub(&second)
}

/// `√-1 [∂_A, Λ] φ`, the Kähler-identity form of `∂̄_A^*`.
pub fn dbar_star_kahler(a: &Connection, phi: &FormPQ) -> FormPQ {
    commutator_with_lambda(phi, |f| partial_a(a, f)).scale(I)
}

/// `−√-1 [∂̄_A, Λ] φ`, the Kähler-identity form of `∂_A^*`.
pub fn partial_star_kahler(a: &Connection, phi: &FormPQ) -> FormPQ {
    commutator_with_lambda(phi, |f| dbar_a(a, f)).scale(-I)
}

/// `−√-1 Λ ∂_A φ`; equals `∂̄_A^* φ` on `(0,q)`-forms.
pub fn dbar_star_lambda(a: &Connection, phi: &FormPQ) -> FormPQ {
    partial_a(a, phi).lambda().scale(-I)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaplacianKind {
    Dbar,
    Partial,
}

/// `Δ^∂̄ = ∂̄∂̄^* + ∂̄^*∂̄` or `Δ^∂ = ∂∂^* + ∂^*∂`.
pub fn laplacian(a: &Connection, phi: &FormPQ, kind: LaplacianKind) -> FormPQ {
    let (p, q) = phi.bidegree();
    let (d, ds): (fn(&Connection, &FormPQ) -> FormPQ, fn(&Connection, &FormPQ) -> FormPQ) = match kind {
        LaplacianKind::Dbar => (dbar_a, dbar_star),
        LaplacianKind::Partial => (partial_a, partial_star),
    };
    let lowered = if kind == LaplacianKind::Dbar { q } else { p };
    let up_down = ds(a, &d(a, phi));
    if lowered == 0 {
        return up_down;
    }
    d(a, &ds(a, phi)).add(&up_down)
}

/// A sum of forms of several bidegrees.
#[derive(Clone, Debug, Default)]
pub struct MixedForm {
    parts: BTreeMap<(usize, usize), FormPQ>,
}

impl MixedForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_form(f: FormPQ) -> Self {
        let mut m = Self::new();
        m.add_assign(f);
        m
    }

    /// Adds `f` into its bidegree slot; empty forms are dropped.
    pub fn add_assign(&mut self, f: FormPQ) {
        if f.components().is_empty() {
            return;
        }
        let key = f.bidegree();
        let next = match self.parts.remove(&key) {
            Some(g) => g.add(&f),
            None => f,
        };
        self.parts.insert(key, next);
    }

    pub fn part(&self, p: usize, q: usize) -> Option<&FormPQ> {
        self.parts.get(&(p, q))
    }

    pub fn parts(&self) -> impl Iterator<Item = (&(usize, usize), &FormPQ)> {
        self.parts.iter()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { parts: self.parts.iter().map(|(k, f)| (*k, f.scale(c))).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for f in other.parts.values() {
            out.add_assign(f.scale_re(-1.0));
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for f in other.parts.values() {
            out.add_assign(f.clone());
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.parts.values().map(|f| f.norm_sq()).sum::<f64>().sqrt()
    }
}

/// `Δ^d φ = (d_A d_A^* + d_A^* d_A) φ` with `d_A = ∂_A + ∂̄_A`, split by
/// bidegree: `(p,q)` gets `Δ^∂ + Δ^∂̄`, `(p+1,q−1)` gets `∂∂̄^* + ∂̄^*∂`,
/// `(p−1,q+1)` gets `∂̄∂^* + ∂^*∂̄`.
pub fn laplacian_d(a: &Connection, phi: &FormPQ) -> MixedForm {
    let (p, q) = phi.bidegree();
    let mut m = MixedForm::new();
    m.add_assign(laplacian(a, phi, LaplacianKind::Dbar));
    m.add_assign(laplacian(a, phi, LaplacianKind::Partial));
    let dphi = partial_a(a, phi);
    let dbphi = dbar_a(a, phi);
    m.add_assign(dbar_star(a, &dphi));
    m.add_assign(partial_star(a, &dbphi));
    if q > 0 {
        m.add_assign(partial_a(a, &dbar_star(a, phi)));
    }
    if p > 0 {
        m.add_assign(dbar_a(a, &partial_star(a, phi)));
    }
    m
}

/// `[F ∧, Λ] φ = [F ∧ Λφ] − Λ[F ∧ φ]` with bracket coefficients. Products
/// above the complex dimension vanish; the first term is absent when `Λφ`
/// has no bidegree. `None` when the result would have negative degree.
pub fn bracket_lambda(f: &FormPQ, phi: &FormPQ) -> Option<FormPQ> {
    let (fp, fq) = f.bidegree();
    let (p, q) = phi.bidegree();
    if fp + p == 0 || fq + q == 0 {
        return None;
    }
    let target = (fp + p - 1, fq + q - 1);
    let n = phi.n();
    let zero = || FormPQ::zero(phi.geom(), phi.rank(), target.0, target.1).expect("target bidegree");
    let second = if fp + p <= n && fq + q <= n {
        let s = f.wedge(phi, CoeffRule::LieBracket).expect("same bundle").lambda();
        // Λ of a (·,0)/(0,·) product is zero, clamped elsewhere.
        if s.bidegree() == target {
            s
        } else {
            zero()
        }
    } else {
        zero()
    };
    if p == 0 || q == 0 {
        return Some(second.scale_re(-1.0));
    }
    let first = if target.0 <= n && target.1 <= n {
        f.wedge(&phi.lambda(), CoeffRule::LieBracket).expect("same bundle")
    } else {
        zero()
    };
    Some(first.sub(&second))
}

/// `½ (Δ^d φ + √-1 [F^{1,1} − F^{2,0} + F^{0,2}, Λ] φ)`, which equals
/// `Δ^∂̄ φ` (only the `(p,q)` part survives).
pub fn dbar_laplacian_via_d(a: &Connection, phi: &FormPQ) -> MixedForm {
    let f = a.curvature();
    let mut m = laplacian_d(a, phi);
    for (part, sign) in [(&f.f11, 1.0), (&f.f20, -1.0), (&f.f02, 1.0)] {
        if let Some(t) = bracket_lambda(part, phi) {
            m.add_assign(t.scale(I * sign));
        }
    }
    m.scale(C64::new(0.5, 0.0))
}

/// `−√-1 [F^{1,1} ∧, Λ] φ`, which equals `(Δ^∂ − Δ^∂̄) φ`.
pub fn laplacian_difference_curvature(a: &Connection, phi: &FormPQ) -> FormPQ {
    let f11 = a.curvature().f11;
    bracket_lambda(&f11, phi).expect("(1,1) keeps the bidegree").scale(-I)
}

/// Bianchi identity `d_A F = 0` split by bidegree: the `(3,0)`, `(2,1)`,
/// `(1,2)`, `(0,3)` parts `∂F^{2,0}`, `∂F^{1,1} + ∂̄F^{2,0}`,
/// `∂F^{0,2} + ∂̄F^{1,1}`, `∂̄F^{0,2}` (covariant).
pub fn bianchi_parts(a: &Connection) -> Vec<((usize, usize), FormPQ)> {
    let f = a.curvature();
    vec![
        ((3, 0), partial_a(a, &f.f20)),
        ((2, 1), partial_a(a, &f.f11).add(&dbar_a(a, &f.f20))),
        ((1, 2), partial_a(a, &f.f02).add(&dbar_a(a, &f.f11))),
        ((0, 3), dbar_a(a, &f.f02)),
    ]
}

/// `[θ, φ]` for a matrix-valued function `θ`.
pub fn bracket_function(theta: &MatrixField, phi: &FormPQ) -> FormPQ {
    phi.bracket_with(theta)
}

#[cfg(test)]
mod tests;
