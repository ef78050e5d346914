//! End(E)-valued (p,q)-forms on the torus.
//!
//! A [`FormPQ`] stores one [`MatrixField`] per canonical basis element
//! `dz_I ∧ dz̄_K` (`I`, `K` strictly increasing, all `dz` before `dz̄`).
//! Multi-indices are bitmasks over the zero-based complex axes.
//!
//! Norm conventions: `‖dz_k‖² = ‖dz̄_k‖² = 2`, so `‖dz_I ∧ dz̄_K‖² =
//! 2^{|I|+|K|}`, and the contractions `i_k`, `ī_k` (adjoints of `dz_k ∧`,
//! `dz̄_k ∧`) carry a factor 2.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{MatrixField, C64, I, ONE, ZERO};
use crate::geometry::{TangentVector, TorusGeometry, MAX_COMPLEX_DIM};
use crate::par;
use rand::Rng;
use rand_distr::StandardNormal;

/// A multi-index as a bitmask of zero-based complex axes.
pub type Multi = u8;

/// Strictly increasing `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Multi> {
    let mut out: Vec<Multi> = (0u16..(1 << n)).filter(|m| m.count_ones() as usize == k).map(|m| m as Multi).collect();
    out.sort_by_key(|m| elements(*m));
    out
}

pub fn elements(m: Multi) -> Vec<usize> {
    (0..8).filter(|i| m & (1 << i) != 0).collect()
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[inline]
fn count_below(m: Multi, k: usize) -> u32 {
    (m & ((1u16 << k) - 1) as u8).count_ones()
}

/// Sign of sorting the concatenation `A ++ B` of two disjoint increasing
/// index lists.
fn merge_sign(a: Multi, b: Multi) -> f64 {
    let inversions: u32 = elements(b).iter().map(|&y| (a >> (y + 1)).count_ones()).sum();
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `dz_k ∧ (dz_I ∧ dz̄_K)` (or `dz̄_k ∧ …` when `bar`) as `(sign, I', K')`.
pub fn ext_basis(k: usize, bar: bool, i: Multi, kk: Multi) -> Option<(f64, Multi, Multi)> {
    let bit = 1u8 << k;
    if bar {
        if kk & bit != 0 {
            return None;
        }
        let flips = i.count_ones() + count_below(kk, k);
        Some((if flips.is_multiple_of(2) { 1.0 } else { -1.0 }, i, kk | bit))
    } else {
        if i & bit != 0 {
            return None;
        }
        let flips = count_below(i, k);
        Some((if flips.is_multiple_of(2) { 1.0 } else { -1.0 }, i | bit, kk))
    }
}

/// `i_k` (or `ī_k`) applied to `dz_I ∧ dz̄_K`: move the factor to the
/// front, drop it, multiply by 2.
pub fn contract_basis(k: usize, bar: bool, i: Multi, kk: Multi) -> Option<(f64, Multi, Multi)> {
    let bit = 1u8 << k;
    if bar {
        if kk & bit == 0 {
            return None;
        }
        let flips = i.count_ones() + count_below(kk, k);
        Some((if flips.is_multiple_of(2) { 2.0 } else { -2.0 }, i, kk & !bit))
    } else {
        if i & bit == 0 {
            return None;
        }
        let flips = count_below(i, k);
        Some((if flips.is_multiple_of(2) { 2.0 } else { -2.0 }, i & !bit, kk))
    }
}

/// `(dz_{I1} ∧ dz̄_{K1}) ∧ (dz_{I2} ∧ dz̄_{K2})` in canonical order.
pub fn wedge_basis(i1: Multi, k1: Multi, i2: Multi, k2: Multi) -> Option<(f64, Multi, Multi)> {
    if i1 & i2 != 0 || k1 & k2 != 0 {
        return None;
    }
    let cross = k1.count_ones() * i2.count_ones();
    let mut s = if cross.is_multiple_of(2) { 1.0 } else { -1.0 };
    s *= merge_sign(i1, i2) * merge_sign(k1, k2);
    Some((s, i1 | i2, k1 | k2))
}

/// Pointwise squared norm of a basis element.
pub fn basis_norm_sq(i: Multi, kk: Multi) -> f64 {
    f64::from(1u32 << (i.count_ones() + kk.count_ones()))
}

fn det(m: &mut [Vec<C64>]) -> C64 {
    // Gaussian elimination with partial pivoting; sizes here are ≤ 4.
    let n = m.len();
    let mut d = ONE;
    for c in 0..n {
        let piv = (c..n).max_by(|a, b| m[*a][c].norm().total_cmp(&m[*b][c].norm())).unwrap();
        if m[piv][c].norm() == 0.0 {
            return ZERO;
        }
        if piv != c {
            m.swap(piv, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for cc in c..n {
                let v = m[c][cc];
                m[r][cc] -= f * v;
            }
        }
    }
    d
}

/// Value of `dz_I ∧ dz̄_K` on complex tangent vectors (determinant
/// convention).
pub fn eval_basis(i: Multi, kk: Multi, vectors: &[TangentVector]) -> C64 {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for a in elements(i) {
        rows.push(vectors.iter().map(|v| v.holo[a]).collect());
    }
    for a in elements(kk) {
        rows.push(vectors.iter().map(|v| v.anti[a]).collect());
    }
    if rows.len() != vectors.len() {
        return ZERO;
    }
    if rows.is_empty() {
        return ONE;
    }
    det(&mut rows)
}

/// Ratio `λ` with `dz_1∧…∧dz_n∧dz̄_1∧…∧dz̄_n = λ · dx_1∧dy_1∧…∧dx_n∧dy_n`,
/// read off by evaluating on the oriented real frame.
pub fn top_form_ratio(n: usize) -> C64 {
    let frame: Vec<TangentVector> = (0..n)
        .flat_map(|k| [TangentVector::real_frame(n, k), TangentVector::real_frame(n, n + k)])
        .collect();
    let all = ((1u16 << n) - 1) as Multi;
    eval_basis(all, all, &frame)
}

/// How coefficients combine in [`FormPQ::wedge`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoeffRule {
    /// Matrix product `a·b`.
    Plain,
    /// Commutator `[a, b]`; the graded bracket of Lie-algebra valued forms.
    LieBracket,
    /// `Tr(a·b^*)`, scalar (rank-1) result.
    HermitianPairing,
}

#[derive(Clone, Debug)]
pub struct FormPQ {
    geom: Arc<TorusGeometry>,
    rank: usize,
    p: usize,
    q: usize,
    comps: Vec<MatrixField>,
}

impl FormPQ {
    pub fn zero(geom: &Arc<TorusGeometry>, rank: usize, p: usize, q: usize) -> Result<Self> {
        let n = geom.n();
        // Bidegrees above `n` are the zero space (no components); one step past
        // the largest supported dimension is allowed so degree-raising
        // operators always have a target.
        if p > MAX_COMPLEX_DIM + 1 || q > MAX_COMPLEX_DIM + 1 {
            return Err(Error::Bidegree { p, q, reason: format!("exceeds complex dimension {n}") });
        }
        let count = binomial(n, p) * binomial(n, q);
        Ok(Self { geom: geom.clone(), rank, p, q, comps: vec![MatrixField::zeros(geom, rank); count] })
    }

    /// Builds a form from components in canonical basis order.
    pub fn from_components(p: usize, q: usize, comps: Vec<MatrixField>) -> Result<Self> {
        let first = comps.first().ok_or_else(|| Error::Bidegree { p, q, reason: "no components".into() })?;
        let geom = first.geom().clone();
        let rank = first.rank();
        let n = geom.n();
        if p > n || q > n || comps.len() != binomial(n, p) * binomial(n, q) {
            return Err(Error::Bidegree { p, q, reason: format!("{} components", comps.len()) });
        }
        if comps.iter().any(|c| c.rank() != rank || c.geom().as_ref() != geom.as_ref()) {
            return Err(Error::Mismatch("components disagree on torus or rank".into()));
        }
        Ok(Self { geom, rank, p, q, comps })
    }

    /// A single basis component `coeff · dz_I ∧ dz̄_K`.
    pub fn basis(coeff: MatrixField, i: Multi, kk: Multi) -> Self {
        let geom = coeff.geom().clone();
        let (p, q) = (i.count_ones() as usize, kk.count_ones() as usize);
        let mut f = Self::zero(&geom, coeff.rank(), p, q).expect("basis bidegree");
        let idx = f.index(i, kk);
        f.comps[idx] = coeff;
        f
    }

    /// The Kähler form `ω = (i/2) Σ dz_k ∧ dz̄_k` times the identity.
    pub fn kahler(geom: &Arc<TorusGeometry>, rank: usize) -> Self {
        let mut f = Self::zero(geom, rank, 1, 1).expect("(1,1) exists");
        let half_i = MatrixField::identity(geom, rank).scale(I * 0.5);
        for k in 0..geom.n() {
            let idx = f.index(1 << k, 1 << k);
            f.comps[idx] = half_i.clone();
        }
        f
    }

    pub fn geom(&self) -> &Arc<TorusGeometry> {
        &self.geom
    }

    pub fn n(&self) -> usize {
        self.geom.n()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn degree(&self) -> usize {
        self.p + self.q
    }

    pub fn components(&self) -> &[MatrixField] {
        &self.comps
    }

    /// Canonical basis `(I, K)` in storage order.
    pub fn basis_list(&self) -> Vec<(Multi, Multi)> {
        basis_of(self.n(), self.p, self.q)
    }

    pub fn index(&self, i: Multi, kk: Multi) -> usize {
        let n = self.n();
        let pi = subsets(n, self.p).iter().position(|m| *m == i).expect("multi-index of wrong size");
        let pk = subsets(n, self.q).iter().position(|m| *m == kk).expect("multi-index of wrong size");
        pi * binomial(n, self.q) + pk
    }

    pub fn component(&self, i: Multi, kk: Multi) -> &MatrixField {
        &self.comps[self.index(i, kk)]
    }

    pub fn set_component(&mut self, i: Multi, kk: Multi, f: MatrixField) {
        let idx = self.index(i, kk);
        self.comps[idx] = f;
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(&MatrixField) -> MatrixField + Sync + Send,
    {
        let comps = par::map_range(self.comps.len(), |c| f(&self.comps[c]));
        Self { geom: self.geom.clone(), rank: self.rank, p: self.p, q: self.q, comps }
    }

    fn zip<F>(&self, other: &Self, f: F) -> Self
    where
        F: Fn(&MatrixField, &MatrixField) -> MatrixField + Sync + Send,
    {
        assert_eq!(self.bidegree(), other.bidegree(), "bidegree mismatch");
        let comps = par::map_range(self.comps.len(), |c| f(&self.comps[c], &other.comps[c]));
        Self { geom: self.geom.clone(), rank: self.rank, p: self.p, q: self.q, comps }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|a| a.scale(c))
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn axpy(&self, c: C64, other: &Self) -> Self {
        self.zip(other, |a, b| a.axpy(c, b))
    }

    /// `Re ∫ Σ 2^{p+q} Tr(α_{IK} β_{IK}^*)`; same bidegree required.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.bidegree(), other.bidegree(), "bidegree mismatch");
        let w = f64::from(1u32 << (self.p + self.q));
        self.comps.iter().zip(&other.comps).map(|(a, b)| a.inner(b)).sum::<f64>() * w
    }

    /// Pointwise `Σ 2^{p+q} Re Tr(α_{IK} β_{IK}^*)` as a rank-1 field.
    pub fn pointwise_inner(&self, other: &Self) -> MatrixField {
        assert_eq!(self.bidegree(), other.bidegree(), "bidegree mismatch");
        let w = f64::from(1u32 << (self.p + self.q));
        let mut acc = MatrixField::zeros(&self.geom, 1);
        for (a, b) in self.comps.iter().zip(&other.comps) {
            acc = acc.add(&a.herm_pair(b));
        }
        // rank 1: the adjoint is the complex conjugate
        acc.add(&acc.adjoint()).scale_re(0.5 * w)
    }

    pub fn norm_sq(&self) -> f64 {
        let w = f64::from(1u32 << (self.p + self.q));
        self.comps.iter().map(|a| a.norm_sq()).sum::<f64>() * w
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }

    /// Applies `θ ↦ [θ, ·]` to every coefficient.
    pub fn bracket_with(&self, theta: &MatrixField) -> Self {
        self.map(|c| theta.commutator(c))
    }

    pub fn project_to_base(&self) -> Self {
        self.map(|c| c.project_to_base())
    }

    pub fn truncate_band(&self, cap: &[usize]) -> Self {
        self.map(|c| c.truncate_band(cap))
    }

    /// `dz_k ∧ α` (or `dz̄_k ∧ α`), zero-based `k`.
    pub fn ext(&self, k: usize, bar: bool) -> Result<Self> {
        self.check_axis(k)?;
        let (p, q) = if bar { (self.p, self.q + 1) } else { (self.p + 1, self.q) };
        let mut out = Self::zero(&self.geom, self.rank, p, q)?;
        for (c, (i, kk)) in self.basis_list().into_iter().enumerate() {
            if let Some((s, i2, k2)) = ext_basis(k, bar, i, kk) {
                let idx = out.index(i2, k2);
                out.comps[idx] = out.comps[idx].axpy(C64::new(s, 0.0), &self.comps[c]);
            }
        }
        Ok(out)
    }

    /// `i_k α` (or `ī_k α`), zero-based `k`. Contracting a form without the
    /// factor gives the zero form; contracting a `(0,·)`-form by `i_k` gives
    /// the zero form of bidegree `(0,·)`.
    pub fn contract(&self, k: usize, bar: bool) -> Result<Self> {
        self.check_axis(k)?;
        let (p, q) = if bar { (self.p, self.q.saturating_sub(1)) } else { (self.p.saturating_sub(1), self.q) };
        let mut out = Self::zero(&self.geom, self.rank, p, q)?;
        if (bar && self.q == 0) || (!bar && self.p == 0) {
            return Ok(out);
        }
        for (c, (i, kk)) in self.basis_list().into_iter().enumerate() {
            if let Some((s, i2, k2)) = contract_basis(k, bar, i, kk) {
                let idx = out.index(i2, k2);
                out.comps[idx] = out.comps[idx].axpy(C64::new(s, 0.0), &self.comps[c]);
            }
        }
        Ok(out)
    }

    /// `Λ = −(i/2) Σ_k ī_k i_k`, the adjoint of `ω ∧`. Forms with `p = 0` or
    /// `q = 0` map to the zero form of bidegree `(p−1, q−1)` clamped at 0.
    pub fn lambda(&self) -> Self {
        let (p, q) = (self.p.saturating_sub(1), self.q.saturating_sub(1));
        let mut out = Self::zero(&self.geom, self.rank, p, q).expect("lower bidegree");
        if self.p == 0 || self.q == 0 {
            return out;
        }
        for k in 0..self.n() {
            let t = self.contract(k, false).and_then(|f| f.contract(k, true)).expect("axis in range");
            out = out.add(&t);
        }
        out.scale(I * -0.5)
    }

    /// Conjugate transpose: bidegree `(q, p)`, component over `(K, I)` is
    /// the pointwise adjoint of the component over `(I, K)`.
    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zero(&self.geom, self.rank, self.q, self.p).expect("swapped bidegree");
        for (c, (i, kk)) in self.basis_list().into_iter().enumerate() {
            out.set_component(kk, i, self.comps[c].adjoint());
        }
        out
    }

    /// `α ∧ β` with coefficients combined by `rule`.
    pub fn wedge(&self, other: &Self, rule: CoeffRule) -> Result<Self> {
        if self.geom.as_ref() != other.geom.as_ref() || self.rank != other.rank {
            return Err(Error::Mismatch("wedge of forms on different bundles".into()));
        }
        let n = self.n();
        let (p, q) = (self.p + other.p, self.q + other.q);
        if p > n || q > n {
            return Err(Error::Bidegree { p, q, reason: "wedge overflows the complex dimension".into() });
        }
        let out_rank = if rule == CoeffRule::HermitianPairing { 1 } else { self.rank };
        let mut out = Self::zero(&self.geom, out_rank, p, q)?;
        let lb = self.basis_list();
        let rb = other.basis_list();
        // Collect terms per output component, then evaluate components in parallel.
        let mut terms: Vec<Vec<(f64, usize, usize)>> = vec![Vec::new(); out.comps.len()];
        for (a, &(i1, k1)) in lb.iter().enumerate() {
            for (b, &(i2, k2)) in rb.iter().enumerate() {
                if let Some((s, i3, k3)) = wedge_basis(i1, k1, i2, k2) {
                    terms[out.index(i3, k3)].push((s, a, b));
                }
            }
        }
        let zero = MatrixField::zeros(&self.geom, out_rank);
        out.comps = par::map_range(terms.len(), |c| {
            let mut acc = zero.clone();
            for &(s, a, b) in &terms[c] {
                let x = &self.comps[a];
                let y = &other.comps[b];
                let prod = match rule {
                    CoeffRule::Plain => x.matmul(y),
                    CoeffRule::LieBracket => x.commutator(y),
                    CoeffRule::HermitianPairing => x.herm_pair(y),
                };
                acc = acc.axpy(C64::new(s, 0.0), &prod);
            }
            acc
        });
        Ok(out)
    }

    /// `α ∧ β`, except that a product landing above the complex dimension
    /// is the (empty) zero form of that bidegree instead of an error.
    pub fn wedge_or_vanish(&self, other: &Self, rule: CoeffRule) -> Result<Self> {
        let (p, q) = (self.p + other.p, self.q + other.q);
        if p > self.n() || q > self.n() {
            let rank = if rule == CoeffRule::HermitianPairing { 1 } else { self.rank };
            return Self::zero(&self.geom, rank, p, q);
        }
        self.wedge(other, rule)
    }

    /// Conjugate-linear Hodge star `*̄ : Ω^{p,q} → Ω^{n−p,n−q}`, fixed by
    /// `⟨α, β⟩ vol = α ∧^{⟨,⟩_C} *̄β` where `⟨a, c⟩_C = −Tr(a c)` is the
    /// complex-bilinear extension of the Killing metric on `u_E`.
    ///
    /// On a basis element the relation pins `*̄(b e_J) = μ_J b^* e_{J^c}`;
    /// `μ_J` comes from the wedge sign `e_J ∧ e_{J^c} = σ e_top` and the
    /// ratio `e_top = λ vol`: `−μ σ λ = ‖e_J‖²`.
    pub fn hodge_star_bar(&self) -> Self {
        let n = self.n();
        let all = ((1u16 << n) - 1) as Multi;
        let lambda = top_form_ratio(n);
        let mut out = Self::zero(&self.geom, self.rank, n - self.p, n - self.q).expect("complementary bidegree");
        for (c, (i, kk)) in self.basis_list().into_iter().enumerate() {
            let (ic, kc) = (all & !i, all & !kk);
            let (sigma, _, _) = wedge_basis(i, kk, ic, kc).expect("complement is disjoint");
            let mu = -basis_norm_sq(i, kk) / (lambda * sigma);
            out.set_component(ic, kc, self.comps[c].adjoint().scale(mu));
        }
        out
    }

    /// Evaluates the form on complex tangent vectors (one per degree).
    pub fn evaluate(&self, vectors: &[TangentVector]) -> Result<MatrixField> {
        if vectors.len() != self.degree() {
            return Err(Error::Bidegree {
                p: self.p,
                q: self.q,
                reason: format!("evaluated on {} vectors", vectors.len()),
            });
        }
        let mut acc = MatrixField::zeros(&self.geom, self.rank);
        for (c, (i, kk)) in self.basis_list().into_iter().enumerate() {
            let v = eval_basis(i, kk, vectors);
            if v != ZERO {
                acc = acc.axpy(v, &self.comps[c]);
            }
        }
        Ok(acc)
    }

    /// Flat `∂̄` (or `∂`): `Σ_k dz̄_k ∧ ∂_{z̄_k}`. From top degree the result
    /// is the empty form one degree up.
    pub fn d_flat(&self, bar: bool) -> Self {
        let n = self.n();
        let (p, q) = if bar { (self.p, self.q + 1) } else { (self.p + 1, self.q) };
        if p > n || q > n {
            return Self::zero(&self.geom, self.rank, p, q).expect("one degree up");
        }
        let mut acc: Option<Self> = None;
        for k in 0..n {
            let t = self.map(|c| c.wirtinger(k, bar)).ext(k, bar).expect("axis in range");
            acc = Some(match acc {
                None => t,
                Some(a) => a.add(&t),
            });
        }
        acc.expect("n >= 1")
    }

    /// Random band-limited form with complex Gaussian Fourier coefficients,
    /// scaled so that `‖α‖² = amplitude² · vol`.
    pub fn random<R: Rng + ?Sized>(
        geom: &Arc<TorusGeometry>,
        rank: usize,
        (p, q): (usize, usize),
        band: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut f = Self::zero(geom, rank, p, q)?;
        let bands = vec![band; geom.n_axes()];
        for c in f.comps.iter_mut() {
            *c = MatrixField::from_modes(geom, rank, bands.clone(), |_, _| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
        }
        let norm = f.norm();
        if norm > 0.0 {
            f = f.scale_re(amplitude * geom.volume().sqrt() / norm);
        }
        Ok(f)
    }

    fn check_axis(&self, k: usize) -> Result<()> {
        if k >= self.n() {
            return Err(Error::Index(format!("complex axis {k} on a torus of dimension {}", self.n())));
        }
        Ok(())
    }
}

/// Canonical basis of `Ω^{p,q}` in storage order.
pub fn basis_of(n: usize, p: usize, q: usize) -> Vec<(Multi, Multi)> {
    let ks = subsets(n, q);
    subsets(n, p).into_iter().flat_map(|i| ks.iter().map(move |k| (i, *k))).collect()
}
