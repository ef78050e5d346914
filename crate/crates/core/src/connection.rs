//! Unitary connections on the trivial bundle, their curvature, and the two
//! gauge actions.
//!
//! A connection is `d + a` with `a = a^{0,1} + a^{1,0}` and
//! `a^{1,0} = −(a^{0,1})^*`; only `a^{0,1}` is stored. In rank 1 a constant
//! background curvature may be added, which stands in for a line bundle with
//! nonzero Chern class: every operator here acts on `End(E)`-valued forms,
//! and for a line bundle those are ordinary periodic functions.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{MatrixField, C64, I, ONE, ZERO};
use crate::forms::{CoeffRule, FormPQ};
use crate::geometry::TorusGeometry;

/// Constant abelian background curvature
/// `f20 dz_1∧dz_2 + Σ f11[k][l] dz_k∧dz̄_l + f02 dz̄_1∧dz̄_2`.
///
/// Imaginary-valued: `f20 = −conj(f02)` and `f11` is a Hermitian matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Background {
    pub f20: C64,
    pub f11: [[C64; 2]; 2],
    pub f02: C64,
}

impl Background {
    /// `√-1 (dz_1∧dz_2 + dz̄_1∧dz̄_2)`: `F^{1,1} = 0`, `∂_A F^{0,2} = 0`.
    pub fn holomorphic_pair() -> Self {
        Self { f20: I, f11: [[ZERO; 2]; 2], f02: I }
    }

    /// Serialization order: `f20, f11[0][0], f11[0][1], f11[1][0], f11[1][1], f02`.
    pub fn coeffs(&self) -> [C64; 6] {
        [self.f20, self.f11[0][0], self.f11[0][1], self.f11[1][0], self.f11[1][1], self.f02]
    }

    pub fn from_coeffs(c: [C64; 6]) -> Self {
        Self { f20: c[0], f11: [[c[1], c[2]], [c[3], c[4]]], f02: c[5] }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let scale = self.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
        let tol = 1e-14 * scale;
        if (self.f20 + self.f02.conj()).norm() > tol {
            return Err(Error::Connection("background: f20 must equal −conj(f02)".into()));
        }
        for k in 0..2 {
            for l in 0..2 {
                if (self.f11[k][l] - self.f11[l][k].conj()).norm() > tol {
                    return Err(Error::Connection("background: f11 must be Hermitian".into()));
                }
            }
        }
        if n == 1 {
            let extra = [self.f20, self.f02, self.f11[0][1], self.f11[1][0], self.f11[1][1]];
            if extra.iter().any(|c| c.norm() > 0.0) {
                return Err(Error::Connection("background: only f11[0][0] exists when n = 1".into()));
            }
        }
        Ok(())
    }

    fn forms(&self, geom: &Arc<TorusGeometry>) -> (FormPQ, FormPQ, FormPQ) {
        let n = geom.n();
        let c = |v: C64| MatrixField::constant(geom, 1, &[v]);
        let mut f20 = FormPQ::zero(geom, 1, 2, 0).expect("(2,0)");
        let mut f11 = FormPQ::zero(geom, 1, 1, 1).expect("(1,1)");
        let mut f02 = FormPQ::zero(geom, 1, 0, 2).expect("(0,2)");
        if n == 2 {
            f20.set_component(0b11, 0, c(self.f20));
            f02.set_component(0, 0b11, c(self.f02));
        }
        for k in 0..n {
            for l in 0..n {
                f11.set_component(1 << k, 1 << l, c(self.f11[k][l]));
            }
        }
        (f20, f11, f02)
    }
}

/// The three bidegree parts of the curvature. For `n = 1` the `(2,0)` and
/// `(0,2)` parts are the (empty) zero forms.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub f20: FormPQ,
    pub f11: FormPQ,
    pub f02: FormPQ,
}

impl Curvature {
    pub fn norm_sq(&self) -> f64 {
        self.f20.norm_sq() + self.f11.norm_sq() + self.f02.norm_sq()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    fn map(&self, f: impl Fn(&FormPQ) -> FormPQ) -> Self {
        Self { f20: f(&self.f20), f11: f(&self.f11), f02: f(&self.f02) }
    }
}

#[derive(Clone, Debug)]
pub struct Connection {
    geom: Arc<TorusGeometry>,
    rank: usize,
    a01: FormPQ,
    bg: Option<Background>,
}

impl Connection {
    pub fn new(a01: FormPQ, bg: Option<Background>) -> Result<Self> {
        if a01.bidegree() != (0, 1) {
            let (p, q) = a01.bidegree();
            return Err(Error::Bidegree { p, q, reason: "connection form must be (0,1)".into() });
        }
        let geom = a01.geom().clone();
        let rank = a01.rank();
        if rank == 0 {
            return Err(Error::Connection("rank must be positive".into()));
        }
        if let Some(b) = &bg {
            if rank != 1 {
                return Err(Error::Connection("background curvature requires rank 1".into()));
            }
            b.validate(geom.n())?;
        }
        Ok(Self { geom, rank, a01, bg })
    }

    /// The product connection `d`.
    pub fn trivial(geom: &Arc<TorusGeometry>, rank: usize) -> Result<Self> {
        Self::new(FormPQ::zero(geom, rank, 0, 1)?, None)
    }

    /// Band-limited random `a^{0,1}` with RMS size `amplitude`.
    pub fn random<R: Rng + ?Sized>(
        geom: &Arc<TorusGeometry>,
        rank: usize,
        amplitude: f64,
        band: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(FormPQ::random(geom, rank, (0, 1), band, amplitude, rng)?, None)
    }

    /// Rank-1 connection with background `√-1 (dz_1∧dz_2 + dz̄_1∧dz̄_2)`:
    /// almost holomorphic, not holomorphic, a critical point of the functional.
    pub fn holomorphic_pair_fixture(geom: &Arc<TorusGeometry>) -> Result<Self> {
        if geom.n() != 2 {
            return Err(Error::Connection("the background fixture needs n = 2".into()));
        }
        Self::new(FormPQ::zero(geom, 1, 0, 1)?, Some(Background::holomorphic_pair()))
    }

    /// Same background, new `a^{0,1}`.
    pub fn with_a01(&self, a01: FormPQ) -> Result<Self> {
        Self::new(a01, self.bg)
    }

    pub fn geom(&self) -> &Arc<TorusGeometry> {
        &self.geom
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn a01(&self) -> &FormPQ {
        &self.a01
    }

    pub fn background(&self) -> Option<&Background> {
        self.bg.as_ref()
    }

    /// `a^{1,0} = −(a^{0,1})^*`.
    pub fn a10(&self) -> FormPQ {
        self.a01.conj_transpose().scale_re(-1.0)
    }

    /// The `dz̄_k`-coefficient of `a^{0,1}`.
    pub fn a_bar(&self, k: usize) -> &MatrixField {
        self.a01.component(0, 1 << k)
    }

    /// The `dz_k`-coefficient of `a^{1,0}`.
    pub fn a_holo(&self, k: usize) -> MatrixField {
        self.a_bar(k).adjoint().scale_re(-1.0)
    }

    /// `F^{0,2} = ∂̄a^{0,1} + a^{0,1}∧a^{0,1}` (plus background).
    pub fn f02(&self) -> FormPQ {
        if self.geom.n() < 2 {
            return FormPQ::zero(&self.geom, self.rank, 0, 2).expect("empty (0,2)");
        }
        let mut f = self.a01.d_flat(true).add(&self.a01.wedge(&self.a01, CoeffRule::Plain).expect("(0,2)"));
        if let Some(b) = &self.bg {
            f = f.add(&b.forms(&self.geom).2);
        }
        f
    }

    /// `F^{1,1} = ∂a^{0,1} + ∂̄a^{1,0} + a^{1,0}∧a^{0,1} + a^{0,1}∧a^{1,0}`
    /// (plus background).
    pub fn f11(&self) -> FormPQ {
        let a01 = &self.a01;
        let a10 = self.a10();
        // The two products combine to Σ [a_j, a_k̄] dz_j∧dz̄_k.
        let mut f11 = a01
            .d_flat(false)
            .add(&a10.d_flat(true))
            .add(&a10.wedge(a01, CoeffRule::LieBracket).expect("(1,1)"));
        if let Some(b) = &self.bg {
            f11 = f11.add(&b.forms(&self.geom).1);
        }
        f11
    }

    /// All three parts; `F^{2,0}` is `−(F^{0,2})^*`.
    pub fn curvature(&self) -> Curvature {
        let f02 = self.f02();
        let f20 = f02.conj_transpose().scale_re(-1.0);
        Curvature { f20, f11: self.f11(), f02 }
    }

    /// `F^{2,0} = ∂a^{1,0} + a^{1,0}∧a^{1,0}` computed from `a^{1,0}` directly.
    pub fn f20_direct(&self) -> FormPQ {
        if self.geom.n() < 2 {
            return FormPQ::zero(&self.geom, self.rank, 2, 0).expect("empty (2,0)");
        }
        let a10 = self.a10();
        let mut f = a10.d_flat(false).add(&a10.wedge(&a10, CoeffRule::Plain).expect("(2,0)"));
        if let Some(b) = &self.bg {
            f = f.add(&b.forms(&self.geom).0);
        }
        f
    }
}

/// A pointwise invertible matrix field together with its inverse.
#[derive(Clone, Debug)]
pub struct GaugeTransform {
    g: MatrixField,
    g_inv: MatrixField,
    unitary: bool,
}

const GAUGE_TOL: f64 = 1e-12;

impl GaugeTransform {
    /// Inverse computed pointwise; a unitary claim is checked.
    pub fn new(g: MatrixField, unitary: bool) -> Result<Self> {
        let g_inv = g.inverse().map_err(|e| Error::Gauge(format!("{e}")))?;
        Self::with_inverse(g, g_inv, unitary)
    }

    /// Uses a known band-limited inverse so that `g⁻¹` stays exactly
    /// representable; `g·g⁻¹ = 1` is checked.
    pub fn with_inverse(g: MatrixField, g_inv: MatrixField, unitary: bool) -> Result<Self> {
        let r = g.rank();
        let id = MatrixField::identity(g.geom(), r);
        let defect = g.matmul(&g_inv).max_abs_diff(&id);
        if !(defect <= GAUGE_TOL * g.max_abs().max(1.0) * g_inv.max_abs().max(1.0)) {
            return Err(Error::Gauge(format!("g·g⁻¹ differs from 1 by {defect:.3e}")));
        }
        if unitary {
            let defect = g.matmul(&g.adjoint()).max_abs_diff(&id);
            if !(defect <= GAUGE_TOL) {
                return Err(Error::Gauge(format!("g·g* differs from 1 by {defect:.3e}")));
            }
        }
        Ok(Self { g, g_inv, unitary })
    }

    pub fn identity(geom: &Arc<TorusGeometry>, rank: usize) -> Self {
        let id = MatrixField::identity(geom, rank);
        Self { g: id.clone(), g_inv: id, unitary: true }
    }

    /// A constant matrix `m` (row-major).
    pub fn constant(geom: &Arc<TorusGeometry>, rank: usize, m: &[C64], unitary: bool) -> Result<Self> {
        let inv = invert(rank, m)?;
        Self::with_inverse(
            MatrixField::constant(geom, rank, m),
            MatrixField::constant(geom, rank, &inv),
            unitary,
        )
    }

    /// `U · diag(e^{√-1 k_j·x}) · V` with Haar-like constant unitaries and
    /// integer wave vectors `|k_j|_∞ ≤ band`.
    pub fn random_unitary<R: Rng + ?Sized>(
        geom: &Arc<TorusGeometry>,
        rank: usize,
        band: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let u = random_unitary_matrix(rank, rng);
        let v = random_unitary_matrix(rank, rng);
        let waves = random_waves(geom, rank, band, rng);
        let (d, d_inv) = phase_diagonal(geom, rank, band, &waves, &vec![ONE; rank]);
        let cu = MatrixField::constant(geom, rank, &u);
        let cv = MatrixField::constant(geom, rank, &v);
        let g = cu.matmul(&d).matmul(&cv);
        let g_inv = cv.adjoint().matmul(&d_inv).matmul(&cu.adjoint());
        Self::with_inverse(g, g_inv, true)
    }

    /// `C_1 · diag(c_j e^{√-1 k_j·x}) · C_2` with `C_i` random near-identity
    /// constant matrices and `|c_j|` spread over `[½, 2]`; generically not
    /// unitary.
    pub fn random_complex<R: Rng + ?Sized>(
        geom: &Arc<TorusGeometry>,
        rank: usize,
        band: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let near_id = |rng: &mut R| -> Vec<C64> {
            (0..rank * rank)
                .map(|e| {
                    let z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    if e / rank == e % rank {
                        ONE + z * 0.2
                    } else {
                        z * 0.2
                    }
                })
                .collect()
        };
        let c1 = near_id(rng);
        let c2 = near_id(rng);
        let scales: Vec<C64> = (0..rank)
            .map(|_| {
                let m = 2f64.powf(rng.random_range(-1.0..1.0));
                C64::from_polar(m, rng.random_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        let waves = random_waves(geom, rank, band, rng);
        let (d, d_inv) = phase_diagonal(geom, rank, band, &waves, &scales);
        let m1 = MatrixField::constant(geom, rank, &c1);
        let m2 = MatrixField::constant(geom, rank, &c2);
        let i1 = MatrixField::constant(geom, rank, &invert(rank, &c1)?);
        let i2 = MatrixField::constant(geom, rank, &invert(rank, &c2)?);
        let g = m1.matmul(&d).matmul(&m2);
        let g_inv = i2.matmul(&d_inv).matmul(&i1);
        Self::with_inverse(g, g_inv, false)
    }

    pub fn g(&self) -> &MatrixField {
        &self.g
    }

    pub fn g_inv(&self) -> &MatrixField {
        &self.g_inv
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    /// `g φ g⁻¹` on every coefficient.
    pub fn conjugate(&self, phi: &FormPQ) -> FormPQ {
        phi.map(|c| self.g.matmul(c).matmul(&self.g_inv))
    }

    /// `g a^{0,1} g⁻¹ − (∂̄g) g⁻¹`.
    fn transformed_a01(&self, a: &Connection) -> FormPQ {
        let dbar_g = FormPQ::from_components(0, 0, vec![self.g.clone()]).expect("0-form").d_flat(true);
        self.conjugate(a.a01()).sub(&dbar_g.map(|c| c.matmul(&self.g_inv)))
    }
}

fn invert(rank: usize, m: &[C64]) -> Result<Vec<C64>> {
    let mat = DMatrix::from_row_slice(rank, rank, m);
    let inv = mat.try_inverse().ok_or_else(|| Error::Gauge("singular constant matrix".into()))?;
    Ok(inv.transpose().iter().copied().collect())
}

/// Gram-Schmidt on a complex Gaussian matrix; rows of the result are
/// orthonormal.
fn random_unitary_matrix<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> Vec<C64> {
    let mut m: Vec<C64> =
        (0..rank * rank).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    for i in 0..rank {
        for j in 0..i {
            let dot: C64 = (0..rank).map(|c| m[i * rank + c] * m[j * rank + c].conj()).sum();
            for c in 0..rank {
                let v = m[j * rank + c];
                m[i * rank + c] -= dot * v;
            }
        }
        let nrm = (0..rank).map(|c| m[i * rank + c].norm_sqr()).sum::<f64>().sqrt();
        for c in 0..rank {
            m[i * rank + c] /= nrm;
        }
    }
    m
}

fn random_waves<R: Rng + ?Sized>(geom: &TorusGeometry, rank: usize, band: usize, rng: &mut R) -> Vec<Vec<i64>> {
    let b = band as i64;
    (0..rank).map(|_| (0..geom.n_axes()).map(|_| rng.random_range(-b..=b)).collect()).collect()
}

/// `diag(c_j e^{√-1 k_j·x})` and its inverse.
fn phase_diagonal(
    geom: &Arc<TorusGeometry>,
    rank: usize,
    band: usize,
    waves: &[Vec<i64>],
    scales: &[C64],
) -> (MatrixField, MatrixField) {
    let bands = vec![band; geom.n_axes()];
    let build = |sign: i64, inv: bool| {
        MatrixField::from_modes(geom, rank, bands.clone(), |k, e| {
            let (i, j) = (e / rank, e % rank);
            if i == j && k.iter().zip(&waves[i]).all(|(a, b)| *a == sign * *b) {
                if inv {
                    ONE / scales[i]
                } else {
                    scales[i]
                }
            } else {
                ZERO
            }
        })
    };
    (build(1, false), build(-1, true))
}

/// `a^{0,1} ↦ g a^{0,1} g⁻¹ − (∂̄g) g⁻¹` for unitary `g`.
pub fn gauge_unitary(a: &Connection, g: &GaugeTransform) -> Result<Connection> {
    if !g.is_unitary() {
        return Err(Error::Gauge("unitary action needs a unitary gauge transform".into()));
    }
    check_gauge(a, g)?;
    a.with_a01(g.transformed_a01(a))
}

/// The complexified action `∂̄_{ĝ(A)} = g ∂̄_A g⁻¹`,
/// `∂_{ĝ(A)} = ∂_A + [(∂̄_A g) g⁻¹]^*`. The `(1,0)`-part is built from the
/// second formula and must be the negative adjoint of the new `(0,1)`-part.
pub fn gauge_complex_hat(a: &Connection, g: &GaugeTransform) -> Result<Connection> {
    check_gauge(a, g)?;
    let a01 = g.transformed_a01(a);
    // ∂̄_A g = ∂̄g + [a^{0,1}, g] on End(E)-valued sections.
    let g0 = FormPQ::from_components(0, 0, vec![g.g().clone()]).expect("0-form");
    let dbar_a_g = g0.d_flat(true).add(&a.a01().map(|c| c.commutator(g.g())));
    let shift = dbar_a_g.map(|c| c.matmul(g.g_inv())).conj_transpose();
    let a10 = a.a10().add(&shift);
    let expected = a01.conj_transpose().scale_re(-1.0);
    let defect = a10.sub(&expected).max_abs();
    let scale = a10.max_abs().max(expected.max_abs()).max(1.0);
    if !(defect <= 1e-10 * scale) {
        return Err(Error::Gauge(format!("(1,0)-part is not −((0,1)-part)^*: defect {defect:.3e}")));
    }
    a.with_a01(a01)
}

fn check_gauge(a: &Connection, g: &GaugeTransform) -> Result<()> {
    if g.g().rank() != a.rank() || g.g().geom().as_ref() != a.geom().as_ref() {
        return Err(Error::Mismatch("gauge transform and connection live on different bundles".into()));
    }
    Ok(())
}

impl Curvature {
    /// `g F g⁻¹` in every bidegree.
    pub fn conjugated(&self, g: &GaugeTransform) -> Self {
        self.map(|f| g.conjugate(f))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            f20: self.f20.sub(&other.f20),
            f11: self.f11.sub(&other.f11),
            f02: self.f02.sub(&other.f02),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn torus() -> Arc<TorusGeometry> {
        TorusGeometry::new(2, 8, 2.0 * PI, true).unwrap()
    }

    #[test]
    fn trivial_connection_is_flat() {
        let g = torus();
        let f = Connection::trivial(&g, 2).unwrap().curvature();
        assert_eq!(f.norm(), 0.0);
    }

    #[test]
    fn fixture_curvature() {
        let g = torus();
        let a = Connection::holomorphic_pair_fixture(&g).unwrap();
        let f = a.curvature();
        assert_eq!(f.f11.max_abs(), 0.0);
        assert_eq!(f.f02.component(0, 0b11).data()[0], I);
        assert_eq!(f.f20.component(0b11, 0).data()[0], I);
    }

    #[test]
    fn background_requires_rank_one() {
        let g = torus();
        let a01 = FormPQ::zero(&g, 2, 0, 1).unwrap();
        assert!(Connection::new(a01, Some(Background::holomorphic_pair())).is_err());
        let bad = Background { f20: I, f11: [[ZERO; 2]; 2], f02: ONE };
        assert!(Connection::new(FormPQ::zero(&g, 1, 0, 1).unwrap(), Some(bad)).is_err());
    }

    #[test]
    fn f20_from_a10_matches_adjoint_of_f02() {
        let g = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Connection::random(&g, 2, 0.3, 2, &mut rng).unwrap();
        let f = a.curvature();
        let direct = a.f20_direct();
        assert!(direct.sub(&f.f20).max_abs() < 1e-13 * f.f20.max_abs().max(1.0));
        // u_E-valued curvature: the (1,1) part is fixed by conj_transpose
        let f11_conj = f.f11.conj_transpose();
        assert!(f11_conj.sub(&f.f11).max_abs() < 1e-13);
    }

    #[test]
    fn unitary_gauge_conjugates_curvature() {
        let g = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Connection::random(&g, 2, 0.2, 2, &mut rng).unwrap();
        let u = GaugeTransform::random_unitary(&g, 2, 1, &mut rng).unwrap();
        let b = gauge_unitary(&a, &u).unwrap();
        let d = b.curvature().sub(&a.curvature().conjugated(&u));
        assert!(d.norm() < 1e-12 * a.curvature().norm());
        let c = gauge_complex_hat(&a, &u).unwrap();
        assert!(c.a01().sub(b.a01()).max_abs() < 1e-12);
    }

    #[test]
    fn complex_gauge_conjugates_f02() {
        let g = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Connection::random(&g, 2, 0.2, 1, &mut rng).unwrap();
        let h = GaugeTransform::random_complex(&g, 2, 1, &mut rng).unwrap();
        assert!(gauge_unitary(&a, &h).is_err());
        let b = gauge_complex_hat(&a, &h).unwrap();
        let want = h.conjugate(&a.f02());
        assert!(b.f02().sub(&want).max_abs() < 1e-11 * want.max_abs());
    }
}
