//! Structural invariants over random inputs.

use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ymbar::calculus::{dbar_a, partial_a};
use ymbar::field::I;
use ymbar::forms::{basis_of, CoeffRule};
use ymbar::functional::{classify, ymbar, HolomorphyClass};
use ymbar::geometry::TangentVector;
use ymbar::{
    gauge_complex_hat, gauge_unitary, l2_inner, Background, Connection, FormPQ, GaugeTransform, MatrixField,
    TorusGeometry, C64,
};

fn torus(n: usize) -> Arc<TorusGeometry> {
    TorusGeometry::new(n, 8, 2.0 * PI, true).unwrap()
}

fn rel(x: &FormPQ, y: &FormPQ) -> f64 {
    let s = x.norm().max(y.norm());
    if s == 0.0 {
        0.0
    } else {
        x.sub(y).norm() / s
    }
}

fn bidegree(n: usize) -> impl Strategy<Value = (usize, usize)> {
    (0..=n, 0..=n)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// Derivatives of a random trigonometric polynomial below Nyquist equal
    /// the mode-wise multipliers `½(√-1 κ_x ± √-1·√-1 κ_y)`.
    #[test]
    fn fourier_differentiation_is_exact(seed: u64, n in 1usize..=2, band in 1usize..=3, k in 0usize..2, bar: bool) {
        prop_assume!(k < n);
        let g = torus(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2 * n;
        let nbox = (2 * band + 1).pow(d as u32);
        let coeffs: Vec<C64> = (0..nbox).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let index = |m: &[i64]| m.iter().fold(0usize, |acc, &x| acc * (2 * band + 1) + (x + band as i64) as usize);
        let f = MatrixField::from_modes(&g, 1, vec![band; d], |m, _| coeffs[index(m)]);
        let sign = if bar { 1.0 } else { -1.0 };
        let want = MatrixField::from_modes(&g, 1, vec![band; d], |m, _| {
            let (kx, ky) = (g.wavenumber(m[2 * k]), g.wavenumber(m[2 * k + 1]));
            coeffs[index(m)] * (I * kx + I * I * ky * sign) * 0.5
        });
        let got = ymbar::wirtinger(&g, &f, k, bar).unwrap();
        prop_assert!(got.max_abs_diff(&want) <= 1e-12 * want.max_abs().max(1.0));
    }

    #[test]
    fn l2_inner_is_a_real_inner_product(seed: u64, (p, q) in bidegree(2), s in -3.0f64..3.0) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = FormPQ::random(&g, 2, (p, q), 2, 1.0, &mut rng).unwrap();
        let b = FormPQ::random(&g, 2, (p, q), 2, 1.0, &mut rng).unwrap();
        let c = FormPQ::random(&g, 2, (p, q), 2, 1.0, &mut rng).unwrap();
        let ip = |x: &FormPQ, y: &FormPQ| l2_inner(&g, x, y).unwrap();
        let scale = a.norm() * b.norm();
        prop_assert!((ip(&a, &b) - ip(&b, &a)).abs() <= 1e-13 * scale);
        let lin = ip(&a.axpy(C64::new(s, 0.0), &c), &b) - ip(&a, &b) - s * ip(&c, &b);
        prop_assert!(lin.abs() <= 1e-12 * scale * (1.0 + s.abs()));
        prop_assert!(ip(&a, &a) > 0.0);
    }

    /// `‖c e_{IK}‖² = 2^{p+q} · vol · Σ_k |ĉ_k|²` by Parseval.
    #[test]
    fn single_component_norm_matches_parseval(seed: u64, (p, q) in bidegree(2), band in 0usize..=3) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = 0.0;
        let coeff = MatrixField::from_modes(&g, 1, vec![band; 4], |_, _| {
            let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            total += c.norm_sqr();
            c
        });
        let basis = basis_of(2, p, q);
        let (i, kk) = basis[rng.random_range(0..basis.len())];
        let f = FormPQ::basis(coeff, i, kk);
        let want = f64::from(1u32 << (p + q)) * g.volume() * total;
        prop_assert!((l2_inner(&g, &f, &f).unwrap() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn ricci_is_zero(h in proptest::collection::vec(-5.0f64..5.0, 4)) {
        let g = torus(2);
        let v = TangentVector {
            holo: vec![C64::new(h[0], h[1]), C64::new(h[2], h[3])],
            anti: vec![C64::new(h[3], h[0]), C64::new(h[1], h[2])],
        };
        prop_assert!(g.ricci(&v).is_zero());
    }

    #[test]
    fn wedge_is_graded_and_associative(seed: u64, a in bidegree(1), b in bidegree(1), c in bidegree(1)) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand = |bd| FormPQ::random(&g, 1, bd, 1, 1.0, &mut rng).unwrap();
        let (x, y, z) = (rand(a), rand(b), rand(c));
        let xy = x.wedge(&y, CoeffRule::Plain).unwrap();
        let yx = y.wedge(&x, CoeffRule::Plain).unwrap();
        let sign = if x.degree() * y.degree() % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(rel(&xy, &yx.scale_re(sign)) < 1e-13);
        if let (Ok(l), Ok(yz)) = (xy.wedge(&z, CoeffRule::Plain), y.wedge(&z, CoeffRule::Plain)) {
            let r = x.wedge(&yz, CoeffRule::Plain).unwrap();
            prop_assert!(rel(&l, &r) < 1e-13);
        }
    }

    /// `i_k` (`ī_k`) is the pointwise adjoint of `dz_k ∧` (`dz̄_k ∧`).
    #[test]
    fn contraction_is_adjoint_of_wedge(seed: u64, (p, q) in bidegree(2), k in 0usize..2, bar: bool) {
        let (tp, tq) = if bar { (p, q + 1) } else { (p + 1, q) };
        prop_assume!(tp <= 2 && tq <= 2);
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = FormPQ::random(&g, 2, (p, q), 0, 1.0, &mut rng).unwrap();
        let b = FormPQ::random(&g, 2, (tp, tq), 0, 1.0, &mut rng).unwrap();
        let l = a.ext(k, bar).unwrap().inner(&b);
        let r = a.inner(&b.contract(k, bar).unwrap());
        prop_assert!((l - r).abs() <= 1e-12 * a.norm() * b.norm());
    }

    #[test]
    fn lambda_is_adjoint_of_omega(seed: u64, p in 0usize..2, q in 0usize..2) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = FormPQ::random(&g, 2, (p, q), 1, 1.0, &mut rng).unwrap();
        let b = FormPQ::random(&g, 2, (p + 1, q + 1), 1, 1.0, &mut rng).unwrap();
        let omega = FormPQ::kahler(&g, 2);
        let l = omega.wedge(&a, CoeffRule::Plain).unwrap().pointwise_inner(&b);
        let r = a.pointwise_inner(&b.lambda());
        prop_assert!(l.max_abs_diff(&r) <= 1e-12 * l.max_abs().max(1.0));
    }

    #[test]
    fn conj_transpose_is_an_isometric_involution(seed: u64, (p, q) in bidegree(2)) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = FormPQ::random(&g, 2, (p, q), 2, 1.0, &mut rng).unwrap();
        let s = a.conj_transpose();
        prop_assert_eq!(s.bidegree(), (q, p));
        prop_assert!(s.conj_transpose().sub(&a).max_abs() == 0.0);
        let (na, ns) = (a.pointwise_inner(&a), s.pointwise_inner(&s));
        prop_assert!(na.max_abs_diff(&ns) <= 1e-13 * na.max_abs());
    }

    #[test]
    fn unitary_gauge_conjugates_curvature(seed: u64, rank in 1usize..=2) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Connection::random(&g, rank, 0.3, 1, &mut rng).unwrap();
        let u = GaugeTransform::random_unitary(&g, rank, 1, &mut rng).unwrap();
        let b = gauge_unitary(&a, &u).unwrap();
        let want = a.curvature().conjugated(&u);
        let got = b.curvature();
        let scale = want.norm().max(1e-300);
        prop_assert!(got.sub(&want).norm() <= 1e-12 * scale);
        prop_assert!((ymbar(&b) - ymbar(&a)).abs() <= 1e-12 * ymbar(&a).max(1e-300));
    }

    #[test]
    fn complex_gauge_conjugates_f02(seed: u64) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Connection::random(&g, 2, 0.2, 1, &mut rng).unwrap();
        let h = GaugeTransform::random_complex(&g, 2, 1, &mut rng).unwrap();
        let b = gauge_complex_hat(&a, &h).unwrap();
        let want = h.conjugate(&a.f02());
        prop_assert!(b.f02().sub(&want).max_abs() <= 1e-11 * want.max_abs());
    }

    /// Complex gauge transforms of the product connection are holomorphic.
    #[test]
    fn complex_gauge_of_flat_is_holomorphic(seed: u64) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = GaugeTransform::random_complex(&g, 2, 1, &mut rng).unwrap();
        let b = gauge_complex_hat(&Connection::trivial(&g, 2).unwrap(), &h).unwrap();
        prop_assert!(ymbar(&b) >= 0.0);
        prop_assert!(ymbar(&b) <= 1e-24 * b.curvature().norm_sq().max(1.0));
        prop_assert_eq!(classify(&b, 1e-10).class, HolomorphyClass::Holomorphic);
    }

    /// Rank one with background: `F^{0,2} = f02 + ∂̄a^{0,1}` whatever the unitary gauge.
    #[test]
    fn abelian_f02_is_gauge_independent(seed: u64) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a01 = FormPQ::random(&g, 1, (0, 1), 2, 0.3, &mut rng).unwrap();
        let a = Connection::new(a01.clone(), Some(Background::holomorphic_pair())).unwrap();
        let u = GaugeTransform::random_unitary(&g, 1, 2, &mut rng).unwrap();
        let b = gauge_unitary(&a, &u).unwrap();
        prop_assert!(rel(&b.f02(), &a.f02()) < 1e-12);
        let bg = FormPQ::basis(MatrixField::constant(&g, 1, &[I]), 0, 0b11);
        prop_assert!(rel(&a.f02(), &bg.add(&a01.d_flat(true))) < 1e-13);
    }

    /// `(∂_A ∂̄_A + ∂̄_A ∂_A) s = [F^{1,1}, s]` on sections of `End E`.
    #[test]
    fn mixed_second_derivatives_give_f11(seed: u64) {
        let g = torus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Connection::random(&g, 2, 0.3, 1, &mut rng).unwrap();
        let s = FormPQ::random(&g, 2, (0, 0), 1, 1.0, &mut rng).unwrap();
        let lhs = partial_a(&a, &dbar_a(&a, &s)).add(&dbar_a(&a, &partial_a(&a, &s)));
        let rhs = a.f11().wedge(&s, CoeffRule::LieBracket).unwrap();
        prop_assert!(rel(&lhs, &rhs) < 1e-11);
    }
}

/// On `n = 2`, `Λ : Ω^{1,2} → Ω^{0,1}` is injective.
#[test]
fn lambda_is_injective_on_top_antiholomorphic_degree() {
    let g = torus(2);
    let basis = basis_of(2, 1, 2);
    let mut cols = Vec::new();
    for &(i, kk) in &basis {
        let l = FormPQ::basis(MatrixField::identity(&g, 1), i, kk).lambda();
        cols.push(l.components().iter().map(|c| c.data()[0]).collect::<Vec<C64>>());
    }
    assert_eq!(cols.len(), 2);
    let det = cols[0][0] * cols[1][1] - cols[0][1] * cols[1][0];
    assert!(det.norm() > 1e-3, "{det}");
}

/// With `F^{1,1} = 0` at the fixture, `⟨(ΛF^{1,1})F^{0,2}, F^{0,2}⟩ = 0`.
#[test]
fn fixture_curvature_pairing_vanishes() {
    let g = torus(2);
    let a = Connection::holomorphic_pair_fixture(&g).unwrap();
    let f = a.curvature();
    let lf = f.f11.lambda().components()[0].clone();
    let prod = f.f02.map(|c| lf.matmul(c));
    assert_eq!(prod.inner(&f.f02), 0.0);
    assert!((ymbar(&a) - 0.5 * f.f02.norm_sq()).abs() <= 1e-14 * ymbar(&a));
    assert!(ymbar(&a) > 0.0);
}
