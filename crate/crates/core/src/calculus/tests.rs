use super::*;
use crate::field::MatrixField;
use crate::geometry::{TangentVector, TorusGeometry};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

fn setup(n: usize, seed: u64) -> (Arc<TorusGeometry>, Connection, ChaCha8Rng) {
    let g = TorusGeometry::new(n, 8, 2.0 * PI, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Connection::random(&g, 2, 0.3, 1, &mut rng).unwrap();
    (g, a, rng)
}

fn rel(x: &FormPQ, y: &FormPQ) -> f64 {
    relative(x.sub(y).norm(), x.norm().max(y.norm()))
}

#[test]
fn pairing_adjoints() {
    let (g, a, mut rng) = setup(2, 1);
    for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1), (0, 2)] {
        let phi = FormPQ::random(&g, 2, (p, q), 1, 1.0, &mut rng).unwrap();
        if q < 2 {
            let psi = FormPQ::random(&g, 2, (p, q + 1), 1, 1.0, &mut rng).unwrap();
            let l = dbar_a(&a, &phi).inner(&psi);
            let r = phi.inner(&dbar_star(&a, &psi));
            assert!((l - r).abs() < 1e-12 * phi.norm() * psi.norm(), "dbar ({p},{q}) {l} {r}");
        }
        if p < 2 {
            let psi = FormPQ::random(&g, 2, (p + 1, q), 1, 1.0, &mut rng).unwrap();
            let l = partial_a(&a, &phi).inner(&psi);
            let r = phi.inner(&partial_star(&a, &psi));
            assert!((l - r).abs() < 1e-12 * phi.norm() * psi.norm(), "partial ({p},{q})");
        }
    }
}

#[test]
fn adjoint_routes_agree() {
    let (g, a, mut rng) = setup(2, 2);
    for (p, q) in [(0, 1), (0, 2), (1, 1), (1, 2), (2, 1)] {
        let phi = FormPQ::random(&g, 2, (p, q), 1, 1.0, &mut rng).unwrap();
        let exact = dbar_star(&a, &phi);
        assert!(rel(&exact, &dbar_star_hodge(&a, &phi)) < 1e-12, "hodge ({p},{q})");
        assert!(rel(&exact, &dbar_star_kahler(&a, &phi)) < 1e-12, "kahler ({p},{q})");
        let exact = partial_star(&a, &phi.conj_transpose());
        assert!(rel(&exact, &partial_star_hodge(&a, &phi.conj_transpose())) < 1e-12, "hodge* ({q},{p})");
        assert!(rel(&exact, &partial_star_kahler(&a, &phi.conj_transpose())) < 1e-12, "kahler* ({q},{p})");
    }
}

#[test]
fn frame_and_closed_curvature_terms_agree() {
    let (g, a, mut rng) = setup(2, 3);
    for q in [1, 2] {
        let phi = FormPQ::random(&g, 2, (0, q), 1, 1.0, &mut rng).unwrap();
        let frame = frames::weitz_r(&a, &phi).unwrap();
        assert!(rel(&frame, &weitz_r_folded(&a, &phi).unwrap()) < 1e-12, "folded q={q}");
        assert!(rel(&frame, &weitz_r_closed(&a, &phi).unwrap()) < 1e-12, "closed q={q}");
    }
}

#[test]
fn weitzenbock_flat_base() {
    let (g, a, mut rng) = setup(2, 4);
    for q in [1, 2] {
        let phi = FormPQ::random(&g, 2, (0, q), 1, 1.0, &mut rng).unwrap();
        let lhs = laplacian(&a, &phi, LaplacianKind::Dbar);
        let rhs = nabla_bar_star(&a, &nabla_bar(&a, &phi).unwrap()).add(&weitz_r(&a, &phi).unwrap());
        assert!(rel(&lhs, &rhs) < 1e-12, "q={q}: {}", rel(&lhs, &rhs));
    }
}

#[test]
fn corollaries_on_0q_forms() {
    let (g, a, mut rng) = setup(2, 5);
    let f11 = a.curvature().f11;
    for q in [1, 2] {
        let phi = FormPQ::random(&g, 2, (0, q), 1, 1.0, &mut rng).unwrap();
        let psi = FormPQ::random(&g, 2, (0, q), 1, 1.0, &mut rng).unwrap();
        assert!(rel(&dbar_star(&a, &phi), &dbar_star_lambda(&a, &phi)) < 1e-12);
        // integrated form with ΛF φ read as Λ[F ∧ φ]
        let lf = f11.wedge_or_vanish(&phi, CoeffRule::LieBracket).unwrap().lambda();
        let lf = if lf.bidegree() == phi.bidegree() { lf } else { FormPQ::zero(&g, 2, 0, q).unwrap() };
        let lhs = lf.scale(I).inner(&psi);
        let rhs = -dbar_star(&a, &phi).inner(&dbar_star(&a, &psi)) + partial_a(&a, &phi).inner(&partial_a(&a, &psi))
            - dbar_a(&a, &phi).inner(&dbar_a(&a, &psi));
        assert!((lhs - rhs).abs() < 1e-12 * phi.norm() * psi.norm(), "q={q}: {lhs} vs {rhs}");
    }
}

#[test]
fn laplacian_corollaries_all_bidegrees() {
    let (g, a, mut rng) = setup(2, 6);
    for (p, q) in [(0, 1), (0, 2), (1, 1), (1, 0), (2, 1), (1, 2)] {
        let phi = FormPQ::random(&g, 2, (p, q), 1, 1.0, &mut rng).unwrap();
        let lb = laplacian(&a, &phi, LaplacianKind::Dbar);
        let diff = laplacian(&a, &phi, LaplacianKind::Partial).sub(&lb);
        assert!(rel(&diff, &laplacian_difference_curvature(&a, &phi)) < 1e-11, "({p},{q})");
        let via = dbar_laplacian_via_d(&a, &phi);
        let err = via.sub(&MixedForm::from_form(lb.clone())).norm() / lb.norm();
        assert!(err < 1e-11, "({p},{q}): {err}");
    }
}

#[test]
fn off_diagonal_curvature_terms_enter_with_opposite_signs() {
    // Flipping the F^{2,0} and F^{0,2} signs breaks the mixed-bidegree parts.
    let (g, a, mut rng) = setup(2, 7);
    let phi = FormPQ::random(&g, 2, (1, 1), 1, 1.0, &mut rng).unwrap();
    let f = a.curvature();
    let mut m = laplacian_d(&a, &phi);
    for (part, sign) in [(&f.f11, 1.0), (&f.f20, 1.0), (&f.f02, -1.0)] {
        m.add_assign(bracket_lambda(part, &phi).unwrap().scale(I * sign));
    }
    let lb = laplacian(&a, &phi, LaplacianKind::Dbar);
    let err = m.scale(C64::new(0.5, 0.0)).sub(&MixedForm::from_form(lb.clone())).norm() / lb.norm();
    assert!(err > 1e-3, "{err}");
}

#[test]
fn frame_formulas() {
    let (g, a, mut rng) = setup(2, 8);
    let n = 2;
    for q in [1, 2] {
        let phi = FormPQ::random(&g, 2, (0, q), 1, 1.0, &mut rng).unwrap();
        assert!(rel(&dbar_star(&a, &phi), &dbar_star_frame(&a, &phi).unwrap()) < 1e-12);
        let vs: Vec<TangentVector> = (0..=q)
            .map(|_| {
                let mut v = TangentVector::zero(n);
                for k in 0..n {
                    v.anti[k] = C64::new(rand::Rng::random_range(&mut rng, -1.0..1.0), rand::Rng::random_range(&mut rng, -1.0..1.0));
                }
                v
            })
            .collect();
        let lhs = dbar_a(&a, &phi);
        let lhs = if lhs.components().is_empty() {
            MatrixField::zeros(&g, 2)
        } else {
            lhs.evaluate(&vs).unwrap()
        };
        let rhs = dbar_a_antisymmetrized(&a, &phi, &vs).unwrap();
        assert!(lhs.sub(&rhs).norm_sq().sqrt() < 1e-12 * phi.norm().max(1.0), "q={q}");
        let p1 = partial_a(&a, &phi);
        assert!(rel(&p1, &d_a_real_projected(&a, &phi, true)) < 1e-12);
        if q < 2 {
            assert!(rel(&dbar_a(&a, &phi), &d_a_real_projected(&a, &phi, false)) < 1e-12);
        }
    }
}

#[test]
fn bianchi_and_nabla_adjoint() {
    let (g, a, mut rng) = setup(2, 9);
    let scale = a.curvature().norm();
    for (_, part) in bianchi_parts(&a) {
        assert!(part.norm() < 1e-12 * scale);
    }
    let phi = FormPQ::random(&g, 2, (0, 2), 1, 1.0, &mut rng).unwrap();
    let fam: Vec<FormPQ> = (0..2).map(|_| FormPQ::random(&g, 2, (0, 2), 1, 1.0, &mut rng).unwrap()).collect();
    let l = family_inner(&nabla_bar(&a, &phi).unwrap(), &fam);
    let r = phi.inner(&nabla_bar_star(&a, &fam));
    assert!((l - r).abs() < 1e-12 * phi.norm() * 4.0);
}
