use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use rpencil::lie_core::{commutator, random_group_element, trace_form, CMat, GroupElement};
use rpencil::pencil::{cp1_chart_bivector, pfaffian, weyl_flip_residual, PencilContext, PencilPoint};
use rpencil::rmatrix::ad_tensor2;
use rpencil::schouten::{jacobiator, DEFAULT_STEP};
use rpencil::vaisman::{obstruction_closed_form, obstruction_quadrature};

fn su_element(n: usize, coeffs: &[f64], compact: &rpencil::lie_core::MatrixBasis) -> CMat {
    let c: Vec<Complex64> = coeffs.iter().take(n * n - 1).map(|v| Complex64::new(*v, 0.0)).collect();
    compact.combine(&c)
}

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrix_bracket_satisfies_jacobi(a in coeffs(8), b in coeffs(8), c in coeffs(8)) {
        let ctx = PencilContext::cp2();
        let basis = ctx.compact();
        let (x, y, z) = (su_element(3, &a, basis), su_element(3, &b, basis), su_element(3, &c, basis));
        let jac = commutator(&x, &commutator(&y, &z))
            + commutator(&y, &commutator(&z, &x))
            + commutator(&z, &commutator(&x, &y));
        prop_assert!(jac.norm() < 1e-11);
    }

    #[test]
    fn trace_form_is_ad_invariant(a in coeffs(8), b in coeffs(8), seed in 0u64..10_000) {
        let ctx = PencilContext::cp2();
        let basis = ctx.compact();
        let (x, y) = (su_element(3, &a, basis), su_element(3, &b, basis));
        let g = random_group_element(3, seed);
        let before = trace_form(&x, &y).unwrap();
        let after = trace_form(&g.conjugate(&x), &g.conjugate(&y)).unwrap();
        prop_assert!((before - after).abs() < 1e-12 * (1.0 + before.abs()));
        // positive definite on the compact form
        prop_assert!(trace_form(&x, &x).unwrap() >= 0.0);
    }

    #[test]
    fn adjoint_action_preserves_antisymmetry(seed in 0u64..10_000) {
        let ctx = PencilContext::cp2();
        let g = random_group_element(3, seed);
        let moved = ad_tensor2(&g, &ctx.r_o, ctx.compact()).unwrap();
        prop_assert!(moved.antisymmetry_residual() < 1e-14);
        prop_assert!((moved.norm() - ctx.r_o.norm()).abs() < 1e-12);
    }

    #[test]
    fn pencil_tensor_is_antisymmetric_and_affine_in_lambda(seed in 0u64..10_000, lambda in -4.0..3.0f64) {
        let ctx = PencilContext::cp2();
        let g = random_group_element(3, seed);
        let t = ctx.pencil_tensor(&PencilPoint { g: g.clone(), lambda });
        prop_assert!(t.antisymmetry_residual() < 1e-14);
        let t0 = ctx.pencil_tensor(&PencilPoint { g, lambda: 0.0 });
        let diff = &t.coeffs - &t0.coeffs - ctx.r_p.coeffs.map(|c| c * lambda);
        prop_assert!(diff.norm() < 1e-13);
    }

    #[test]
    fn spectral_bound_never_exceeds_one(seed in 0u64..100_000) {
        for ctx in [PencilContext::cp1(), PencilContext::cp2()] {
            let g = random_group_element(ctx.matrix_size(), seed);
            prop_assert!(ctx.spectral_bound(&g) <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn weyl_flip_holds_everywhere(seed in 0u64..100_000, lambda in -5.0..3.0f64) {
        let ctx = PencilContext::cp2();
        let g = random_group_element(3, seed);
        prop_assert!(weyl_flip_residual(&ctx, &g, lambda) < 1e-10);
    }

    #[test]
    fn group_inverse_and_composition(seed in 0u64..10_000) {
        let g = random_group_element(3, seed);
        let e = g.compose(&g.inverse());
        prop_assert!((e.matrix() - GroupElement::identity(3).matrix()).norm() < 1e-13);
    }

    #[test]
    fn pfaffian_squares_to_determinant(entries in prop::collection::vec(-1.0..1.0f64, 15)) {
        let mut a = DMatrix::zeros(6, 6);
        let mut k = 0;
        for i in 0..6 {
            for j in i + 1..6 {
                a[(i, j)] = entries[k];
                a[(j, i)] = -entries[k];
                k += 1;
            }
        }
        let pf = pfaffian(&a);
        prop_assert!((pf * pf - a.determinant()).abs() < 1e-12);
    }

    #[test]
    fn cp1_pencil_is_poisson(lambda in -3.0..2.0f64, x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let pi = cp1_chart_bivector(lambda);
        prop_assert!(jacobiator(&pi, &[x, y], DEFAULT_STEP).unwrap() < 1e-12);
    }

    #[test]
    fn obstruction_quadrature_matches_closed_form(lambda in -1.9..-0.1f64, offset in 0.05..8.0f64) {
        let xi0 = (-lambda / (lambda + 2.0)).sqrt();
        let xi = xi0 + offset;
        let q = obstruction_quadrature(lambda, xi);
        let c = obstruction_closed_form(lambda, xi);
        prop_assert!((q - c).abs() <= 1e-8 * c.abs().max(1e-3));
        prop_assert!(c > 0.0);
    }
}
