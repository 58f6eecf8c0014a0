//! Randomized invariants over the public API.

use num_complex::Complex64;
use proptest::prelude::*;

use boundsim::mubs::{conjugate_basis, mub_family};
use boundsim::numkernel::{herm_eigvals, kron_vec, partial_transpose, ComplexMatrix, Side, HERM_TOL};
use boundsim::simplex::{ppt_min_eig, ppt_min_eig_coeffs, state_from_coeffs, SimplexCoeffs};
use boundsim::witness::{joint_prob, mcp, LabelingMode, McpEvaluator};

fn simplex_coeffs(d: usize) -> impl Strategy<Value = SimplexCoeffs> {
    prop::collection::vec(0.01f64..1.0, d * d).prop_map(move |mut c| {
        let s: f64 = c.iter().sum();
        for x in c.iter_mut() {
            *x /= s;
        }
        SimplexCoeffs { d, c }
    })
}

fn ket(d: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d)
        .prop_filter("nonzero", |v| {
            v.iter().map(|(re, im)| re * re + im * im).sum::<f64>() > 1e-3
        })
        .prop_map(|v| {
            let mut k: Vec<Complex64> = v.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
            let n: f64 = k.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in k.iter_mut() {
                *z /= n;
            }
            k
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_is_coefficient_multiset(coeffs in simplex_coeffs(3)) {
        let rho = state_from_coeffs(&coeffs).unwrap();
        let spec = herm_eigvals(&rho, HERM_TOL).unwrap();
        let mut expected = coeffs.c.clone();
        expected.sort_by(f64::total_cmp);
        for (a, b) in spec.values.iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn block_ppt_route_matches_full_eigensolve(coeffs in simplex_coeffs(3)) {
        let fast = ppt_min_eig_coeffs(&coeffs).unwrap();
        let full = ppt_min_eig(&state_from_coeffs(&coeffs).unwrap(), 3).unwrap();
        prop_assert!((fast - full).abs() < 1e-10, "{fast} vs {full}");
    }

    #[test]
    fn evaluator_matches_direct_protocol(coeffs in simplex_coeffs(3)) {
        let fam = mub_family(3).unwrap();
        let fast = McpEvaluator::new(&fam).unwrap()
            .eval(&coeffs, &LabelingMode::Maximize).unwrap();
        let direct = mcp(&state_from_coeffs(&coeffs).unwrap(), &fam, &LabelingMode::Maximize)
            .unwrap();
        prop_assert!((fast.i_m - direct.i_m).abs() < 1e-10);
    }

    #[test]
    fn pure_product_states_respect_separable_bound(a in ket(3), b in ket(3)) {
        let fam = mub_family(3).unwrap();
        let rho = ComplexMatrix::outer(&kron_vec(&a, &b));
        let rep = mcp(&rho, &fam, &LabelingMode::Maximize).unwrap();
        prop_assert!(rep.i_m <= 2.0 + 1e-9, "I4 = {}", rep.i_m);
    }

    #[test]
    fn joint_probabilities_are_probabilities(coeffs in simplex_coeffs(3), i in 0usize..3, j in 0usize..3, m in 0usize..4) {
        let fam = mub_family(3).unwrap();
        let rho = state_from_coeffs(&coeffs).unwrap();
        let bob = conjugate_basis(&fam.bases[m]);
        let p = joint_prob(&rho, &fam.bases[m][i], &bob[j]).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn partial_transpose_involutes_and_preserves_trace(coeffs in simplex_coeffs(3)) {
        let rho = state_from_coeffs(&coeffs).unwrap();
        let pt = partial_transpose(&rho, 3, 3, Side::A).unwrap();
        let back = partial_transpose(&pt, 3, 3, Side::A).unwrap();
        prop_assert!(back.max_abs_diff(&rho) == 0.0);
        prop_assert!((pt.trace().re - 1.0).abs() < 1e-12);
    }
}
