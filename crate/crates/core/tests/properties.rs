use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use optdesign::criteria::{self, efficiency, CriterionSpec};
use optdesign::invariance::{generate_group, symmetrize};
use optdesign::optimize::closed_form::{equal_slopes_closed_form, equal_slopes_invariant_design, g3_invariant_design};
use optdesign::optimize::maximin::{equal_slopes_efficiency_cubed, equal_slopes_limit_efficiency};
use optdesign::optimize::weights::multiplicative_weights;
use optdesign::optimize::{local_opt_design, w_star_beta1_zero, OptimizeOptions};
use optdesign::transforms::{derive_q, transfer_optimal};
use optdesign::{
    AffinePointMap, Design, Intensity, ModelSpec, ParamMode, ParameterVector, Point, TransformPair,
    WeightingMeasure,
};

fn beta(v: &[f64]) -> ParameterVector {
    ParameterVector::new(v.to_vec())
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

fn vertices() -> Vec<Point> {
    vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]
}

prop_compose! {
    fn two_factor_beta()(b0 in 0.3f64..4.0, g1 in -0.9f64..6.0, g2 in -0.9f64..6.0)
        -> ParameterVector {
        let g2 = if g1 + g2 <= -0.9 { g2 + 1.0 } else { g2 };
        beta(&[b0, b0 * g1, b0 * g2])
    }
}

prop_compose! {
    fn design_2d()(pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.05f64..1.0), 3..7))
        -> Design {
        let total: f64 = pts.iter().map(|p| p.2).sum();
        Design::new(
            pts.iter().map(|p| vec![p.0, p.1]).collect(),
            pts.iter().map(|p| p.2 / total).collect(),
        )
        .unwrap()
    }
}

prop_compose! {
    fn box_map()(s1 in 0.3f64..4.0, s2 in 0.3f64..4.0, neg1: bool, neg2: bool, swap: bool,
                 b1 in -3.0f64..3.0, b2 in -3.0f64..3.0) -> AffinePointMap {
        let (s1, s2) = (if neg1 { -s1 } else { s1 }, if neg2 { -s2 } else { s2 });
        let a = if swap {
            DMatrix::from_row_slice(2, 2, &[0.0, s1, s2, 0.0])
        } else {
            DMatrix::from_row_slice(2, 2, &[s1, 0.0, 0.0, s2])
        };
        AffinePointMap::new(a, DVector::from_vec(vec![b1, b2])).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kappa_factors_out(b in two_factor_beta(), xi in design_2d(), kappa in 0.1f64..10.0) {
        let unit = ModelSpec::two_factor();
        let scaled = unit.with_intensity(Intensity::gamma(kappa)).unwrap();
        let m1 = unit.design_info(&xi, &b).unwrap();
        let mk = scaled.design_info(&xi, &b).unwrap();
        prop_assert!(rel(mk.matrix(), &(m1.matrix() * kappa)) < 1e-12);
        let nu = WeightingMeasure::uniform();
        let v1 = unit.weight_matrix_v(&b, &nu).unwrap();
        let vk = scaled.weight_matrix_v(&b, &nu).unwrap();
        prop_assert!(rel(&vk, &(v1 * kappa * kappa)) < 1e-12);
    }

    #[test]
    fn derived_q_intertwines_basis(g in box_map(), x in (0.0f64..1.0, 0.0f64..1.0)) {
        let model = ModelSpec::two_factor();
        let q = derive_q(&model, &g).unwrap();
        let x = vec![x.0, x.1];
        let lhs = model.basis_at(&g.apply(&x));
        let rhs = &q * model.basis_at(&x);
        prop_assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn inverse_pair_round_trips(b in two_factor_beta(), g in box_map(), rescaled: bool) {
        let model = ModelSpec::two_factor();
        let mode = if rescaled { ParamMode::InterceptRescaled } else { ParamMode::Linear };
        let pair = TransformPair::new(&model, g, mode).unwrap();
        if let Ok(bt) = pair.param_transform(&b) {
            let back = pair.inverse().param_transform(&bt).unwrap();
            let size = b.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(back.max_abs_diff(&b) < 1e-9 * size);
        }
    }

    #[test]
    fn symmetrization_is_idempotent_and_invariant(xi in design_2d()) {
        let model = ModelSpec::two_factor();
        let gens = [
            TransformPair::named(&model, "reflect:1", ParamMode::Linear).unwrap(),
            TransformPair::named(&model, "swap:1,2", ParamMode::Linear).unwrap(),
        ];
        let group = generate_group(&model, &gens, 64).unwrap();
        prop_assert_eq!(group.len(), 8);
        let sym = symmetrize(&xi, &group).unwrap();
        prop_assert!(symmetrize(&sym, &group).unwrap().distance(&sym) < 1e-12);
        for e in group.elements() {
            let image = Design::from_atoms(sym.atoms().map(|(x, w)| (e.apply_point(x), w))).unwrap();
            prop_assert!(image.distance(&sym) < 1e-12);
        }
    }

    #[test]
    fn transfer_preserves_criterion_value(b in two_factor_beta(), xi in design_2d(), g in box_map()) {
        let model = ModelSpec::two_factor();
        let pair = TransformPair::new(&model, g, ParamMode::Linear).unwrap();
        let crit = CriterionSpec::D;
        let t = transfer_optimal(&model, &xi, &pair, &crit).unwrap();
        let before = criteria::criterion_value(&model, &xi, &b, &crit).unwrap();
        prop_assume!(before < 1e6);
        let after = criteria::criterion_value(&t.model, &t.design, &t.beta(&b).unwrap(), &crit).unwrap();
        let det_q = pair.q().determinant();
        prop_assert!((after * det_q * det_q / before - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn multiplicative_updates_descend(b in two_factor_beta(), imse: bool) {
        let model = ModelSpec::two_factor();
        let crit = if imse { CriterionSpec::imse(WeightingMeasure::uniform()) } else { CriterionSpec::D };
        let (_, values) = multiplicative_weights(&model, &b, &crit, &vertices(), 200).unwrap();
        for pair in values.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn equal_slopes_closed_form_is_optimal(gamma in -0.49f64..8.0) {
        let model = ModelSpec::two_factor();
        let b = beta(&[1.0, gamma, gamma]);
        let closed = equal_slopes_closed_form(gamma).unwrap();
        let cert = criteria::equivalence_check(&model, &closed, &b, &CriterionSpec::D, 1e-9).unwrap();
        prop_assert!(cert.passed, "gap {}", cert.gap());
        let numeric = local_opt_design(&model, &b, &CriterionSpec::D, None, &OptimizeOptions::default()).unwrap();
        prop_assert!(numeric.design.distance(&closed) < 1e-6);
    }

    #[test]
    fn w_star_gives_the_local_optimum(gamma2 in -0.9f64..10.0) {
        let model = ModelSpec::two_factor();
        let b = beta(&[1.0, 0.0, gamma2]);
        let invariant = g3_invariant_design(w_star_beta1_zero(gamma2).unwrap()).unwrap();
        let numeric = local_opt_design(&model, &b, &CriterionSpec::D, None, &OptimizeOptions::default()).unwrap();
        prop_assert!(numeric.design.distance(&invariant) < 1e-6);
    }

    #[test]
    fn cubed_efficiency_identity(w in 0.01f64..0.49, gamma in 1.0f64..50.0) {
        let model = ModelSpec::two_factor();
        let b = beta(&[1.0, gamma, gamma]);
        let xi = equal_slopes_invariant_design(w).unwrap();
        let opt = equal_slopes_closed_form(gamma).unwrap();
        let eff = efficiency(&model, &xi, &b, &CriterionSpec::D, &opt).unwrap().value;
        prop_assert!((eff.powi(3) / equal_slopes_efficiency_cubed(w, gamma) - 1.0).abs() < 1e-9);
        let far = equal_slopes_efficiency_cubed(w, 1e7).cbrt();
        prop_assert!((far - equal_slopes_limit_efficiency(w)).abs() < 1e-6);
    }

    #[test]
    fn one_factor_scale_reduction(b0 in 0.2f64..5.0, g in -0.9f64..8.0) {
        let model = ModelSpec::one_factor();
        let crit = CriterionSpec::imse(WeightingMeasure::uniform());
        let opts = OptimizeOptions::default();
        let full = local_opt_design(&model, &beta(&[b0, b0 * g]), &crit, None, &opts).unwrap();
        let reduced = local_opt_design(&model, &beta(&[1.0, g]), &crit, None, &opts).unwrap();
        prop_assert!(full.design.distance(&reduced.design) < 1e-8);
    }
}

#[test]
fn equal_slopes_det_for_large_gamma() {
    let model = ModelSpec::two_factor();
    for gamma in [1.0, 2.5, 17.0] {
        for b0 in [0.5, 1.0, 3.0] {
            let b = beta(&[b0, b0 * gamma, b0 * gamma]);
            let m = model.design_info(&equal_slopes_closed_form(gamma).unwrap(), &b).unwrap();
            let det = 1.0 / criteria::d_value(&m);
            let expected = 1.0 / (27.0 * b0.powi(6) * (1.0 + gamma).powi(4));
            assert!((det / expected - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn transfer_matches_direct_optimum(b in two_factor_beta(), g in box_map(), imse: bool) {
        let model = ModelSpec::two_factor();
        let crit = if imse { CriterionSpec::imse(WeightingMeasure::uniform()) } else { CriterionSpec::D };
        let opts = OptimizeOptions::default();
        let pair = TransformPair::new(&model, g, ParamMode::Linear).unwrap();
        let opt = local_opt_design(&model, &b, &crit, None, &opts).unwrap();
        let t = transfer_optimal(&model, &opt.design, &pair, &crit).unwrap();
        let direct = local_opt_design(&t.model, &t.beta(&b).unwrap(), &t.criterion, None, &opts).unwrap();
        prop_assert!(direct.design.distance(&t.design) < 1e-7);
    }
}

proptest! {
    #[test]
    fn invariant_det_formula(w in 0.001f64..0.499, gamma2 in -0.95f64..20.0) {
        let model = ModelSpec::two_factor();
        let m = model.design_info(&g3_invariant_design(w).unwrap(), &beta(&[1.0, 0.0, gamma2])).unwrap();
        let det = 1.0 / criteria::d_value(&m);
        let (l1, l3) = (1.0, 1.0 / (1.0 + gamma2).powi(2));
        let formula = 2.0 * (l1 * l1 * l3 * w * w * (0.5 - w) + l1 * l3 * l3 * w * (0.5 - w).powi(2));
        prop_assert!((det - formula).abs() <= 1e-10 * formula.max(1e-3));
    }
}
