use approx::assert_relative_eq;
use fraclap_core::commutator::{
    beta_of_alpha, holder_bracket, l2_energy_seminorm, p_threshold, random_symbols, schatten_of, truncated_commutator,
    CommutatorOp,
};
use fraclap_core::laplacian::GeneratorMatrix;
use fraclap_core::{FiniteSpace, WalkDimension};
use num_complex::Complex64;
use proptest::prelude::*;

fn two_point() -> FiniteSpace {
    FiniteSpace::custom(
        vec!["a".into(), "b".into()],
        vec![0.5, 0.5],
        vec![0.0, 1.0, 1.0, 0.0],
        1.0,
        WalkDimension::Infinite,
    )
    .unwrap()
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

#[test]
fn p_threshold_values() {
    assert_relative_eq!(p_threshold(0.25, 1.0, 1.0).unwrap(), 2.0, epsilon = 1e-12);
    assert_relative_eq!(p_threshold(0.4, 1.0, 1.0).unwrap(), 5.0, epsilon = 1e-12);
    assert_relative_eq!(p_threshold(0.05, 1.0, 0.5).unwrap(), 1.0 / 0.9, epsilon = 1e-12);
    assert!(p_threshold(0.3, 0.5, 1.0).is_err());
    assert!(p_threshold(0.1, 1.2, 1.0).is_err());
}

#[test]
fn two_point_hand_values() {
    let s = two_point();
    for alpha in [0.1, 0.3, 0.45] {
        let op = CommutatorOp::new(&s, alpha, &[1.0, -1.0]).unwrap();
        assert_relative_eq!(op.raw_hs_norm(), 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(op.schatten_norm(2.0).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        let e = l2_energy_seminorm(&s, alpha, &[1.0, -1.0]).unwrap();
        assert_relative_eq!(e.energy_norm, 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.ratio, 2f64.sqrt(), epsilon = 1e-14);
    }
}

#[test]
fn constant_symbol_vanishes() {
    let s = FiniteSpace::cantor(2, 2.0, 4).unwrap();
    let op = CommutatorOp::new(&s, 0.2, &[2.5; 16]).unwrap();
    assert!(op.singular_values().iter().all(|&v| v == 0.0));
    let e = l2_energy_seminorm(&s, 0.2, &[2.5; 16]).unwrap();
    assert_eq!((e.energy_norm, e.raw_hs), (0.0, 0.0));
    assert_eq!(op.gof_bound(3.0).unwrap(), 0.0);
}

#[test]
fn schatten_of_values() {
    assert_relative_eq!(schatten_of(&[3.0], 1.0).unwrap(), 3.0);
    assert_relative_eq!(schatten_of(&[3.0], 7.5).unwrap(), 3.0, epsilon = 1e-14);
    assert_relative_eq!(schatten_of(&[3.0, 4.0], 2.0).unwrap(), 5.0, epsilon = 1e-14);
    assert!(schatten_of(&[1.0], 0.5).is_err());
}

#[test]
fn exponent_bookkeeping() {
    let s = FiniteSpace::cantor(2, 3.0, 3).unwrap();
    let alpha = 0.15;
    let d_f = s.d_f();
    assert_relative_eq!(d_f + 2.0 * beta_of_alpha(d_f, alpha), 2.0 * d_f + 4.0 * alpha, epsilon = 1e-15);
    let h: Vec<f64> = (0..8).map(|x| (x as f64).sin()).collect();
    let op = CommutatorOp::new(&s, alpha, &h).unwrap();
    let gen = GeneratorMatrix::assemble(&s, beta_of_alpha(d_f, alpha)).unwrap();
    for x in 0..8 {
        for y in 0..8 {
            if x != y {
                let k = op.kernel(x, y);
                let lhs = k * k;
                let rhs = (h[x] - h[y]).powi(2) * gen.kernel(x, y);
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
            }
        }
    }
}

#[test]
fn truncation_examples() {
    let s = FiniteSpace::cantor(2, 2.0, 5).unwrap();
    let h: Vec<f64> = (0..32).map(|x| x as f64 / 31.0).collect();
    let full = CommutatorOp::new(&s, 0.2, &h).unwrap();
    let (same, err) = truncated_commutator(&s, 0.2, &h, 1.0 / 16.0).unwrap();
    assert_eq!(err, 0.0);
    assert_eq!(same.kernel_table(), full.kernel_table());
    let (top, _) = truncated_commutator(&s, 0.2, &h, 1.0).unwrap();
    for x in 0..32 {
        for y in 0..32 {
            let expected = if s.dist(x, y) == 1.0 { full.kernel(x, y) } else { 0.0 };
            assert_eq!(top.kernel(x, y), expected);
        }
    }
    assert!(truncated_commutator(&s, 0.2, &h, 2.0).is_err());
}

#[test]
fn holder_ratio_bracket_is_reported() {
    let s = FiniteSpace::cantor(2, 2.0, 6).unwrap();
    let symbols = random_symbols(&s, 200, 11);
    let b = holder_bracket(&s, 0.125, 0.75, 4.0, &symbols).unwrap();
    assert!(b.count > 0);
    assert!(b.lower_min > 0.0 && b.lower_max.is_finite() && b.upper_min > 0.0 && b.upper_max.is_finite());
    let scaled: Vec<Vec<f64>> = symbols.iter().map(|h| h.iter().map(|v| -3.0 * v).collect()).collect();
    let b2 = holder_bracket(&s, 0.125, 0.75, 4.0, &scaled).unwrap();
    assert_relative_eq!(b.upper_max, b2.upper_max, max_relative = 1e-12);
    assert_eq!(random_symbols(&s, 20, 5), random_symbols(&s, 20, 5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn commutator_identities(h in complex_vec(16), g in complex_vec(16), c_re in -2.0f64..2.0, alpha in 0.05f64..0.45) {
        let s = FiniteSpace::cantor(2, 2.0, 4).unwrap();
        let op = CommutatorOp::new(&s, alpha, &h).unwrap();

        let ones = vec![Complex64::new(1.0, 0.0); 16];
        let lap = GeneratorMatrix::assemble(&s, alpha).unwrap().apply(&h).unwrap();
        for (a, b) in op.apply(&ones).unwrap().iter().zip(&lap) {
            prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }

        for x in 0..16 {
            for y in 0..16 {
                prop_assert_eq!(op.kernel(x, y), -op.kernel(y, x));
            }
        }

        let sum: Vec<Complex64> = h.iter().zip(&g).map(|(a, b)| a + b).collect();
        let op_g = CommutatorOp::new(&s, alpha, &g).unwrap();
        let op_sum = CommutatorOp::new(&s, alpha, &sum).unwrap();
        for ((a, b), c) in op.kernel_table().iter().zip(op_g.kernel_table()).zip(op_sum.kernel_table()) {
            prop_assert!((a + b - c).norm() <= 1e-12 * c.norm().max(1.0));
        }

        let shifted: Vec<Complex64> = h.iter().map(|v| v + c_re).collect();
        let op_shift = CommutatorOp::new(&s, alpha, &shifted).unwrap();
        for (a, b) in op.kernel_table().iter().zip(op_shift.kernel_table()) {
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }

        let conj: Vec<Complex64> = h.iter().map(|v| v.conj()).collect();
        let op_conj = CommutatorOp::new(&s, alpha, &conj).unwrap();
        let top = op.singular_values()[0].max(1.0);
        for (a, b) in op.singular_values().iter().zip(op_conj.singular_values()) {
            prop_assert!((a - b).abs() <= 1e-10 * top);
        }

        let s2 = op.schatten_norm(2.0).unwrap();
        prop_assert!(op.schatten_norm(4.0).unwrap() <= s2 * (1.0 + 1e-12));
        prop_assert!((op.gof_bound(2.0).unwrap() - op.raw_hs_norm()).abs() <= 1e-10 * s2);
        prop_assert!((s2 - op.raw_hs_norm()).abs() <= 1e-10 * s2);
        let e = l2_energy_seminorm(&s, alpha, &h).unwrap();
        prop_assert!((e.raw_hs.powi(2) - 2.0 * e.energy_norm.powi(2)).abs() <= 1e-10 * e.raw_hs.powi(2));
    }

    #[test]
    fn seminorm_kernel_is_constants(h in proptest::collection::vec(-1.0f64..1.0, 27), alpha in 0.05f64..0.45) {
        let s = FiniteSpace::cantor(3, 3.0, 3).unwrap();
        let op = CommutatorOp::new(&s, alpha, &h).unwrap();
        let spread = h.iter().copied().fold(f64::MIN, f64::max) - h.iter().copied().fold(f64::MAX, f64::min);
        prop_assert!(op.schatten_norm(3.0).unwrap() > 0.0 || spread == 0.0);
    }

    #[test]
    fn mixed_norm_bounds_schatten(seed in 0u64..1000, p in prop_oneof![Just(2.0), Just(3.0), Just(4.0)]) {
        let s = FiniteSpace::cantor(2, 2.0, 5).unwrap();
        for h in random_symbols(&s, 3, seed) {
            let op = CommutatorOp::new(&s, 0.125, &h).unwrap();
            prop_assert!(op.gof_bound(p).unwrap() >= op.schatten_norm(p).unwrap() * (1.0 - 1e-10));
        }
    }
}
