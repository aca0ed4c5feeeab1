use approx::assert_relative_eq;
use fraclap_core::dyadic::{hl_maximal, DyadicSystem};
use fraclap_core::FiniteSpace;
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

#[test]
fn cube_counts() {
    let s = FiniteSpace::cantor(2, 2.0, 3).unwrap();
    let d = DyadicSystem::build(&s).unwrap();
    let counts: Vec<usize> = (0..=d.max_level()).map(|n| d.level(n).len()).collect();
    assert_eq!(counts, [1, 2, 4, 8]);
    assert!(d.validate(&s).is_empty());

    let s = FiniteSpace::cantor(3, 2.0, 2).unwrap();
    let d = DyadicSystem::build(&s).unwrap();
    assert_eq!(d.constants().max_children, 3);
    assert!(d.cubes().iter().filter(|c| c.level < 2).all(|c| c.children.len() == 3));

    let s = FiniteSpace::circle(8).unwrap();
    let d = DyadicSystem::build(&s).unwrap();
    let masses: Vec<f64> = d.level(1).iter().map(|&c| d.cube(c).mass).collect();
    assert_eq!(masses, [0.5, 0.5]);
    assert!(d.validate(&s).is_empty());
}

#[test]
fn expectation_extremes() {
    let s = FiniteSpace::cantor(2, 2.0, 4).unwrap();
    let d = DyadicSystem::build(&s).unwrap();
    let f: Vec<f64> = (0..16).map(|i| (i * i) as f64).collect();
    let mean = f.iter().sum::<f64>() / 16.0;
    assert!(d.expectation(0, &f).unwrap().iter().all(|v| (v - mean).abs() < 1e-12));
    assert_eq!(d.expectation(4, &f).unwrap(), f);
    assert!(d.expectation(5, &f).is_err());
}

#[test]
fn top_wavelet_is_indicator_difference() {
    let s = FiniteSpace::cantor(2, 2.0, 3).unwrap();
    let d = DyadicSystem::build(&s).unwrap();
    let basis = d.haar_basis();
    let top = basis.wavelets.iter().find(|w| d.cube(w.cube).level == 0).unwrap();
    let v = d.wavelet_vector(top);
    for (x, value) in v.iter().enumerate() {
        let expected = if x < 4 { 1.0 } else { -1.0 };
        assert_relative_eq!(value.re, expected, epsilon = 1e-12);
        assert_relative_eq!(value.im, 0.0, epsilon = 1e-12);
    }
    let rep = d.haar_report(&basis, 2.0);
    assert_eq!(rep.count, 7);
    assert!(rep.max_norm_error < 1e-12 && rep.max_orthogonality_error < 1e-12 && rep.max_mean < 1e-12);
    assert!(rep.span_complete);
}

#[test]
fn maximal_function_examples() {
    let s = FiniteSpace::cantor(2, 2.0, 6).unwrap();
    let c = vec![Complex64::new(0.0, -2.5); 64];
    assert!(hl_maximal(&s, &c).unwrap().iter().all(|v| (v - 2.5).abs() < 1e-12));

    let d = DyadicSystem::build(&s).unwrap();
    let e = d.prototype_family();
    let wave: Vec<f64> = (0..64).map(|x| if x % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let leaves_only = d.nwo_maximal(&e, &wave).unwrap();
    // Only the leaves see a nonzero average: |⟨f, e_D⟩| / mass^{1/2} = 1.
    assert!(leaves_only.iter().all(|v| (v - 1.0).abs() < 1e-12));

    let ortho: Vec<Vec<f64>> = e.iter().map(|_| vec![0.0; 64]).collect();
    assert!(d.nwo_maximal(&ortho, &wave).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn martingale_leaf_indicator() {
    let s = FiniteSpace::cantor(2, 2.0, 4).unwrap();
    let d = DyadicSystem::build(&s).unwrap();
    let mut h = vec![0.0; 16];
    h[0] = 1.0;
    let m = d.martingale_lhs(&h, 0.1, 2.0).unwrap();
    assert_eq!(m.per_level.len(), 4);
    assert_relative_eq!(m.total, 0.7076915590163595, max_relative = 1e-12);
    assert_eq!(d.martingale_lhs(&[3.0; 16], 0.1, 2.0).unwrap().total, 0.0);
    assert!(d.martingale_lhs(&h, 0.1, 1.0).is_err());
}

fn systems() -> Vec<(FiniteSpace, DyadicSystem)> {
    [FiniteSpace::cantor(2, 2.0, 5).unwrap(), FiniteSpace::cantor(3, 3.0, 3).unwrap(), FiniteSpace::circle(32).unwrap()]
        .into_iter()
        .map(|s| {
            let d = DyadicSystem::build(&s).unwrap();
            (s, d)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expectations_nest_and_are_self_adjoint(f in complex_vec(32), g in complex_vec(32)) {
        let (s, d) = &systems()[0];
        for n in 0..=d.max_level() {
            let en = d.expectation(n, &f).unwrap();
            prop_assert!(d.expectation(n, &en).unwrap().iter().zip(&en).all(|(a, b)| (a - b).norm() < 1e-12));
            let lhs = s.inner(&en, &g);
            let rhs = s.inner(&f, &d.expectation(n, &g).unwrap());
            prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
            for m in 0..=d.max_level() {
                let nested = d.expectation(n, &d.expectation(m, &f).unwrap()).unwrap();
                let direct = d.expectation(n.min(m), &f).unwrap();
                prop_assert!(nested.iter().zip(&direct).all(|(a, b)| (a - b).norm() < 1e-12));
            }
        }
    }

    #[test]
    fn parseval(f in complex_vec(32), g in complex_vec(27)) {
        let all = systems();
        for ((s, d), v) in [(&all[0], &f), (&all[2], &f), (&all[1], &g)] {
            let basis = d.haar_basis();
            let mut total: f64 = basis.wavelets.iter().map(|w| d.wavelet_coefficient(w, v).norm_sqr()).sum();
            total += (s.mean(v) * s.total_mass()).norm_sqr() / s.total_mass();
            let norm2 = s.norm(v).powi(2);
            prop_assert!((total - norm2).abs() <= 1e-10 * norm2.max(1.0));
        }
    }

    #[test]
    fn maximal_functions_sublinear_and_dominating(f in complex_vec(32), g in complex_vec(32)) {
        for (s, d) in systems().iter().filter(|(s, _)| s.len() == 32) {
            let sum: Vec<Complex64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
            let (mf, mg, ms) = (hl_maximal(s, &f).unwrap(), hl_maximal(s, &g).unwrap(), hl_maximal(s, &sum).unwrap());
            for x in 0..32 {
                prop_assert!(ms[x] <= mf[x] + mg[x] + 1e-12);
                prop_assert!(mf[x] >= f[x].norm() - 1e-12);
            }
            let e: Vec<Vec<Complex64>> =
                d.prototype_family().into_iter().map(|v| v.into_iter().map(Complex64::from).collect()).collect();
            let (nf, ng, ns) = (d.nwo_maximal(&e, &f).unwrap(), d.nwo_maximal(&e, &g).unwrap(), d.nwo_maximal(&e, &sum).unwrap());
            for x in 0..32 {
                prop_assert!(ns[x] <= nf[x] + ng[x] + 1e-12);
            }
        }
    }
}
