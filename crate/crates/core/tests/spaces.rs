use std::io::Write;

use approx::assert_relative_eq;
use fraclap_core::spaces::{load_space, resolve_space};
use fraclap_core::{FiniteSpace, SpaceKind, State, WalkDimension};
use num_complex::Complex64;
use proptest::prelude::*;

fn metric_issues(s: &FiniteSpace) -> usize {
    let n = s.len();
    let mut bad = 0;
    for x in 0..n {
        if s.dist(x, x) != 0.0 {
            bad += 1;
        }
        for y in 0..n {
            if x != y && !(s.dist(x, y) > 0.0 && s.dist(x, y) == s.dist(y, x)) {
                bad += 1;
            }
            for z in 0..n {
                if s.dist(x, z) > s.dist(x, y) + s.dist(y, z) + 1e-12 {
                    bad += 1;
                }
                if s.is_ultrametric() && s.dist(x, z) > s.dist(x, y).max(s.dist(y, z)) + 1e-12 {
                    bad += 1;
                }
            }
        }
    }
    bad
}

fn two_point(d: f64) -> FiniteSpace {
    FiniteSpace::custom(
        vec!["a".into(), "b".into()],
        vec![0.5, 0.5],
        vec![0.0, d, d, 0.0],
        1.0,
        WalkDimension::Infinite,
    )
    .unwrap()
}

#[test]
fn cantor_examples() {
    let s = FiniteSpace::cantor(2, 2.0, 1).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s.dist(0, 1), 1.0);
    assert_eq!(s.weights(), &[0.5, 0.5]);
    assert_relative_eq!(s.d_f(), 1.0, epsilon = 1e-15);
    assert_eq!(s.d_w(), WalkDimension::Infinite);

    let s = FiniteSpace::cantor(2, 2.0, 3).unwrap();
    let x = s.index_of_word(&[1, 1, 1]).unwrap();
    let y = s.index_of_word(&[1, 1, 2]).unwrap();
    assert_eq!(s.dist(x, y), 0.25);
    assert_eq!(s.ids()[y], "112");
}

#[test]
fn cantor_rejects_bad_parameters() {
    assert!(FiniteSpace::cantor(1, 2.0, 3).is_err());
    assert!(FiniteSpace::cantor(2, 1.0, 3).is_err());
    assert!(FiniteSpace::cantor(2, 2.0, 0).is_err());
    assert!(FiniteSpace::cantor(2, 2.0, 20).is_err());
}

#[test]
fn circle_examples() {
    let s = FiniteSpace::circle(4).unwrap();
    assert_eq!(s.dist(0, 2), 0.5);
    assert_eq!(s.weights(), &[0.25; 4]);
    let s = FiniteSpace::circle(6).unwrap();
    assert_relative_eq!(s.dist(0, 5), 1.0 / 6.0, epsilon = 1e-15);
    assert_eq!(s.d_w(), WalkDimension::Finite(2.0));
    assert!(FiniteSpace::circle(2).is_err());
}

#[test]
fn constructed_spaces_are_metric() {
    for s in [
        FiniteSpace::cantor(2, 2.0, 5).unwrap(),
        FiniteSpace::cantor(3, 3.0, 3).unwrap(),
        FiniteSpace::circle(37).unwrap(),
        FiniteSpace::cantor(2, 2.0, 4).unwrap().snowflake(0.5).unwrap(),
    ] {
        assert_eq!(metric_issues(&s), 0);
        assert!(s.validate().is_empty());
    }
}

#[test]
fn load_space_round_trip_and_errors() {
    let good = r#"
kind = "custom"
d_f = 1.0
d_w = "inf"
[[point]]
id = "a"
weight = 0.25
[[point]]
id = "b"
weight = 0.25
[[point]]
id = "c"
weight = 0.5
[[dist]]
a = "a"
b = "b"
value = 1.0
[[dist]]
a = "a"
b = "c"
value = 2.0
[[dist]]
a = "b"
b = "c"
value = 2.0
"#;
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(good.as_bytes()).unwrap();
    let s = load_space(f.path()).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(s.kind(), SpaceKind::Custom);
    let again: FiniteSpace = s.to_toml().parse().unwrap();
    assert_eq!(again.dist_table(), s.dist_table());
    assert_eq!(again.weights(), s.weights());

    let asym = format!("{good}[[dist]]\na = \"b\"\nb = \"a\"\nvalue = 1.5\n");
    let err = asym.parse::<FiniteSpace>().unwrap_err().to_string();
    assert!(err.contains("symmetr"), "{err}");

    let zero = good.replacen("weight = 0.5", "weight = 0.0", 1);
    let err = zero.parse::<FiniteSpace>().unwrap_err().to_string();
    assert!(err.contains("weight"), "{err}");

    let tri = good.replace("value = 2.0", "value = 5.0").replacen("value = 5.0", "value = 0.5", 1);
    assert!(tri.parse::<FiniteSpace>().is_err());
}

#[test]
fn resolve_specs() {
    assert_eq!(resolve_space("cantor:3,2,2").unwrap().len(), 9);
    assert_eq!(resolve_space("circle:10").unwrap().len(), 10);
    assert!(resolve_space("cantor:3,2").is_err());
    assert!(resolve_space("/nonexistent/space.toml").is_err());
}

#[test]
fn snowflake_examples() {
    let s = two_point(4.0).snowflake(0.5).unwrap();
    assert_relative_eq!(s.dist(0, 1), 2.0, epsilon = 1e-15);
    assert_eq!(s.weights(), &[0.5, 0.5]);
    let c = FiniteSpace::cantor(2, 2.0, 4).unwrap().snowflake(0.5).unwrap();
    assert_relative_eq!(c.d_f(), 2.0, epsilon = 1e-12);
    assert!(c.is_ultrametric());
    assert!(two_point(1.0).snowflake(1.0).is_err());
    assert!(two_point(1.0).snowflake(0.0).is_err());
}

#[test]
fn ahlfors_examples() {
    let c = FiniteSpace::cantor(2, 2.0, 6).unwrap();
    let radii: Vec<f64> = (0..6).map(|k| 2f64.powi(-k)).collect();
    let rep = c.ahlfors_report(&radii).unwrap();
    assert_eq!(rep.rows.len(), 64 * 6);
    assert!(rep.bracket_factor() <= 2.0 + 1e-12);

    let full = c.ahlfors_report(&[c.diam()]).unwrap();
    assert_relative_eq!(full.min_ratio, full.max_ratio, epsilon = 1e-15);
    assert_relative_eq!(full.min_ratio, 1.0, epsilon = 1e-15);

    assert!(c.ahlfors_report(&[]).is_err());
}

#[test]
fn ahlfors_bracket_independent_of_depth() {
    for depth in 3..=8 {
        let c = FiniteSpace::cantor(2, 2.0, depth).unwrap();
        let radii: Vec<f64> = (0..depth as i32).map(|k| 2f64.powi(-k)).collect();
        let rep = c.ahlfors_report(&radii).unwrap();
        assert!(rep.min_ratio >= 1.0 - 1e-12 && rep.max_ratio <= 2.0 + 1e-12, "depth {depth}: {rep:?}");
    }
}

#[test]
fn holder_examples() {
    let s = two_point(1.0);
    assert_eq!(s.holder_seminorm(&[0.0, 3.0], 1.0).unwrap(), 3.0);
    assert_eq!(s.holder_seminorm(&[2.0, 2.0], 0.5).unwrap(), 0.0);
    assert!(s.holder_seminorm(&[0.0, 1.0, 2.0], 1.0).is_err());
    assert!(s.holder_seminorm(&[0.0, 1.0], 1.5).is_err());
}

#[test]
fn states() {
    assert!(State::new(vec![0.5, 0.6]).is_err());
    assert!(State::new(vec![1.5, -0.5]).is_err());
    let s = FiniteSpace::circle(4).unwrap();
    let st = State::from_csv(&s, "id,prob\n0,0.5\n2,0.5\n").unwrap();
    assert_eq!(st.probs(), &[0.5, 0.0, 0.5, 0.0]);
    assert_eq!(st.apply(&[1.0, 9.0, 3.0, 9.0]), 2.0);
}

proptest! {
    #[test]
    fn snowflake_composes(e1 in 0.05f64..0.999, e2 in 0.05f64..0.999, depth in 2usize..5) {
        let s = FiniteSpace::cantor(2, 3.0, depth).unwrap();
        let twice = s.snowflake(e1).unwrap().snowflake(e2).unwrap();
        let once = s.snowflake(e1 * e2).unwrap();
        for (a, b) in twice.dist_table().iter().zip(once.dist_table()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        prop_assert!((twice.d_f() - once.d_f()).abs() <= 1e-12 * once.d_f());
    }

    #[test]
    fn snowflaked_circle_stays_metric(n in 3usize..24, eps in 0.1f64..0.99) {
        let s = FiniteSpace::circle(n).unwrap().snowflake(eps).unwrap();
        prop_assert_eq!(metric_issues(&s), 0);
    }

    #[test]
    fn holder_homogeneous_and_translation_invariant(
        re in proptest::collection::vec(-5.0f64..5.0, 16),
        im in proptest::collection::vec(-5.0f64..5.0, 16),
        c_re in -3.0f64..3.0, c_im in -3.0f64..3.0,
        beta in 0.05f64..1.0,
    ) {
        let s = FiniteSpace::cantor(2, 2.0, 4).unwrap();
        let f: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let c = Complex64::new(c_re, c_im);
        let base = s.holder_seminorm(&f, beta).unwrap();
        let scaled: Vec<Complex64> = f.iter().map(|v| v * c).collect();
        prop_assert!((s.holder_seminorm(&scaled, beta).unwrap() - c.norm() * base).abs() <= 1e-12 * (1.0 + c.norm() * base));
        let shifted: Vec<Complex64> = f.iter().map(|v| v + c).collect();
        prop_assert!((s.holder_seminorm(&shifted, beta).unwrap() - base).abs() <= 1e-12 * (1.0 + base));
    }
}
