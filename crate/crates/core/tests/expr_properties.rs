use pfaff_core::expr::{differentiate, parse_expression, Expr};
use proptest::prelude::*;

const VARS: [&str; 3] = ["x", "y", "z"];

/// Smooth expressions in three variables, bounded on `[-1, 1]³`.
fn smooth() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-2.0..2.0f64).prop_map(Expr::constant),
        (0..3usize).prop_map(Expr::var),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(Expr::sin),
            inner.clone().prop_map(Expr::cos),
            inner.clone().prop_map(|a| (a.sin()).exp()),
            inner.clone().prop_map(|a| (a.clone() * a + Expr::constant(1.0)).log()),
            inner.clone().prop_map(|a| (a.clone() * a + Expr::constant(1.0)).sqrt()),
            (inner.clone(), 2..4i32).prop_map(|(a, k)| a.powf(k as f64)),
            inner.prop_map(|a| Expr::constant(1.0) / (a.clone() * a + Expr::constant(1.0))),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 3)
}

fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
    (a - b).abs() <= rel * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn differentiation_is_linear(e1 in smooth(), e2 in smooth(), a in -3.0..3.0f64, b in -3.0..3.0f64,
                                 i in 0..3usize, pts in prop::collection::vec(point(), 100)) {
        let combo = Expr::constant(a) * e1.clone() + Expr::constant(b) * e2.clone();
        let lhs = differentiate(&combo, i, 3).unwrap();
        let d1 = differentiate(&e1, i, 3).unwrap();
        let d2 = differentiate(&e2, i, 3).unwrap();
        for p in &pts {
            let (l, u, v) = (lhs.eval(p).unwrap(), d1.eval(p).unwrap(), d2.eval(p).unwrap());
            let r = a * u + b * v;
            prop_assert!(close(l, r, 1e-12, (a * u).abs() + (b * v).abs()), "{l} vs {r} at {p:?}");
        }
    }

    #[test]
    fn mixed_partials_commute(e in smooth(), i in 0..3usize, j in 0..3usize, pts in prop::collection::vec(point(), 20)) {
        let dij = e.diff(i).diff(j);
        let dji = e.diff(j).diff(i);
        for p in &pts {
            let (a, b) = (dij.eval(p).unwrap(), dji.eval(p).unwrap());
            prop_assert!(close(a, b, 1e-10, a.abs().max(b.abs())), "{a} vs {b}");
        }
    }

    #[test]
    fn derivative_matches_central_difference(e in smooth(), i in 0..3usize, p in prop::collection::vec(-0.9..0.9f64, 3)) {
        let h = 1e-5;
        let d = e.diff(i).eval(&p).unwrap();
        let shifted = |s: f64| {
            let mut q = p.clone();
            q[i] += s;
            e.eval(&q).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        prop_assert!(close(d, fd, 1e-6, d.abs()), "symbolic {d}, difference {fd}");
    }

    #[test]
    fn text_round_trips(e in smooth(), p in point()) {
        let text = e.to_text(&VARS);
        let back = parse_expression(&text, &VARS).unwrap();
        let (a, b) = (e.eval(&p).unwrap(), back.eval(&p).unwrap());
        prop_assert!(close(a, b, 1e-14, a.abs()), "`{text}`: {a} vs {b}");
    }

    #[test]
    fn simplification_preserves_values(e in smooth(), p in point()) {
        let (a, b) = (e.eval(&p).unwrap(), e.simplify().eval(&p).unwrap());
        prop_assert!(close(a, b, 1e-12, a.abs()), "{a} vs {b}");
    }
}
