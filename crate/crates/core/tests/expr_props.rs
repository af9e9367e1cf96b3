use std::sync::Arc;

use liftcheck::expr::{parse, Expr, Func, Symbols};
use proptest::prelude::*;

const VARS: usize = 3;

fn leaf() -> impl Strategy<Value = Arc<Expr>> {
    prop_oneof![
        (0..VARS).prop_map(|k| Arc::new(Expr::Var(k))),
        prop::sample::select(vec![0.5, 1.0, 2.0, 3.0, 0.37, -1.25]).prop_map(|v| Arc::new(Expr::Num(v))),
        Just(Arc::new(Expr::Pi)),
    ]
}

/// Trees of depth at most 6.
fn tree() -> impl Strategy<Value = Arc<Expr>> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Arc::new(Expr::Neg(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Arc::new(Expr::Add(a, b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Arc::new(Expr::Sub(a, b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Arc::new(Expr::Mul(a, b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Arc::new(Expr::Div(a, b))),
            (inner.clone(), prop::sample::select(vec![2.0, 3.0, -1.0, 0.5]))
                .prop_map(|(a, p)| Arc::new(Expr::Pow(a, Arc::new(Expr::Num(p))))),
            (prop::sample::select(Func::ALL.to_vec()), inner).prop_map(|(f, a)| Arc::new(Expr::Call(f, a))),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, VARS)
}

fn symbols() -> Symbols {
    Symbols::new(["u", "v", "w"])
}

fn depth(e: &Expr) -> usize {
    match e {
        Expr::Num(_) | Expr::Pi | Expr::Var(_) => 1,
        Expr::Neg(a) | Expr::Call(_, a) => 1 + depth(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => 1 + depth(a).max(depth(b)),
    }
}

fn central(e: &Arc<Expr>, k: usize, p: &[f64], h: f64) -> Option<f64> {
    let mut up = p.to_vec();
    let mut dn = p.to_vec();
    up[k] += h;
    dn[k] -= h;
    let (a, b) = (e.eval_at(&up).ok()?, e.eval_at(&dn).ok()?);
    Some((a - b) / (2.0 * h))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, max_global_rejects: 100_000, ..ProptestConfig::default() })]

    #[test]
    fn derivative_matches_central_difference(e in tree(), p in point(), k in 0..VARS) {
        prop_assert!(depth(&e) <= 6);
        let d = e.differentiate(k);
        let value = e.eval_at(&p);
        let exact = d.eval_at(&p);
        prop_assume!(matches!((&value, &exact), (Ok(v), Ok(x)) if v.is_finite() && x.is_finite() && v.abs() < 1e6 && x.abs() < 1e6));
        let exact = exact.unwrap();
        let fd = central(&e, k, &p, 1e-5);
        let fd2 = central(&e, k, &p, 2e-5);
        // A stencil that straddles a pole or a branch cut is no oracle.
        prop_assume!(matches!((fd, fd2), (Some(a), Some(b)) if (a - b).abs() <= 1e-3 * (1.0 + a.abs())));
        let fd = fd.unwrap();
        prop_assert!((exact - fd).abs() <= 1e-4 * (1.0 + exact.abs()), "{} at {:?}: {} vs {}", e.to_text(&symbols()), p, exact, fd);
    }

    #[test]
    fn print_parse_round_trip(e in tree(), pts in prop::collection::vec(point(), 100)) {
        let s = symbols();
        let text = e.to_text(&s);
        let back = parse(&text, &s).unwrap();
        prop_assert_eq!(back.to_text(&s), parse(&back.to_text(&s), &s).unwrap().to_text(&s));
        for p in &pts {
            match (e.eval_at(p), back.eval_at(p)) {
                (Ok(a), Ok(b)) if a.is_finite() => {
                    prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(f64::MIN_POSITIVE), "{}: {} vs {}", text, a, b);
                }
                (Ok(a), Ok(b)) => prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{}: {:?} vs {:?}", text, a, b),
            }
        }
    }
}
