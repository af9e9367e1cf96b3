use std::sync::Arc;

use super::{add, call, div, mul, neg, pow, sub, Expr, Func};

impl Expr {
    /// Exact partial derivative with respect to `Var(sym)`.
    ///
    /// The result is built with the folding constructors, so constant
    /// subtrees collapse and `x*0`, `x*1`, `x+0` disappear. No other
    /// algebraic rewriting is attempted.
    pub fn differentiate(self: &Arc<Self>, sym: usize) -> Arc<Expr> {
        if !self.depends_on(sym) {
            return Expr::num(0.0);
        }
        match &**self {
            Expr::Num(_) | Expr::Pi => Expr::num(0.0),
            Expr::Var(k) => Expr::num(if *k == sym { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate(sym)),
            Expr::Add(a, b) => add(a.differentiate(sym), b.differentiate(sym)),
            Expr::Sub(a, b) => sub(a.differentiate(sym), b.differentiate(sym)),
            Expr::Mul(a, b) => add(mul(a.differentiate(sym), Arc::clone(b)), mul(Arc::clone(a), b.differentiate(sym))),
            Expr::Div(a, b) => {
                let da = a.differentiate(sym);
                if !b.depends_on(sym) {
                    return div(da, Arc::clone(b));
                }
                let num = sub(mul(da, Arc::clone(b)), mul(Arc::clone(a), b.differentiate(sym)));
                div(num, pow(Arc::clone(b), Expr::num(2.0)))
            }
            Expr::Pow(base, exp) => {
                if !exp.depends_on(sym) {
                    // d(u^c) = c u^(c-1) u'
                    let lowered = pow(Arc::clone(base), sub(Arc::clone(exp), Expr::num(1.0)));
                    return mul(mul(Arc::clone(exp), lowered), base.differentiate(sym));
                }
                let log_base = call(Func::Log, Arc::clone(base));
                if !base.depends_on(sym) {
                    // d(c^v) = c^v log(c) v'
                    return mul(mul(Arc::clone(self), log_base), exp.differentiate(sym));
                }
                // d(u^v) = u^v (v' log u + v u'/u)
                let inner =
                    add(mul(exp.differentiate(sym), log_base), div(mul(Arc::clone(exp), base.differentiate(sym)), Arc::clone(base)));
                mul(Arc::clone(self), inner)
            }
            Expr::Call(f, u) => {
                let du = u.differentiate(sym);
                let u = Arc::clone(u);
                let outer = match f {
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Tan => div(Expr::num(1.0), pow(call(Func::Cos, u), Expr::num(2.0))),
                    Func::Exp => Arc::clone(self),
                    Func::Log => div(Expr::num(1.0), u),
                    Func::Sqrt => div(Expr::num(1.0), mul(Expr::num(2.0), Arc::clone(self))),
                    Func::Sinh => call(Func::Cosh, u),
                    Func::Cosh => call(Func::Sinh, u),
                    Func::Tanh => div(Expr::num(1.0), pow(call(Func::Cosh, u), Expr::num(2.0))),
                };
                mul(outer, du)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Symbols};
    use super::*;

    fn central(e: &Arc<Expr>, sym: usize, at: &[f64], h: f64) -> f64 {
        let mut p = at.to_vec();
        p[sym] = at[sym] + h;
        let up = e.eval_at(&p).unwrap();
        p[sym] = at[sym] - h;
        let dn = e.eval_at(&p).unwrap();
        (up - dn) / (2.0 * h)
    }

    #[test]
    fn sin_squared_at_quarter_pi() {
        let s = Symbols::new(["theta"]);
        let d = parse("sin(theta)^2", &s).unwrap().differentiate(0);
        let v = d.eval_at(&[std::f64::consts::FRAC_PI_4]).unwrap();
        assert!((v - 1.0).abs() < 1e-15, "{v}");
    }

    #[test]
    fn constant_has_zero_derivative() {
        let s = Symbols::new(["r"]);
        assert_eq!(*parse("1", &s).unwrap().differentiate(0), Expr::Num(0.0));
        assert_eq!(*parse("exp(pi)*3", &s).unwrap().differentiate(0), Expr::Num(0.0));
    }

    #[test]
    fn cubic_matches_finite_difference_oracle() {
        let s = Symbols::new(["x"]);
        let e = parse("x^3 - 2*x", &s).unwrap();
        // Oracle first: central difference at h = 1e-5 gives 10 to ~1e-9.
        let fd = central(&e, 0, &[2.0], 1e-5);
        assert!((fd - 10.0).abs() < 1e-8);
        let exact = e.differentiate(0).eval_at(&[2.0]).unwrap();
        assert!((exact - 10.0).abs() < 1e-12);
        assert!((exact - fd).abs() <= 1e-6 * fd.abs());
    }

    #[test]
    fn every_function_rule_agrees_with_central_difference() {
        let s = Symbols::new(["x", "y"]);
        let cases = [
            "sin(x*y)",
            "cos(x^2)",
            "tan(x/3)",
            "exp(-x*y)",
            "log(x + y^2)",
            "sqrt(1 + x*y)",
            "sinh(x - y)",
            "cosh(x)*y",
            "tanh(2*x)",
            "x^y",
            "2^x",
            "(x + 1)/(y + 2)",
            "-x^2*y",
        ];
        let at = [0.7, 1.3];
        for text in cases {
            let e = parse(text, &s).unwrap();
            for sym in 0..2 {
                let exact = e.differentiate(sym).eval_at(&at).unwrap();
                let fd = central(&e, sym, &at, 1e-5);
                assert!((exact - fd).abs() <= 1e-6 * (1.0 + exact.abs()), "{text} d{sym}: {exact} vs {fd}");
            }
        }
    }

    #[test]
    fn second_derivatives_are_exact() {
        let s = Symbols::new(["t"]);
        let e = parse("sin(t)^2", &s).unwrap();
        let dd = e.differentiate(0).differentiate(0);
        // d²/dt² sin² t = 2 cos 2t
        for t in [0.1, 0.9, 2.3] {
            let v = dd.eval_at(&[t]).unwrap();
            assert!((v - 2.0 * (2.0 * t).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn simplification_keeps_trees_small() {
        let s = Symbols::new(["x", "y"]);
        let d = parse("3*x + y", &s).unwrap().differentiate(0);
        assert_eq!(*d, Expr::Num(3.0));
        let d = parse("x*y", &s).unwrap().differentiate(1);
        assert_eq!(*d, Expr::Var(0));
    }
}
