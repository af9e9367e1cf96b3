//! Closed-form scalar expressions over a fixed list of coordinate symbols.
//!
//! Expressions are parsed against a [`Symbols`] table, so every variable in a
//! tree is an index into that table. Trees are immutable and share subtrees
//! through `Arc`, which keeps symbolic differentiation cheap to build.

mod diff;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::parse;

/// Built-in functions accepted by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 9] = [Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Log, Func::Sqrt, Func::Sinh, Func::Cosh, Func::Tanh];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
        }
    }
}

/// Ordered coordinate names; `Expr::Var(k)` refers to `names[k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symbols(Arc<[String]>);

impl Symbols {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Symbols(names.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|s| s == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.0[index]
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }
}

/// Binding of every symbol of a [`Symbols`] table to a value.
#[derive(Clone, Debug)]
pub struct Env {
    symbols: Symbols,
    values: Vec<f64>,
}

impl Env {
    /// Builds an environment from `name -> value` pairs. Every declared symbol
    /// must be bound and no other names may appear.
    pub fn from_map(symbols: &Symbols, map: &BTreeMap<String, f64>) -> Result<Env, ExprError> {
        let mut values = vec![0.0; symbols.len()];
        for (k, slot) in values.iter_mut().enumerate() {
            *slot = *map.get(symbols.name(k)).ok_or_else(|| ExprError::UnboundSymbol(symbols.name(k).to_string()))?;
        }
        if let Some(extra) = map.keys().find(|k| symbols.index_of(k).is_none()) {
            return Err(ExprError::UnknownSymbol { name: extra.clone(), offset: 0 });
        }
        Ok(Env { symbols: symbols.clone(), values })
    }

    pub fn from_values(symbols: &Symbols, values: &[f64]) -> Env {
        assert_eq!(symbols.len(), values.len(), "one value per symbol");
        Env { symbols: symbols.clone(), values: values.to_vec() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }
}

/// Expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// The reserved constant `pi`.
    Pi,
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, Arc<Expr>),
    Call(Func, Arc<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("symbol `{0}` is not bound")]
    UnboundSymbol(String),
}

/// What went wrong while evaluating a subexpression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainFault {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NegativeBaseFractionalPower,
    NonFinite,
}

impl fmt::Display for DomainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainFault::DivisionByZero => "division by zero",
            DomainFault::LogOfNonPositive => "log of a non-positive value",
            DomainFault::SqrtOfNegative => "sqrt of a negative value",
            DomainFault::NegativeBaseFractionalPower => "negative base raised to a fractional power",
            DomainFault::NonFinite => "non-finite result",
        };
        f.write_str(s)
    }
}

/// Evaluation failure; carries the offending subexpression.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalError {
    pub fault: DomainFault,
    pub subexpr: Arc<Expr>,
}

impl EvalError {
    /// Human-readable message with the subexpression rendered through `symbols`.
    pub fn describe(&self, symbols: &Symbols) -> String {
        format!("{} in `{}`", self.fault, self.subexpr.to_text(symbols))
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in `{}`", self.fault, Rendered { expr: &self.subexpr, symbols: None })
    }
}

impl std::error::Error for EvalError {}

impl Expr {
    pub fn num(v: f64) -> Arc<Expr> {
        Arc::new(Expr::Num(v))
    }

    pub fn var(k: usize) -> Arc<Expr> {
        Arc::new(Expr::Var(k))
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// True if the tree mentions `Var(sym)`.
    pub fn depends_on(&self, sym: usize) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(k) => *k == sym,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(sym),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(sym) || b.depends_on(sym)
            }
        }
    }

    /// Largest symbol index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Pi => None,
            Expr::Var(k) => Some(*k),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Number of nodes (shared subtrees counted once per reference).
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn eval(self: &Arc<Self>, env: &Env) -> Result<f64, EvalError> {
        self.eval_at(env.values())
    }

    /// Evaluates with `vars[k]` bound to `Var(k)`.
    pub fn eval_at(self: &Arc<Self>, vars: &[f64]) -> Result<f64, EvalError> {
        let fail = |fault| EvalError { fault, subexpr: Arc::clone(self) };
        let v = match &**self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(k) => vars[*k],
            Expr::Neg(a) => -a.eval_at(vars)?,
            Expr::Add(a, b) => a.eval_at(vars)? + b.eval_at(vars)?,
            Expr::Sub(a, b) => a.eval_at(vars)? - b.eval_at(vars)?,
            Expr::Mul(a, b) => a.eval_at(vars)? * b.eval_at(vars)?,
            Expr::Div(a, b) => {
                let num = a.eval_at(vars)?;
                let den = b.eval_at(vars)?;
                if den == 0.0 {
                    return Err(fail(DomainFault::DivisionByZero));
                }
                num / den
            }
            Expr::Pow(a, b) => {
                let base = a.eval_at(vars)?;
                let exp = b.eval_at(vars)?;
                if base == 0.0 && exp < 0.0 {
                    return Err(fail(DomainFault::DivisionByZero));
                }
                if base < 0.0 && exp.fract() != 0.0 {
                    return Err(fail(DomainFault::NegativeBaseFractionalPower));
                }
                if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
                    base.powi(exp as i32)
                } else {
                    base.powf(exp)
                }
            }
            Expr::Call(func, a) => {
                let arg = a.eval_at(vars)?;
                match func {
                    Func::Log if arg <= 0.0 => return Err(fail(DomainFault::LogOfNonPositive)),
                    Func::Sqrt if arg < 0.0 => return Err(fail(DomainFault::SqrtOfNegative)),
                    _ => func.apply(arg),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fail(DomainFault::NonFinite))
        }
    }

    /// Renders in the input grammar; reparsing yields an equivalent tree.
    pub fn to_text(&self, symbols: &Symbols) -> String {
        Rendered { expr: self, symbols: Some(symbols) }.to_string()
    }
}

// Simplifying constructors. Used by differentiation and by code that builds
// composite trees (the oracle); they fold constants and drop 0/1 identities.

pub fn add(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => Expr::num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Arc::new(Expr::Add(a, b)),
    }
}

pub fn sub(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => Expr::num(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Arc::new(Expr::Sub(a, b)),
    }
}

pub fn mul(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) => Expr::num(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(-1.0), _) => neg(b),
        (_, Some(-1.0)) => neg(a),
        _ => Arc::new(Expr::Mul(a, b)),
    }
}

pub fn div(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (a.as_num(), b.as_num()) {
        (Some(x), Some(y)) if y != 0.0 && (x / y).is_finite() => Expr::num(x / y),
        (Some(0.0), _) => Expr::num(0.0),
        (_, Some(1.0)) => a,
        _ => Arc::new(Expr::Div(a, b)),
    }
}

pub fn pow(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (a.as_num(), b.as_num()) {
        (_, Some(0.0)) => Expr::num(1.0),
        (_, Some(1.0)) => a,
        (Some(x), Some(y)) => {
            let v = x.powf(y);
            if v.is_finite() && !(x < 0.0 && y.fract() != 0.0) {
                Expr::num(v)
            } else {
                Arc::new(Expr::Pow(a, b))
            }
        }
        _ => Arc::new(Expr::Pow(a, b)),
    }
}

pub fn neg(a: Arc<Expr>) -> Arc<Expr> {
    match &*a {
        Expr::Num(v) => Expr::num(-v),
        Expr::Neg(inner) => Arc::clone(inner),
        _ => Arc::new(Expr::Neg(a)),
    }
}

pub fn call(f: Func, a: Arc<Expr>) -> Arc<Expr> {
    if let Some(v) = a.as_num() {
        let r = f.apply(v);
        let in_domain = match f {
            Func::Log => v > 0.0,
            Func::Sqrt => v >= 0.0,
            _ => true,
        };
        if in_domain && r.is_finite() {
            return Expr::num(r);
        }
    }
    Arc::new(Expr::Call(f, a))
}

/// Sum of a list of terms, simplified.
pub fn sum<I: IntoIterator<Item = Arc<Expr>>>(terms: I) -> Arc<Expr> {
    terms.into_iter().fold(Expr::num(0.0), add)
}

// Precedence levels used by the printer. A child printed in a slot that
// requires level L is parenthesized when its own level is lower.
const LVL_SUM: u8 = 1;
const LVL_PRODUCT: u8 = 2;
const LVL_UNARY: u8 = 3;
const LVL_ATOM: u8 = 5;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => LVL_SUM,
        Expr::Mul(..) | Expr::Div(..) => LVL_PRODUCT,
        Expr::Neg(_) => LVL_UNARY,
        Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => LVL_UNARY,
        Expr::Pow(..) => 4,
        _ => LVL_ATOM,
    }
}

struct Rendered<'a> {
    expr: &'a Expr,
    symbols: Option<&'a Symbols>,
}

impl Rendered<'_> {
    fn child(&self, f: &mut fmt::Formatter<'_>, e: &Expr, min_level: u8) -> fmt::Result {
        let r = Rendered { expr: e, symbols: self.symbols };
        if level(e) < min_level {
            write!(f, "({r})")
        } else {
            write!(f, "{r}")
        }
    }
}

impl fmt::Display for Rendered<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "-{}", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Pi => f.write_str("pi"),
            Expr::Var(k) => match self.symbols {
                Some(s) => f.write_str(s.name(*k)),
                None => write!(f, "${k}"),
            },
            Expr::Neg(a) => {
                f.write_str("-")?;
                self.child(f, a, LVL_UNARY)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                self.child(f, a, LVL_SUM)?;
                f.write_str(if matches!(self.expr, Expr::Add(..)) { " + " } else { " - " })?;
                self.child(f, b, LVL_PRODUCT)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                self.child(f, a, LVL_PRODUCT)?;
                f.write_str(if matches!(self.expr, Expr::Mul(..)) { "*" } else { "/" })?;
                self.child(f, b, LVL_UNARY)
            }
            Expr::Pow(a, b) => {
                self.child(f, a, LVL_ATOM)?;
                f.write_str("^")?;
                self.child(f, b, LVL_UNARY)
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.child(f, a, 0)?;
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms() -> Symbols {
        Symbols::new(["r", "theta", "phi", "x"])
    }

    fn ev(text: &str, vals: &[(&str, f64)]) -> Result<f64, EvalError> {
        let s = syms();
        let e = parse(text, &s).unwrap();
        let mut map = BTreeMap::new();
        for name in s.names() {
            map.insert(name.clone(), 0.0);
        }
        for (k, v) in vals {
            map.insert(k.to_string(), *v);
        }
        e.eval(&Env::from_map(&s, &map).unwrap())
    }

    #[test]
    fn evaluates_examples() {
        let v = ev("sin(theta)^2", &[("theta", std::f64::consts::FRAC_PI_2)]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(ev("r^2", &[("r", 3.0)]).unwrap(), 9.0);
    }

    #[test]
    fn division_by_zero_names_the_subexpression() {
        let err = ev("1 + 1/r", &[("r", 0.0)]).unwrap_err();
        assert_eq!(err.fault, DomainFault::DivisionByZero);
        assert_eq!(err.describe(&syms()), "division by zero in `1/r`");
    }

    #[test]
    fn domain_faults() {
        assert_eq!(ev("log(r)", &[("r", 0.0)]).unwrap_err().fault, DomainFault::LogOfNonPositive);
        assert_eq!(ev("sqrt(r)", &[("r", -1.0)]).unwrap_err().fault, DomainFault::SqrtOfNegative);
        assert_eq!(ev("r^0.5", &[("r", -2.0)]).unwrap_err().fault, DomainFault::NegativeBaseFractionalPower);
        assert_eq!(ev("r^-1", &[("r", 0.0)]).unwrap_err().fault, DomainFault::DivisionByZero);
        assert_eq!(ev("exp(r)", &[("r", 1000.0)]).unwrap_err().fault, DomainFault::NonFinite);
        assert_eq!(ev("r^3", &[("r", -2.0)]).unwrap(), -8.0);
    }

    #[test]
    fn env_requires_every_symbol() {
        let s = syms();
        let mut map = BTreeMap::new();
        map.insert("r".to_string(), 1.0);
        assert!(matches!(Env::from_map(&s, &map), Err(ExprError::UnboundSymbol(_))));
    }

    #[test]
    fn printer_parenthesizes_by_precedence() {
        let s = syms();
        for text in ["(r + x)*theta", "r - (x - theta)", "(r^x)^theta", "r^x^theta", "-(r + x)", "(-r)^2", "r/(x*theta)"] {
            let e = parse(text, &s).unwrap();
            let printed = e.to_text(&s);
            assert_eq!(parse(&printed, &s).unwrap(), e, "{text} -> {printed}");
        }
        assert_eq!(parse("-r*cos(phi)+2", &s).unwrap().to_text(&s), "-r*cos(phi) + 2");
    }

    #[test]
    fn constructors_fold_constants() {
        assert_eq!(*add(Expr::num(2.0), Expr::num(3.0)), Expr::Num(5.0));
        assert_eq!(*mul(Expr::var(0), Expr::num(0.0)), Expr::Num(0.0));
        assert_eq!(*mul(Expr::num(1.0), Expr::var(1)), Expr::Var(1));
        assert_eq!(*pow(Expr::var(1), Expr::num(1.0)), Expr::Var(1));
        assert_eq!(*neg(neg(Expr::var(2))), Expr::Var(2));
        assert!(matches!(*call(Func::Log, Expr::num(-1.0)), Expr::Call(Func::Log, _)));
    }
}
