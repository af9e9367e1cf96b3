//! Base-manifold tensor calculus in a single chart.
//!
//! A [`ManifoldSpec`] owns the metric, vector-field and 1-form expressions and
//! compiles their exact partial derivatives once. Pointwise quantities are
//! then obtained by evaluating those trees and combining the numbers: the
//! Christoffel symbols need `∂g`, the curvature needs `∂∂g`, and second
//! covariant derivatives of a field need `∂∂X`. No step uses finite
//! differences.
//!
//! Index conventions (shared by the whole crate):
//! - `christoffel[(h, j, i)] = Γ^h_{ji}`
//! - `riemann[(h, k, j, i)] = R^h_{kji} = ∂_kΓ^h_{ji} − ∂_jΓ^h_{ki} + Γ^h_{km}Γ^m_{ji} − Γ^h_{jm}Γ^m_{ki}`
//! - lowered curvature `R_{hkji} = g_{hm} R^m_{kji}`
//! - `∇X[(h, i)] = ∇_i X^h`, `∇∇X[(h, i, l)] = ∇_i ∇_l X^h`

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{parse, EvalError, Expr, ExprError, Func, Symbols};
use crate::tensor::{Tensor3, Tensor4};

/// Metrics with `|det g|` at or below this value are treated as singular.
pub const DET_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("manifold dimension must be at least 1")]
    EmptyChart,
    #[error("coordinate name `{0}` is reserved")]
    ReservedName(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("{what}: expected {expected} entries, found {found}")]
    DimensionMismatch { what: String, expected: usize, found: usize },
    #[error("index {index} out of range for dimension {dim} in {what}")]
    IndexOutOfRange { what: String, index: usize, dim: usize },
    #[error("in {context}: {source}")]
    Expr { context: String, source: ExprError },
    #[error("interval for `{coord}` is empty or not finite: [{lo}, {hi}]")]
    BadInterval { coord: String, lo: f64, hi: f64 },
    #[error("conflicting entries g[{0}][{1}] and g[{1}][{0}]")]
    AsymmetricMetric(usize, usize),
    #[error("metric is singular on the sampling domain: |det g| = {det:e} at {point:?}")]
    SingularDomain { det: f64, point: Vec<f64> },
    #[error("metric cannot be evaluated on the sampling domain at {point:?}: {message}")]
    DomainEvaluation { point: Vec<f64>, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("metric is singular: |det g| = {det:e}")]
    SingularMetric { det: f64 },
    #[error("unknown vector field `{0}`")]
    UnknownField(String),
    #[error("unknown 1-form `{0}`")]
    UnknownForm(String),
    #[error("point has {found} coordinates, chart has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn lerp(&self, t: f64) -> f64 {
        self.lo + (self.hi - self.lo) * t
    }
}

/// Named vector field `X^h` with compiled first and second partials.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub name: String,
    components: Vec<Arc<Expr>>,
    // d[h*n + i] = ∂_i X^h ; dd[(h*n + i)*n + l] = ∂_l∂_i X^h
    d: Vec<Arc<Expr>>,
    dd: Vec<Arc<Expr>>,
}

impl VectorField {
    pub fn components(&self) -> &[Arc<Expr>] {
        &self.components
    }
}

/// Named 1-form `ω_i` with compiled first partials.
#[derive(Clone, Debug)]
pub struct OneForm {
    pub name: String,
    components: Vec<Arc<Expr>>,
    // d[i*n + j] = ∂_j ω_i
    d: Vec<Arc<Expr>>,
}

impl OneForm {
    pub fn components(&self) -> &[Arc<Expr>] {
        &self.components
    }
}

#[derive(Clone, Debug)]
struct MetricTrees {
    g: Vec<Arc<Expr>>,
    // dg[(a*n + b)*n + c] = ∂_c g_ab
    dg: Vec<Arc<Expr>>,
    // ddg[((a*n + b)*n + c)*n + d] = ∂_d∂_c g_ab
    ddg: Vec<Arc<Expr>>,
}

/// Parsed and validated description of a chart.
#[derive(Clone, Debug)]
pub struct ManifoldSpec {
    name: String,
    symbols: Symbols,
    metric: MetricTrees,
    vector_fields: Vec<VectorField>,
    one_forms: Vec<OneForm>,
    base_domain: Vec<Interval>,
    fiber_domain: Vec<Interval>,
}

fn is_reserved(name: &str) -> bool {
    name == "pi" || Func::from_name(name).is_some()
}

/// Collects the pieces of a [`ManifoldSpec`]; `build` validates them.
#[derive(Clone, Debug)]
pub struct SpecBuilder {
    name: String,
    symbols: Symbols,
    metric: Vec<Option<Arc<Expr>>>,
    vector_fields: Vec<(String, Vec<Arc<Expr>>)>,
    one_forms: Vec<(String, Vec<Arc<Expr>>)>,
    base_domain: Option<Vec<Interval>>,
    fiber_domain: Option<Vec<Interval>>,
}

impl SpecBuilder {
    pub fn new<S: AsRef<str>>(name: &str, coords: &[S]) -> std::result::Result<Self, SpecError> {
        if coords.is_empty() {
            return Err(SpecError::EmptyChart);
        }
        let names: Vec<String> = coords.iter().map(|c| c.as_ref().trim().to_string()).collect();
        for (k, c) in names.iter().enumerate() {
            let valid = c.chars().next().is_some_and(|ch| ch.is_ascii_alphabetic() || ch == '_')
                && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
            if !valid || is_reserved(c) {
                return Err(SpecError::ReservedName(c.clone()));
            }
            if names[..k].contains(c) {
                return Err(SpecError::DuplicateName(c.clone()));
            }
        }
        let n = names.len();
        Ok(SpecBuilder {
            name: name.to_string(),
            symbols: Symbols::new(names),
            metric: vec![None; n * n],
            vector_fields: Vec::new(),
            one_forms: Vec::new(),
            base_domain: None,
            fiber_domain: None,
        })
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn dim(&self) -> usize {
        self.symbols.len()
    }

    fn parse(&self, text: &str, context: impl FnOnce() -> String) -> std::result::Result<Arc<Expr>, SpecError> {
        parse(text, &self.symbols).map_err(|source| SpecError::Expr { context: context(), source })
    }

    /// Sets `g[j][i]` (and its mirror). Giving both orders is allowed only if
    /// they are the same expression.
    pub fn metric_entry(&mut self, j: usize, i: usize, expr: Arc<Expr>) -> std::result::Result<&mut Self, SpecError> {
        let n = self.dim();
        for idx in [j, i] {
            if idx >= n {
                return Err(SpecError::IndexOutOfRange { what: "metric".into(), index: idx, dim: n });
            }
        }
        for (a, b) in [(j, i), (i, j)] {
            match &self.metric[a * n + b] {
                Some(prev) if **prev != *expr => return Err(SpecError::AsymmetricMetric(j, i)),
                _ => self.metric[a * n + b] = Some(Arc::clone(&expr)),
            }
        }
        Ok(self)
    }

    pub fn metric(&mut self, j: usize, i: usize, text: &str) -> std::result::Result<&mut Self, SpecError> {
        let e = self.parse(text, || format!("g[{j}][{i}]"))?;
        self.metric_entry(j, i, e)
    }

    pub fn vector_field_exprs(&mut self, name: &str, comps: Vec<Arc<Expr>>) -> std::result::Result<&mut Self, SpecError> {
        self.check_new_name(name)?;
        if comps.len() != self.dim() {
            return Err(SpecError::DimensionMismatch { what: format!("vector field `{name}`"), expected: self.dim(), found: comps.len() });
        }
        self.vector_fields.push((name.to_string(), comps));
        Ok(self)
    }

    pub fn vector_field<S: AsRef<str>>(&mut self, name: &str, comps: &[S]) -> std::result::Result<&mut Self, SpecError> {
        let exprs = comps
            .iter()
            .enumerate()
            .map(|(h, t)| self.parse(t.as_ref(), || format!("{name}.X[{h}]")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        self.vector_field_exprs(name, exprs)
    }

    pub fn one_form_exprs(&mut self, name: &str, comps: Vec<Arc<Expr>>) -> std::result::Result<&mut Self, SpecError> {
        self.check_new_name(name)?;
        if comps.len() != self.dim() {
            return Err(SpecError::DimensionMismatch { what: format!("1-form `{name}`"), expected: self.dim(), found: comps.len() });
        }
        self.one_forms.push((name.to_string(), comps));
        Ok(self)
    }

    pub fn one_form<S: AsRef<str>>(&mut self, name: &str, comps: &[S]) -> std::result::Result<&mut Self, SpecError> {
        let exprs = comps
            .iter()
            .enumerate()
            .map(|(i, t)| self.parse(t.as_ref(), || format!("{name}.w[{i}]")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        self.one_form_exprs(name, exprs)
    }

    fn check_new_name(&self, name: &str) -> std::result::Result<(), SpecError> {
        let taken = self.vector_fields.iter().any(|(n, _)| n == name) || self.one_forms.iter().any(|(n, _)| n == name);
        if taken {
            return Err(SpecError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub fn base_domain(&mut self, intervals: Vec<Interval>) -> &mut Self {
        self.base_domain = Some(intervals);
        self
    }

    pub fn fiber_domain(&mut self, intervals: Vec<Interval>) -> &mut Self {
        self.fiber_domain = Some(intervals);
        self
    }

    pub fn build(&self) -> std::result::Result<ManifoldSpec, SpecError> {
        let n = self.dim();
        let default = || vec![Interval::new(-1.0, 1.0); n];
        let base_domain = self.base_domain.clone().unwrap_or_else(default);
        let fiber_domain = self.fiber_domain.clone().unwrap_or_else(default);
        for (what, dom) in [("base domain", &base_domain), ("fiber domain", &fiber_domain)] {
            if dom.len() != n {
                return Err(SpecError::DimensionMismatch { what: what.into(), expected: n, found: dom.len() });
            }
        }
        for (k, iv) in base_domain.iter().chain(&fiber_domain).enumerate() {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
                let coord = if k < n { self.symbols.name(k).to_string() } else { format!("fiber {}", k - n) };
                return Err(SpecError::BadInterval { coord, lo: iv.lo, hi: iv.hi });
            }
        }

        let g: Vec<Arc<Expr>> = self.metric.iter().map(|e| e.clone().unwrap_or_else(|| Expr::num(0.0))).collect();
        let spec = ManifoldSpec {
            name: self.name.clone(),
            symbols: self.symbols.clone(),
            metric: compile_metric(n, g),
            vector_fields: self.vector_fields.iter().map(|(name, comps)| compile_field(n, name, comps.clone())).collect(),
            one_forms: self.one_forms.iter().map(|(name, comps)| compile_form(n, name, comps.clone())).collect(),
            base_domain,
            fiber_domain,
        };
        spec.probe_domain()?;
        Ok(spec)
    }
}

fn compile_metric(n: usize, g: Vec<Arc<Expr>>) -> MetricTrees {
    let mut dg = Vec::with_capacity(n * n * n);
    for ab in &g {
        for c in 0..n {
            dg.push(ab.differentiate(c));
        }
    }
    let mut ddg = vec![Expr::num(0.0); n * n * n * n];
    for ab in 0..n * n {
        for c in 0..n {
            for d in c..n {
                let e = dg[ab * n + c].differentiate(d);
                ddg[(ab * n + c) * n + d] = Arc::clone(&e);
                ddg[(ab * n + d) * n + c] = e;
            }
        }
    }
    MetricTrees { g, dg, ddg }
}

fn compile_field(n: usize, name: &str, components: Vec<Arc<Expr>>) -> VectorField {
    let d: Vec<Arc<Expr>> = components.iter().flat_map(|x| (0..n).map(move |i| x.differentiate(i))).collect();
    let dd = d.iter().flat_map(|x| (0..n).map(move |l| x.differentiate(l))).collect();
    VectorField { name: name.to_string(), components, d, dd }
}

fn compile_form(n: usize, name: &str, components: Vec<Arc<Expr>>) -> OneForm {
    let d = components.iter().flat_map(|w| (0..n).map(move |j| w.differentiate(j))).collect();
    OneForm { name: name.to_string(), components, d }
}

impl ManifoldSpec {
    pub fn builder<S: AsRef<str>>(name: &str, coords: &[S]) -> std::result::Result<SpecBuilder, SpecError> {
        SpecBuilder::new(name, coords)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn coords(&self) -> &[String] {
        self.symbols.names()
    }

    pub fn base_domain(&self) -> &[Interval] {
        &self.base_domain
    }

    pub fn fiber_domain(&self) -> &[Interval] {
        &self.fiber_domain
    }

    /// Metric expression `g_{ji}`.
    pub fn metric_expr(&self, j: usize, i: usize) -> &Arc<Expr> {
        &self.metric.g[j * self.dim() + i]
    }

    pub fn vector_fields(&self) -> &[VectorField] {
        &self.vector_fields
    }

    pub fn one_forms(&self) -> &[OneForm] {
        &self.one_forms
    }

    pub fn field(&self, name: &str) -> Result<&VectorField> {
        self.vector_fields.iter().find(|f| f.name == name).ok_or_else(|| GeometryError::UnknownField(name.to_string()))
    }

    pub fn form(&self, name: &str) -> Result<&OneForm> {
        self.one_forms.iter().find(|f| f.name == name).ok_or_else(|| GeometryError::UnknownForm(name.to_string()))
    }

    pub fn contains_base(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.base_domain.iter().zip(x).all(|(iv, v)| iv.contains(*v))
    }

    pub fn contains_fiber(&self, y: &[f64]) -> bool {
        y.len() == self.dim() && self.fiber_domain.iter().zip(y).all(|(iv, v)| iv.contains(*v))
    }

    pub(crate) fn eval(&self, e: &Arc<Expr>, x: &[f64]) -> Result<f64> {
        e.eval_at(x).map_err(|err: EvalError| GeometryError::Eval(err.describe(&self.symbols)))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    // Corners of the base box plus its center.
    fn probe_domain(&self) -> std::result::Result<(), SpecError> {
        let n = self.dim();
        let corner_count = 1usize << n.min(16);
        let mut probes: Vec<Vec<f64>> = (0..corner_count)
            .map(|mask| {
                (0..n)
                    .map(|k| {
                        let iv = self.base_domain[k];
                        if k < 16 && mask & (1 << k) != 0 {
                            iv.hi
                        } else {
                            iv.lo
                        }
                    })
                    .collect()
            })
            .collect();
        probes.push(self.base_domain.iter().map(|iv| iv.lerp(0.5)).collect());
        for p in probes {
            match self.metric_at(&p) {
                Ok(g) => {
                    let det = g.determinant();
                    if det.abs() <= DET_FLOOR {
                        return Err(SpecError::SingularDomain { det, point: p });
                    }
                }
                Err(e) => return Err(SpecError::DomainEvaluation { point: p, message: e.to_string() }),
            }
        }
        Ok(())
    }

    /// `g_{ji}` at `x`.
    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = self.eval(&self.metric.g[j * n + i], x)?;
                g[(j, i)] = v;
                g[(i, j)] = v;
            }
        }
        Ok(g)
    }

    /// `g^{ji}` at `x`.
    pub fn inverse_metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        invert_metric(&self.metric_at(x)?)
    }

    /// Full base jet: metric, inverse, first/second partials, Christoffel
    /// symbols, their partials and the curvature tensor.
    pub fn jet_at(&self, x: &[f64]) -> Result<BaseJet> {
        BaseJet::at(self, x)
    }

    pub fn christoffel_at(&self, x: &[f64]) -> Result<Tensor3> {
        Ok(self.jet_at(x)?.christoffel)
    }

    pub fn riemann_at(&self, x: &[f64]) -> Result<Tensor4> {
        Ok(self.jet_at(x)?.riemann)
    }

    /// `(∇_i X^h, ∇_i∇_l X^h)` for a declared field.
    pub fn covariant_derivatives_at(&self, field: &str, x: &[f64]) -> Result<(DMatrix<f64>, Tensor3)> {
        let jet = self.jet_at(x)?;
        let f = FieldJet::at(self, &jet, self.field(field)?, x)?;
        Ok((f.nabla, f.nabla2))
    }

    /// `∇_j X_i + ∇_i X_j` with `X_i = g_{ih} X^h`.
    pub fn killing_residual_base(&self, field: &str, x: &[f64]) -> Result<DMatrix<f64>> {
        let jet = self.jet_at(x)?;
        let f = FieldJet::at(self, &jet, self.field(field)?, x)?;
        let lowered = f.nabla_lowered(&jet);
        Ok(&lowered + lowered.transpose())
    }

    /// Coordinate covariant derivative `∇_k g_{ji}`, indexed `[(k, j, i)]`.
    pub fn metric_compatibility_at(&self, x: &[f64]) -> Result<Tensor3> {
        let jet = self.jet_at(x)?;
        let n = self.dim();
        Ok(Tensor3::from_fn(n, |k, j, i| {
            let mut v = jet.dg[(j, i, k)];
            for m in 0..n {
                v -= jet.christoffel[(m, k, j)] * jet.g[(m, i)] + jet.christoffel[(m, k, i)] * jet.g[(j, m)];
            }
            v
        }))
    }
}

pub(crate) fn invert_metric(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let det = g.determinant();
    if det.abs() <= DET_FLOOR {
        return Err(GeometryError::SingularMetric { det });
    }
    g.clone().try_inverse().ok_or(GeometryError::SingularMetric { det })
}

/// Everything about the base metric at one point.
#[derive(Clone, Debug)]
pub struct BaseJet {
    pub x: Vec<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `∂_c g_{ab}` at `[(a, b, c)]`.
    pub dg: Tensor3,
    /// `∂_d ∂_c g_{ab}` at `[(a, b, c, d)]`.
    pub ddg: Tensor4,
    /// `Γ^h_{ji}` at `[(h, j, i)]`.
    pub christoffel: Tensor3,
    /// `∂_k Γ^h_{ji}` at `[(h, j, i, k)]`.
    pub d_christoffel: Tensor4,
    /// `R^h_{kji}` at `[(h, k, j, i)]`.
    pub riemann: Tensor4,
}

impl BaseJet {
    pub fn at(spec: &ManifoldSpec, x: &[f64]) -> Result<BaseJet> {
        let n = spec.dim();
        let g = spec.metric_at(x)?;
        let g_inv = invert_metric(&g)?;
        let t = &spec.metric;
        let mut dg = Tensor3::zeros(n);
        let mut ddg = Tensor4::zeros(n);
        for a in 0..n {
            for b in a..n {
                for c in 0..n {
                    let v = spec.eval(&t.dg[(a * n + b) * n + c], x)?;
                    dg[(a, b, c)] = v;
                    dg[(b, a, c)] = v;
                    for d in c..n {
                        let v = spec.eval(&t.ddg[((a * n + b) * n + c) * n + d], x)?;
                        for (p, q) in [(a, b), (b, a)] {
                            ddg[(p, q, c, d)] = v;
                            ddg[(p, q, d, c)] = v;
                        }
                    }
                }
            }
        }
        let christoffel = christoffel_from(&g_inv, &dg);
        let d_christoffel = christoffel_derivative(&g_inv, &dg, &ddg);
        let riemann = riemann_from(&christoffel, &d_christoffel);
        Ok(BaseJet { x: x.to_vec(), g, g_inv, dg, ddg, christoffel, d_christoffel, riemann })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `R_{hkji} = g_{hm} R^m_{kji}`.
    pub fn riemann_lowered(&self) -> Tensor4 {
        lower_first(&self.g, &self.riemann)
    }

    /// `Γ^h_i = y^j Γ^h_{ji}` as a matrix `[(h, i)]`.
    pub fn contracted_christoffel(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |h, i| (0..n).map(|j| y[j] * self.christoffel[(h, j, i)]).sum())
    }
}

/// `Γ^h_{ji} = ½ g^{hm}(∂_j g_{mi} + ∂_i g_{mj} − ∂_m g_{ji})`.
pub fn christoffel_from(g_inv: &DMatrix<f64>, dg: &Tensor3) -> Tensor3 {
    let n = g_inv.nrows();
    let first_kind = Tensor3::from_fn(n, |m, j, i| 0.5 * (dg[(m, i, j)] + dg[(m, j, i)] - dg[(j, i, m)]));
    Tensor3::from_fn(n, |h, j, i| (0..n).map(|m| g_inv[(h, m)] * first_kind[(m, j, i)]).sum())
}

fn christoffel_derivative(g_inv: &DMatrix<f64>, dg: &Tensor3, ddg: &Tensor4) -> Tensor4 {
    let n = g_inv.nrows();
    let first_kind = Tensor3::from_fn(n, |m, j, i| 0.5 * (dg[(m, i, j)] + dg[(m, j, i)] - dg[(j, i, m)]));
    // ∂_k g^{hm} = −g^{ha} ∂_k g_{ab} g^{bm}
    let mut d_inv = Tensor3::zeros(n); // [(h, m, k)]
    for h in 0..n {
        for m in 0..n {
            for k in 0..n {
                let mut v = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        v -= g_inv[(h, a)] * dg[(a, b, k)] * g_inv[(b, m)];
                    }
                }
                d_inv[(h, m, k)] = v;
            }
        }
    }
    Tensor4::from_fn(n, |h, j, i, k| {
        (0..n)
            .map(|m| {
                let d_first = 0.5 * (ddg[(m, i, j, k)] + ddg[(m, j, i, k)] - ddg[(j, i, m, k)]);
                d_inv[(h, m, k)] * first_kind[(m, j, i)] + g_inv[(h, m)] * d_first
            })
            .sum()
    })
}

/// `R^h_{kji}` from `Γ` and `∂Γ` (`d_christoffel[(h, j, i, k)] = ∂_kΓ^h_{ji}`).
pub fn riemann_from(gamma: &Tensor3, d_gamma: &Tensor4) -> Tensor4 {
    let n = gamma.dim();
    Tensor4::from_fn(n, |h, k, j, i| {
        let mut v = d_gamma[(h, j, i, k)] - d_gamma[(h, k, i, j)];
        for m in 0..n {
            v += gamma[(h, k, m)] * gamma[(m, j, i)] - gamma[(h, j, m)] * gamma[(m, k, i)];
        }
        v
    })
}

/// `T_{hkji} = g_{hm} T^m_{kji}`.
pub fn lower_first(g: &DMatrix<f64>, t: &Tensor4) -> Tensor4 {
    let n = g.nrows();
    Tensor4::from_fn(n, |h, k, j, i| (0..n).map(|m| g[(h, m)] * t[(m, k, j, i)]).sum())
}

/// `T^h_{kji} = g^{hm} T_{mkji}`.
pub fn raise_first(g_inv: &DMatrix<f64>, t: &Tensor4) -> Tensor4 {
    lower_first(g_inv, t)
}

/// A vector field and its covariant derivatives at one point.
#[derive(Clone, Debug)]
pub struct FieldJet {
    /// `X^h`
    pub x: Vec<f64>,
    /// `∂_i X^h` at `[(h, i)]`
    pub dx: DMatrix<f64>,
    /// `∂_l ∂_i X^h` at `[(h, i, l)]`
    pub ddx: Tensor3,
    /// `∇_i X^h` at `[(h, i)]`
    pub nabla: DMatrix<f64>,
    /// `∂_i (∇_l X^h)` at `[(h, l, i)]`
    pub d_nabla: Tensor3,
    /// `∇_i ∇_l X^h` at `[(h, i, l)]`
    pub nabla2: Tensor3,
}

impl FieldJet {
    pub fn at(spec: &ManifoldSpec, jet: &BaseJet, field: &VectorField, x: &[f64]) -> Result<FieldJet> {
        let n = spec.dim();
        let xs = field.components.iter().map(|e| spec.eval(e, x)).collect::<Result<Vec<_>>>()?;
        let mut dx = DMatrix::zeros(n, n);
        let mut ddx = Tensor3::zeros(n);
        for h in 0..n {
            for i in 0..n {
                dx[(h, i)] = spec.eval(&field.d[h * n + i], x)?;
                for l in 0..n {
                    ddx[(h, i, l)] = spec.eval(&field.dd[(h * n + i) * n + l], x)?;
                }
            }
        }
        let gamma = &jet.christoffel;
        let nabla = DMatrix::from_fn(n, n, |h, i| dx[(h, i)] + (0..n).map(|m| gamma[(h, i, m)] * xs[m]).sum::<f64>());
        let d_nabla = Tensor3::from_fn(n, |h, l, i| {
            let mut v = ddx[(h, l, i)];
            for m in 0..n {
                v += jet.d_christoffel[(h, l, m, i)] * xs[m] + gamma[(h, l, m)] * dx[(m, i)];
            }
            v
        });
        let nabla2 = Tensor3::from_fn(n, |h, i, l| {
            let mut v = d_nabla[(h, l, i)];
            for m in 0..n {
                v += gamma[(h, i, m)] * nabla[(m, l)] - gamma[(m, i, l)] * nabla[(h, m)];
            }
            v
        });
        Ok(FieldJet { x: xs, dx, ddx, nabla, d_nabla, nabla2 })
    }

    /// `X_i = g_{ih} X^h`.
    pub fn lowered(&self, jet: &BaseJet) -> Vec<f64> {
        let n = jet.dim();
        (0..n).map(|i| (0..n).map(|h| jet.g[(i, h)] * self.x[h]).sum()).collect()
    }

    /// `∇_i X_j` at `[(i, j)]`.
    pub fn nabla_lowered(&self, jet: &BaseJet) -> DMatrix<f64> {
        let n = jet.dim();
        DMatrix::from_fn(n, n, |i, j| (0..n).map(|h| jet.g[(j, h)] * self.nabla[(h, i)]).sum())
    }

    /// `∇_i ∇_l X_j` at `[(i, l, j)]`.
    pub fn nabla2_lowered(&self, jet: &BaseJet) -> Tensor3 {
        let n = jet.dim();
        Tensor3::from_fn(n, |i, l, j| (0..n).map(|h| jet.g[(j, h)] * self.nabla2[(h, i, l)]).sum())
    }
}

/// 1-form values and partials at a point: `(ω_i, ∂_j ω_i at [(i, j)])`.
pub fn one_form_at(spec: &ManifoldSpec, form: &OneForm, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = spec.dim();
    let w = form.components.iter().map(|e| spec.eval(e, x)).collect::<Result<Vec<_>>>()?;
    let mut dw = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            dw[(i, j)] = spec.eval(&form.d[i * n + j], x)?;
        }
    }
    Ok((w, dw))
}
