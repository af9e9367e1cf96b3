//! Induced-coordinate ground truth.
//!
//! Everything here is rebuilt from the parsed metric and field expressions
//! as symbolic trees over the `2n` variables `(x, y)`: a cofactor inverse of
//! `g`, the base Christoffel symbols, the frame `E` and coframe `C`, the
//! induced metric `g̃ = Cᵀ·diag-blocks·C` and the induced lift components.
//! Those trees are differentiated exactly and evaluated, and only the
//! textbook coordinate formulas are applied afterwards:
//!
//! - Christoffel symbols of `g̃` in `(x, y)`,
//! - `(L_X̃ g̃)_{AB} = X̃^C ∂_C g̃_{AB} + g̃_{CB} ∂_A X̃^C + g̃_{AC} ∂_B X̃^C`,
//! - the anholonomic change of frame
//!   `Γ̃^α_{γβ} = C^α_c (E^B_γ ∂_B E^c_β + E^B_γ E^D_β Γ^c_{BD})`.
//!
//! The module never calls the adapted-frame formulas of `bundle` or
//! `killing`; it only borrows their value types.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::bundle::{Block2Tensor, BundleConnection, BundlePoint, Frame, LiftKind, Variance};
use crate::expr::{add, div, mul, neg, sub, sum, Expr, Symbols};
use crate::geometry::{christoffel_from, riemann_from, GeometryError, ManifoldSpec, DET_FLOOR};
use crate::tensor::{Tensor3, Tensor4};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("induced metric is singular at this point: |det| = {det:e}")]
    SingularInducedMetric { det: f64 },
    #[error("unknown vector field `{0}`")]
    UnknownField(String),
    #[error("finite-difference step {h:e} outside [1e-7, 1e-3]")]
    StepOutOfRange { h: f64 },
    #[error("stencil leaves the domain: {coord} = {value} ± {h:e} not inside [{lo}, {hi}]")]
    StencilOutsideDomain { coord: String, value: f64, h: f64, lo: f64, hi: f64 },
    #[error("bundle point has base dimension {base} and fiber dimension {fiber}, chart has {dim}")]
    DimensionMismatch { base: usize, fiber: usize, dim: usize },
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

type Trees = Vec<Arc<Expr>>;

fn zero() -> Arc<Expr> {
    Expr::num(0.0)
}

fn one() -> Arc<Expr> {
    Expr::num(1.0)
}

/// Determinant by cofactor expansion along the first of `rows`.
fn sym_det(m: &[Trees], rows: &[usize], cols: &[usize]) -> Arc<Expr> {
    if rows.len() == 1 {
        return Arc::clone(&m[rows[0]][cols[0]]);
    }
    let r = rows[0];
    let sub_rows = &rows[1..];
    let mut terms = Vec::with_capacity(cols.len());
    for (k, &c) in cols.iter().enumerate() {
        if m[r][c].as_num() == Some(0.0) {
            continue;
        }
        let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let minor = mul(Arc::clone(&m[r][c]), sym_det(m, sub_rows, &sub_cols));
        terms.push(if k % 2 == 0 { minor } else { neg(minor) });
    }
    sum(terms)
}

/// Symbolic inverse `adj(m) / det(m)`.
fn sym_inverse(m: &[Trees]) -> Vec<Trees> {
    let n = m.len();
    let all: Vec<usize> = (0..n).collect();
    let det = sym_det(m, &all, &all);
    if n == 1 {
        return vec![vec![div(one(), det)]];
    }
    (0..n)
        .map(|h| {
            (0..n)
                .map(|k| {
                    // (m⁻¹)_{hk} = (−1)^{h+k} M_{kh} / det
                    let rows: Vec<usize> = all.iter().copied().filter(|&x| x != k).collect();
                    let cols: Vec<usize> = all.iter().copied().filter(|&x| x != h).collect();
                    let minor = sym_det(m, &rows, &cols);
                    let signed = if (h + k) % 2 == 0 { minor } else { neg(minor) };
                    div(signed, Arc::clone(&det))
                })
                .collect()
        })
        .collect()
}

fn grad(trees: &[Arc<Expr>], vars: usize) -> Trees {
    trees.iter().flat_map(|e| (0..vars).map(move |k| e.differentiate(k))).collect()
}

#[derive(Clone, Debug)]
struct CompiledLift {
    // components X̃^A and partials d[A*2n + K] = ∂_K X̃^A
    comps: Trees,
    d: Trees,
}

/// Symbolic trees for one spec over the variables `(x^1..x^n, y^1..y^n)`.
#[derive(Clone, Debug)]
pub struct Oracle {
    n: usize,
    symbols: Symbols,
    base_domain: Vec<crate::geometry::Interval>,
    fiber_domain: Vec<crate::geometry::Interval>,
    // 2n × 2n row-major
    metric: Trees,
    d_metric: Trees,
    frame: Trees,
    d_frame: Trees,
    coframe: Trees,
    lifts: Vec<(String, [CompiledLift; 3])>,
}

/// Numerical values of the oracle trees at one bundle point.
#[derive(Clone, Debug)]
pub struct InducedJet {
    pub q: BundlePoint,
    /// `g̃_{AB}`
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    /// `∂_K g̃_{AB}` at `[(A, B, K)]`
    pub d_metric: Tensor3,
    /// `Γ^A_{BC}` of `g̃` at `[(A, B, C)]`
    pub christoffel: Tensor3,
    /// `E^A_γ`
    pub frame: DMatrix<f64>,
    /// `C^α_A`
    pub coframe: DMatrix<f64>,
    /// `∂_K E^A_γ` at `[(A, γ, K)]`
    pub d_frame: Tensor3,
}

impl Oracle {
    pub fn new(spec: &ManifoldSpec) -> Oracle {
        let n = spec.dim();
        let m = 2 * n;
        let names: Vec<String> = spec.coords().iter().cloned().chain(spec.coords().iter().map(|c| format!("y_{c}"))).collect();

        let g: Vec<Trees> = (0..n).map(|j| (0..n).map(|i| Arc::clone(spec.metric_expr(j, i))).collect()).collect();
        let g_inv = sym_inverse(&g);
        let dg = |a: usize, b: usize, c: usize| g[a][b].differentiate(c);
        // Γ^h_{ji}
        let gamma: Vec<Vec<Trees>> = (0..n)
            .map(|h| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|i| {
                                sum((0..n).map(|mm| {
                                    let first = sub(add(dg(mm, i, j), dg(mm, j, i)), dg(j, i, mm));
                                    mul(Arc::clone(&g_inv[h][mm]), mul(Expr::num(0.5), first))
                                }))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        // Γ^h_i = y^j Γ^h_{ji}
        let gamma_y: Vec<Trees> =
            (0..n).map(|h| (0..n).map(|i| sum((0..n).map(|j| mul(Expr::var(n + j), Arc::clone(&gamma[h][j][i]))))).collect()).collect();

        let mut frame = vec![zero(); m * m];
        let mut coframe = vec![zero(); m * m];
        for k in 0..m {
            frame[k * m + k] = one();
            coframe[k * m + k] = one();
        }
        for h in 0..n {
            for i in 0..n {
                frame[(n + h) * m + i] = neg(Arc::clone(&gamma_y[h][i]));
                coframe[(n + h) * m + i] = Arc::clone(&gamma_y[h][i]);
            }
        }

        // Adapted blocks ((0, g), (g, g)), then g̃_{AB} = C^α_A G_{αβ} C^β_B.
        let adapted = |a: usize, b: usize| -> Arc<Expr> {
            if a < n && b < n {
                zero()
            } else {
                Arc::clone(&g[a % n][b % n])
            }
        };
        let mut metric = vec![zero(); m * m];
        for a in 0..m {
            for b in a..m {
                let e = sum((0..m).flat_map(|al| {
                    let coframe = &coframe;
                    (0..m).map(move |be| mul(mul(Arc::clone(&coframe[al * m + a]), adapted(al, be)), Arc::clone(&coframe[be * m + b])))
                }));
                metric[a * m + b] = Arc::clone(&e);
                metric[b * m + a] = e;
            }
        }
        let d_metric = grad(&metric, m);
        let d_frame = grad(&frame, m);

        let lifts = spec
            .vector_fields()
            .iter()
            .map(|f| {
                let x: Trees = f.components().to_vec();
                let build = |kind: LiftKind| {
                    let fiber: Trees = match kind {
                        LiftKind::Vertical => x.clone(),
                        LiftKind::Complete => (0..n).map(|h| sum((0..n).map(|l| mul(Expr::var(n + l), x[h].differentiate(l))))).collect(),
                        LiftKind::Horizontal => {
                            (0..n).map(|h| neg(sum((0..n).map(|i| mul(Arc::clone(&gamma_y[h][i]), Arc::clone(&x[i])))))).collect()
                        }
                    };
                    let base: Trees = match kind {
                        LiftKind::Vertical => vec![zero(); n],
                        _ => x.clone(),
                    };
                    let comps: Trees = base.into_iter().chain(fiber).collect();
                    let d = grad(&comps, m);
                    CompiledLift { comps, d }
                };
                (f.name.clone(), [build(LiftKind::Vertical), build(LiftKind::Complete), build(LiftKind::Horizontal)])
            })
            .collect();

        Oracle {
            n,
            symbols: Symbols::new(names),
            base_domain: spec.base_domain().to_vec(),
            fiber_domain: spec.fiber_domain().to_vec(),
            metric,
            d_metric,
            frame,
            d_frame,
            coframe,
            lifts,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Names of the `2n` oracle variables (`y_<coord>` for fiber slots).
    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    /// Induced metric entry `g̃_{AB}` as a tree in `(x, y)`.
    pub fn metric_expr(&self, a: usize, b: usize) -> &Arc<Expr> {
        &self.metric[a * 2 * self.n + b]
    }

    fn eval(&self, e: &Arc<Expr>, z: &[f64]) -> Result<f64> {
        e.eval_at(z).map_err(|err| OracleError::Geometry(GeometryError::Eval(err.describe(&self.symbols))))
    }

    fn eval_matrix(&self, trees: &[Arc<Expr>], z: &[f64]) -> Result<DMatrix<f64>> {
        let m = 2 * self.n;
        let mut out = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                out[(a, b)] = self.eval(&trees[a * m + b], z)?;
            }
        }
        Ok(out)
    }

    fn eval_cube(&self, trees: &[Arc<Expr>], z: &[f64]) -> Result<Tensor3> {
        let m = 2 * self.n;
        let mut out = Tensor3::zeros(m);
        for (k, e) in trees.iter().enumerate() {
            out[(k / (m * m), (k / m) % m, k % m)] = self.eval(e, z)?;
        }
        Ok(out)
    }

    fn point(&self, q: &BundlePoint) -> Result<Vec<f64>> {
        if q.x.len() != self.n || q.y.len() != self.n {
            return Err(OracleError::DimensionMismatch { base: q.x.len(), fiber: q.y.len(), dim: self.n });
        }
        Ok(q.stacked())
    }

    /// `g̃_{AB}` at `q`.
    pub fn metric_at(&self, q: &BundlePoint) -> Result<DMatrix<f64>> {
        let z = self.point(q)?;
        self.eval_matrix(&self.metric, &z)
    }

    pub fn jet_at(&self, q: &BundlePoint) -> Result<InducedJet> {
        let z = self.point(q)?;
        let m = 2 * self.n;
        let metric = self.eval_matrix(&self.metric, &z)?;
        let det = metric.determinant();
        if det.abs() <= DET_FLOOR {
            return Err(OracleError::SingularInducedMetric { det });
        }
        let metric_inv = metric.clone().try_inverse().ok_or(OracleError::SingularInducedMetric { det })?;
        let d_metric = self.eval_cube(&self.d_metric, &z)?;
        let christoffel = christoffel_from(&metric_inv, &d_metric);
        debug_assert_eq!(christoffel.dim(), m);
        Ok(InducedJet {
            q: q.clone(),
            metric,
            metric_inv,
            d_metric,
            christoffel,
            frame: self.eval_matrix(&self.frame, &z)?,
            coframe: self.eval_matrix(&self.coframe, &z)?,
            d_frame: self.eval_cube(&self.d_frame, &z)?,
        })
    }

    fn lift(&self, field: &str, kind: LiftKind) -> Result<&CompiledLift> {
        let (_, lifts) = self.lifts.iter().find(|(name, _)| name == field).ok_or_else(|| OracleError::UnknownField(field.to_string()))?;
        Ok(&lifts[kind as usize])
    }

    /// Induced components `X̃^A` and partials `∂_K X̃^A` at `[(A, K)]`.
    pub fn lift_at(&self, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let lift = self.lift(field, kind)?;
        let z = self.point(q)?;
        let comps = lift.comps.iter().map(|e| self.eval(e, &z)).collect::<Result<Vec<_>>>()?;
        Ok((comps, self.eval_matrix(&lift.d, &z)?))
    }

    pub fn levi_civita_induced(&self, q: &BundlePoint) -> Result<Tensor3> {
        Ok(self.jet_at(q)?.christoffel)
    }

    pub fn connection_adapted(&self, q: &BundlePoint) -> Result<BundleConnection> {
        Ok(connection_to_adapted(&self.jet_at(q)?))
    }

    pub fn lie_derivative_induced(&self, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<Block2Tensor> {
        let jet = self.jet_at(q)?;
        let (x, dx) = self.lift_at(field, kind, q)?;
        Ok(lie_derivative(&jet, &x, &dx))
    }

    /// Lie derivative moved to the adapted frame, `EᵀLE`.
    pub fn lie_derivative_adapted(&self, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<Block2Tensor> {
        let jet = self.jet_at(q)?;
        let (x, dx) = self.lift_at(field, kind, q)?;
        Ok(covariant_to_adapted(&jet, &lie_derivative(&jet, &x, &dx)))
    }

    /// `∇_B X̃^A` in induced coordinates, rows `A`, columns `B`.
    pub fn cov_deriv_induced(&self, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<Block2Tensor> {
        let jet = self.jet_at(q)?;
        let (x, dx) = self.lift_at(field, kind, q)?;
        Ok(cov_deriv(&jet, &x, &dx))
    }

    /// `C^α_A (∇_B X̃^A) E^B_γ`, rows `α`, columns `γ`.
    pub fn cov_deriv_adapted(&self, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<Block2Tensor> {
        let jet = self.jet_at(q)?;
        let (x, dx) = self.lift_at(field, kind, q)?;
        let m = cov_deriv(&jet, &x, &dx).to_matrix();
        let adapted = &jet.coframe * m * &jet.frame;
        Ok(Block2Tensor::from_matrix(Frame::Adapted, Variance::Mixed, &adapted))
    }

    /// Coordinate covariant derivative `∇_K g̃_{AB}` at `[(K, A, B)]`.
    pub fn metric_compatibility(&self, q: &BundlePoint) -> Result<Tensor3> {
        let jet = self.jet_at(q)?;
        let m = 2 * self.n;
        let (g, gam) = (&jet.metric, &jet.christoffel);
        Ok(Tensor3::from_fn(m, |k, a, b| {
            let mut v = jet.d_metric[(a, b, k)];
            for d in 0..m {
                v -= gam[(d, k, a)] * g[(d, b)] + gam[(d, k, b)] * g[(a, d)];
            }
            v
        }))
    }

    fn check_stencil(&self, q: &BundlePoint, h: f64) -> Result<()> {
        let coords = self.symbols.names();
        let slots = q.x.iter().zip(&self.base_domain).chain(q.y.iter().zip(&self.fiber_domain));
        for (k, (&v, iv)) in slots.enumerate() {
            if v - h < iv.lo || v + h > iv.hi {
                return Err(OracleError::StencilOutsideDomain { coord: coords[k].clone(), value: v, h, lo: iv.lo, hi: iv.hi });
            }
        }
        Ok(())
    }
}

pub fn levi_civita_induced(spec: &ManifoldSpec, q: &BundlePoint) -> Result<Tensor3> {
    Oracle::new(spec).levi_civita_induced(q)
}

pub fn lie_derivative_induced(spec: &ManifoldSpec, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<Block2Tensor> {
    Oracle::new(spec).lie_derivative_induced(field, kind, q)
}

/// Anholonomic change of frame of the induced Levi-Civita coefficients.
pub fn connection_to_adapted(jet: &InducedJet) -> BundleConnection {
    let m = jet.frame.nrows();
    let (e, c, gam) = (&jet.frame, &jet.coframe, &jet.christoffel);
    // ∂_{e_γ} E^c_β = E^B_γ ∂_B E^c_β
    let full = Tensor3::from_fn(m, |a, g, b| {
        let mut v = 0.0;
        for cc in 0..m {
            if c[(a, cc)] == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for bb in 0..m {
                let egb = e[(bb, g)];
                if egb == 0.0 {
                    continue;
                }
                inner += egb * jet.d_frame[(cc, b, bb)];
                for d in 0..m {
                    inner += egb * e[(d, b)] * gam[(cc, bb, d)];
                }
            }
            v += c[(a, cc)] * inner;
        }
        v
    });
    BundleConnection::from_full(&full)
}

fn lie_derivative(jet: &InducedJet, x: &[f64], dx: &DMatrix<f64>) -> Block2Tensor {
    let m = jet.metric.nrows();
    let g = &jet.metric;
    let l = DMatrix::from_fn(m, m, |a, b| {
        let mut v = 0.0;
        for c in 0..m {
            v += x[c] * jet.d_metric[(a, b, c)] + g[(c, b)] * dx[(c, a)] + g[(a, c)] * dx[(c, b)];
        }
        v
    });
    Block2Tensor::from_matrix(Frame::Induced, Variance::Covariant, &l)
}

fn cov_deriv(jet: &InducedJet, x: &[f64], dx: &DMatrix<f64>) -> Block2Tensor {
    let m = jet.metric.nrows();
    let d = DMatrix::from_fn(m, m, |a, b| dx[(a, b)] + (0..m).map(|c| jet.christoffel[(a, b, c)] * x[c]).sum::<f64>());
    Block2Tensor::from_matrix(Frame::Induced, Variance::Mixed, &d)
}

/// `T_{αβ} = E^A_α E^B_β T_{AB}` for a covariant induced tensor.
pub fn covariant_to_adapted(jet: &InducedJet, t: &Block2Tensor) -> Block2Tensor {
    assert_eq!((t.frame, t.variance), (Frame::Induced, Variance::Covariant));
    let adapted = jet.frame.transpose() * t.to_matrix() * &jet.frame;
    Block2Tensor::from_matrix(Frame::Adapted, Variance::Covariant, &adapted)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdQuantity {
    Christoffel,
    Riemann,
    LeviCivitaInduced,
}

impl FdQuantity {
    pub fn name(self) -> &'static str {
        match self {
            FdQuantity::Christoffel => "christoffel",
            FdQuantity::Riemann => "riemann",
            FdQuantity::LeviCivitaInduced => "levi_civita_induced",
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct FdAudit {
    pub quantity: FdQuantity,
    pub h: f64,
    pub max_deviation: f64,
    pub max_abs_exact: f64,
}

fn central<T>(x: &[f64], k: usize, h: f64, f: impl Fn(&[f64]) -> Result<T>) -> Result<(T, T)> {
    let mut up = x.to_vec();
    let mut dn = x.to_vec();
    up[k] += h;
    dn[k] -= h;
    Ok((f(&up)?, f(&dn)?))
}

/// Recomputes `quantity` with its exact partial derivatives replaced by
/// central differences of step `h` and reports the largest deviation.
///
/// For `christoffel` the partials are `∂g`; for `riemann` they are `∂Γ`
/// (with `Γ` itself exact); for `levi_civita_induced` they are `∂g̃` in all
/// `2n` directions.
pub fn finite_difference_audit(spec: &ManifoldSpec, oracle: &Oracle, quantity: FdQuantity, q: &BundlePoint, h: f64) -> Result<FdAudit> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(OracleError::StepOutOfRange { h });
    }
    oracle.check_stencil(q, h)?;
    let n = spec.dim();
    let x = &q.x;
    let (exact, approx) = match quantity {
        FdQuantity::Christoffel => {
            let mut dg = Tensor3::zeros(n);
            for c in 0..n {
                let (gu, gd) = central(x, c, h, |p| Ok(spec.metric_at(p)?))?;
                for a in 0..n {
                    for b in 0..n {
                        dg[(a, b, c)] = (gu[(a, b)] - gd[(a, b)]) / (2.0 * h);
                    }
                }
            }
            let approx = christoffel_from(&spec.inverse_metric_at(x)?, &dg);
            (spec.christoffel_at(x)?.as_slice().to_vec(), approx.as_slice().to_vec())
        }
        FdQuantity::Riemann => {
            let gamma = spec.christoffel_at(x)?;
            let mut d_gamma = Tensor4::zeros(n);
            for k in 0..n {
                let (gu, gd) = central(x, k, h, |p| Ok(spec.christoffel_at(p)?))?;
                for a in 0..n {
                    for j in 0..n {
                        for i in 0..n {
                            d_gamma[(a, j, i, k)] = (gu[(a, j, i)] - gd[(a, j, i)]) / (2.0 * h);
                        }
                    }
                }
            }
            let approx = riemann_from(&gamma, &d_gamma);
            (spec.riemann_at(x)?.as_slice().to_vec(), approx.as_slice().to_vec())
        }
        FdQuantity::LeviCivitaInduced => {
            let jet = oracle.jet_at(q)?;
            let m = 2 * n;
            let z = q.stacked();
            let mut dg = Tensor3::zeros(m);
            for k in 0..m {
                let (gu, gd) = central(&z, k, h, |p| oracle.metric_at(&BundlePoint::from_stacked(p)))?;
                for a in 0..m {
                    for b in 0..m {
                        dg[(a, b, k)] = (gu[(a, b)] - gd[(a, b)]) / (2.0 * h);
                    }
                }
            }
            let approx = christoffel_from(&jet.metric_inv, &dg);
            (jet.christoffel.as_slice().to_vec(), approx.as_slice().to_vec())
        }
    };
    Ok(FdAudit { quantity, h, max_deviation: crate::tensor::max_abs_diff(&exact, &approx), max_abs_exact: crate::tensor::max_abs(&exact) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Interval;

    fn spec(metric: [&str; 3], fields: &[(&str, [&str; 2])]) -> ManifoldSpec {
        let mut b = ManifoldSpec::builder("t", &["u", "v"]).unwrap();
        b.metric(0, 0, metric[0]).unwrap().metric(0, 1, metric[1]).unwrap().metric(1, 1, metric[2]).unwrap();
        for (name, comps) in fields {
            b.vector_field(name, comps).unwrap();
        }
        b.base_domain(vec![Interval::new(0.5, 1.5), Interval::new(-1.0, 1.0)]);
        b.build().unwrap()
    }

    fn q(x: [f64; 2], y: [f64; 2]) -> BundlePoint {
        BundlePoint::new(x.to_vec(), y.to_vec())
    }

    #[test]
    fn symbolic_inverse_matches_numeric() {
        let s = spec(["1 + u^2", "u*v", "2 + sin(v)"], &[]);
        let g: Vec<Trees> = (0..2).map(|j| (0..2).map(|i| Arc::clone(s.metric_expr(j, i))).collect()).collect();
        let inv = sym_inverse(&g);
        let x = [0.8, 0.3];
        let num = s.inverse_metric_at(&x).unwrap();
        for h in 0..2 {
            for k in 0..2 {
                assert!((inv[h][k].eval_at(&x).unwrap() - num[(h, k)]).abs() < 1e-14);
            }
        }
        let m3: Vec<Trees> =
            [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]].iter().map(|r| r.iter().map(|&v| Expr::num(v)).collect()).collect();
        let inv3 = sym_inverse(&m3);
        let num3 = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]).try_inverse().unwrap();
        for h in 0..3 {
            for k in 0..3 {
                assert!((inv3[h][k].as_num().unwrap() - num3[(h, k)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn flat_oracle_is_zero() {
        let s = spec(["1", "0", "1"], &[("t", ["1", "0"])]);
        let o = Oracle::new(&s);
        let p = q([1.0, 0.0], [0.3, -0.2]);
        assert_eq!(o.levi_civita_induced(&p).unwrap().max_abs(), 0.0);
        for kind in LiftKind::ALL {
            assert_eq!(o.lie_derivative_induced("t", kind, &p).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn induced_connection_is_symmetric_and_compatible() {
        let s = spec(["1 + u^2", "u*v", "2 + sin(v)"], &[]);
        let o = Oracle::new(&s);
        let p = q([0.9, 0.4], [0.7, -1.1]);
        let gam = o.levi_civita_induced(&p).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    assert_eq!(gam[(a, b, c)], gam[(a, c, b)]);
                }
            }
        }
        assert!(o.metric_compatibility(&p).unwrap().max_abs() <= 1e-9);
    }

    #[test]
    fn lie_derivative_is_symmetric() {
        let s = spec(["1 + u^2", "u*v", "2 + sin(v)"], &[("w", ["v", "u^2"])]);
        let o = Oracle::new(&s);
        let p = q([0.9, 0.4], [0.7, -1.1]);
        for kind in LiftKind::ALL {
            let m = o.lie_derivative_induced("w", kind, &p).unwrap().to_matrix();
            assert!((&m - m.transpose()).abs().max() <= 1e-12);
        }
        assert!(matches!(o.lie_derivative_induced("nope", LiftKind::Vertical, &p), Err(OracleError::UnknownField(_))));
    }

    #[test]
    fn fd_audit_guards() {
        let s = spec(["1", "0", "u^2"], &[]);
        let o = Oracle::new(&s);
        let p = q([1.0, 0.0], [0.0, 0.0]);
        assert!(matches!(finite_difference_audit(&s, &o, FdQuantity::Christoffel, &p, 1e-2), Err(OracleError::StepOutOfRange { .. })));
        let edge = q([0.50001, 0.0], [0.0, 0.0]);
        assert!(matches!(
            finite_difference_audit(&s, &o, FdQuantity::Christoffel, &edge, 1e-4),
            Err(OracleError::StencilOutsideDomain { .. })
        ));
        let a = finite_difference_audit(&s, &o, FdQuantity::LeviCivitaInduced, &p, 1e-4).unwrap();
        assert!(a.max_deviation < 1e-6);
    }
}
