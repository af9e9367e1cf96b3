//! Covariant derivatives, rotations and Lie derivatives of the three lifts,
//! and empirical audits of the parallelism and Killing theorems.
//!
//! Every closed form exists in two transcriptions, selected by [`Reading`]:
//!
//! - `Corrected`: derived from the connection table, the adapted lift
//!   components and the generic rule `∇̃_γ X̃^α = e_γ X̃^α + Γ̃^α_{γβ} X̃^β`.
//!   These agree with the generic assembly and with the induced-coordinate
//!   oracle.
//! - `Uncorrected`: the classical block formulas with their index placements
//!   and signs taken literally. Their deviation from `Corrected` is reported
//!   in every classification and never used for a verdict.
//!
//! Shorthand used below (all at one bundle point, `ρ^h_{ji} = y^s R^h_{sji}`):
//!
//! ```text
//! N^h_i = ∇_i X^h            Y^h = y^l ∇_l X^h          W^h_i = y^l ∇_i ∇_l X^h
//! a^h_i = ρ^h_{ji} X^j       b^h_i = ρ^h_{ij} X^j       c^h_i = ρ^h_{ji} Y^j
//! low(M)_{ij} = g_{jh} M^h_i  (n = low N, w = low W, A = low a, C = low c)
//! P_{ij} = R_{msij} X^m y^s   (low b = −P)
//! ```
//!
//! Mixed blocks are indexed `[(α, γ)]` (upper index first); covariant blocks
//! `[(first, second)]`, e.g. the `bf` block of a rotation holds
//! `∇̃_i X̃_{j̄} − ∇̃_{j̄} X̃_i`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bundle::{Block2Tensor, BundleError, BundleJet, BundlePoint, Frame, LiftKind, Variance};
use crate::geometry::{FieldJet, GeometryError, ManifoldSpec};
use crate::oracle::{Oracle, OracleError};
use crate::report::EqTag;
use crate::sampling::sample_bundle;
use crate::tensor::matrix_max_abs;

/// A residual `r` at input scale `s` counts as zero when `r ≤ ZERO_RTOL·(1 + s)`.
pub const ZERO_RTOL: f64 = 1e-9;

/// Largest tolerated disagreement between the adapted-frame closed forms and
/// the oracle before an audit is declared inconclusive.
pub const ENGINE_TOL: f64 = 1e-8;

pub fn is_zero(residual: f64, scale: f64) -> bool {
    residual <= ZERO_RTOL * (1.0 + scale)
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum KillingError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("sample count must be at least 1")]
    NoSamples,
}

pub type Result<T, E = KillingError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reading {
    Corrected,
    Uncorrected,
}

impl fmt::Display for Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reading::Corrected => "corrected",
            Reading::Uncorrected => "uncorrected",
        })
    }
}

/// Equation tags of the covariant-derivative, rotation and Lie blocks.
pub fn tags(kind: LiftKind) -> (EqTag, EqTag, EqTag) {
    match kind {
        LiftKind::Vertical => (EqTag::E7, EqTag::E11, EqTag::E15),
        LiftKind::Complete => (EqTag::E8, EqTag::E12, EqTag::E16),
        LiftKind::Horizontal => (EqTag::E9, EqTag::E13, EqTag::E17),
    }
}

/// All inputs of the closed forms at one bundle point.
#[derive(Clone, Debug)]
pub struct LiftPoint {
    pub jet: BundleJet,
    pub field: FieldJet,
    nab: DMatrix<f64>,
    w: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    /// `ρ^h_{ij} Y^j`, used only by the uncorrected complete-lift blocks.
    b_y: DMatrix<f64>,
    nl: DMatrix<f64>,
    wl: DMatrix<f64>,
    al: DMatrix<f64>,
    cl: DMatrix<f64>,
    p: DMatrix<f64>,
    /// `y^l (∇_i∇_l X_j − ∇_l∇_i X_j)`
    comm: DMatrix<f64>,
    /// `ρ^h_{ij} g_{hm} Y^m`
    q: DMatrix<f64>,
}

impl LiftPoint {
    pub fn new(spec: &ManifoldSpec, field: &str, q: &BundlePoint) -> Result<LiftPoint> {
        let jet = BundleJet::at(spec, q)?;
        let f = FieldJet::at(spec, &jet.base, spec.field(field)?, &q.x)?;
        Ok(LiftPoint::from_jets(jet, f))
    }

    pub fn from_jets(jet: BundleJet, field: FieldJet) -> LiftPoint {
        let n = jet.dim();
        let g = &jet.base.g;
        let y = &jet.q.y;
        let rho = &jet.rho;
        let x = &field.x;
        let nab = field.nabla.clone();
        let yv: Vec<f64> = (0..n).map(|h| (0..n).map(|l| nab[(h, l)] * y[l]).sum()).collect();
        let w = DMatrix::from_fn(n, n, |h, i| (0..n).map(|l| field.nabla2[(h, i, l)] * y[l]).sum());
        let a = DMatrix::from_fn(n, n, |h, i| (0..n).map(|j| rho[(h, j, i)] * x[j]).sum());
        let b = DMatrix::from_fn(n, n, |h, i| (0..n).map(|j| rho[(h, i, j)] * x[j]).sum());
        let c = DMatrix::from_fn(n, n, |h, i| (0..n).map(|j| rho[(h, j, i)] * yv[j]).sum());
        let b_y = DMatrix::from_fn(n, n, |h, i| (0..n).map(|j| rho[(h, i, j)] * yv[j]).sum());
        let low = |m: &DMatrix<f64>| (g * m).transpose();
        let r_low = jet.base.riemann_lowered();
        let p = DMatrix::from_fn(n, n, |i, j| {
            let mut v = 0.0;
            for m in 0..n {
                for s in 0..n {
                    v += r_low[(m, s, i, j)] * x[m] * y[s];
                }
            }
            v
        });
        let nn_low = field.nabla2_lowered(&jet.base); // [(i, l, j)]
        let wl = low(&w);
        let comm = DMatrix::from_fn(n, n, |i, j| wl[(i, j)] - (0..n).map(|l| y[l] * nn_low[(l, i, j)]).sum::<f64>());
        let yl: Vec<f64> = (0..n).map(|h| (0..n).map(|m| g[(h, m)] * yv[m]).sum()).collect();
        let q = DMatrix::from_fn(n, n, |i, j| (0..n).map(|h| rho[(h, i, j)] * yl[h]).sum());
        LiftPoint { nl: low(&nab), al: low(&a), cl: low(&c), wl, nab, w, a, b, c, b_y, p, comm, q, jet, field }
    }

    pub fn dim(&self) -> usize {
        self.jet.dim()
    }

    pub fn point(&self) -> &BundlePoint {
        &self.jet.q
    }

    /// Magnitude of the inputs entering the closed forms, for [`is_zero`].
    pub fn scale(&self) -> f64 {
        [&self.jet.base.g, &self.nab, &self.w, &self.a, &self.b, &self.c, &self.p]
            .into_iter()
            .map(matrix_max_abs)
            .chain(self.field.x.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }

    /// Base-side magnitudes: `(|X|, |∇X|, |∇∇X|)` maxima.
    pub fn base_scale(&self) -> f64 {
        let xs = self.field.x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        xs.max(matrix_max_abs(&self.nab)).max(self.field.nabla2.max_abs()).max(matrix_max_abs(&self.jet.base.g))
    }

    /// `∇_i X_j + ∇_j X_i`.
    pub fn base_killing(&self) -> DMatrix<f64> {
        &self.nl + self.nl.transpose()
    }

    /// `∇_i X_j − ∇_j X_i`.
    pub fn base_rotation(&self) -> DMatrix<f64> {
        &self.nl - self.nl.transpose()
    }

    pub fn base_nabla(&self) -> &DMatrix<f64> {
        &self.nab
    }

    pub fn base_nabla2_max(&self) -> f64 {
        self.field.nabla2.max_abs()
    }

    /// Closed-form `∇̃_γ X̃^α`, rows `α`, columns `γ`.
    pub fn cov_deriv(&self, kind: LiftKind, reading: Reading) -> Block2Tensor {
        let n = self.dim();
        let z = DMatrix::zeros(n, n);
        let (nab, w, a, b, c) = (&self.nab, &self.w, &self.a, &self.b, &self.c);
        let (bb, bf, fb, ff) = match (kind, reading) {
            (LiftKind::Vertical, Reading::Corrected) => (-0.5 * a, z.clone(), nab + 0.5 * a, z),
            (LiftKind::Vertical, Reading::Uncorrected) => (-0.5 * b, z.clone(), nab + 0.5 * b, z),
            (LiftKind::Complete, Reading::Corrected) => (nab - 0.5 * (a + b) - 0.5 * c, -0.5 * b, w + b + 0.5 * c, nab + 0.5 * b),
            (LiftKind::Complete, Reading::Uncorrected) => {
                let by = &self.b_y;
                (nab - 0.5 * (a + b) - 0.5 * by, -0.5 * a, w + b + 0.5 * by, nab + 0.5 * a)
            }
            (LiftKind::Horizontal, Reading::Corrected) => (nab - 0.5 * (a + b), -0.5 * b, b.clone(), 0.5 * b),
            (LiftKind::Horizontal, Reading::Uncorrected) => (nab - 0.5 * (a + b), -0.5 * a, a.clone(), 0.5 * a),
        };
        Block2Tensor::from_blocks(Frame::Adapted, Variance::Mixed, bb, bf, fb, ff)
    }

    /// `∇̃_γ X̃^α = e_γ(X̃^α) + Γ̃^α_{γβ} X̃^β` with the connection table and
    /// exact partials of the adapted lift components.
    pub fn cov_deriv_assembly(&self, kind: LiftKind) -> Block2Tensor {
        let n = self.dim();
        let m = 2 * n;
        let f = &self.field;
        let y = &self.jet.q.y;
        // jac[(α, B)] = ∂_B X̃^α
        let mut jac = DMatrix::zeros(m, m);
        for h in 0..n {
            for k in 0..n {
                match kind {
                    LiftKind::Vertical => jac[(n + h, k)] = f.dx[(h, k)],
                    LiftKind::Complete => {
                        jac[(h, k)] = f.dx[(h, k)];
                        jac[(n + h, k)] = (0..n).map(|l| y[l] * f.d_nabla[(h, l, k)]).sum();
                        jac[(n + h, n + k)] = f.nabla[(h, k)];
                    }
                    LiftKind::Horizontal => jac[(h, k)] = f.dx[(h, k)],
                }
            }
        }
        let frames = self.jet.frames();
        let derivative = jac * &frames.frame;
        let lift = self.jet.lift_vector(f, kind, Frame::Adapted).stacked();
        let conn = self.jet.connection().to_full();
        let d = DMatrix::from_fn(m, m, |a, g| derivative[(a, g)] + (0..m).map(|b| conn[(a, g, b)] * lift[b]).sum::<f64>());
        Block2Tensor::from_matrix(Frame::Adapted, Variance::Mixed, &d)
    }

    /// `∇̃_γ X̃_α = g̃_{αμ} ∇̃_γ X̃^μ` as a covariant tensor with rows `γ`.
    pub fn lowered(&self, cov: &Block2Tensor) -> Block2Tensor {
        let g = self.jet.metric_adapted().to_matrix();
        let l = (g * cov.to_matrix()).transpose();
        Block2Tensor::from_matrix(Frame::Adapted, Variance::Covariant, &l)
    }

    /// `∇̃_α X̃_β − ∇̃_β X̃_α` in closed form.
    pub fn rotation(&self, kind: LiftKind, reading: Reading) -> Block2Tensor {
        let n = self.dim();
        let z = DMatrix::zeros(n, n);
        let (nl, wl, al, cl, p) = (&self.nl, &self.wl, &self.al, &self.cl, &self.p);
        let anti_n = nl - nl.transpose();
        let anti_p = p - p.transpose();
        let (bb, bf, fb, ff) = match (kind, reading) {
            (LiftKind::Vertical, Reading::Corrected) => (&anti_n + al, nl.clone(), -nl.transpose(), z),
            (LiftKind::Vertical, Reading::Uncorrected) => (&anti_n - &anti_p, anti_n.clone(), z.clone(), z),
            (LiftKind::Complete, Reading::Corrected) => {
                let bf = &anti_n + wl - 0.5 * al - 0.5 * &anti_p;
                (wl - wl.transpose() - &anti_p + cl, bf.clone(), -bf.transpose(), anti_n)
            }
            (LiftKind::Complete, Reading::Uncorrected) => {
                let comm = &self.comm;
                let qm = &self.q;
                (comm + (qm.transpose() - qm) + &anti_p, &anti_n + comm, -0.5 * &anti_p, z)
            }
            (LiftKind::Horizontal, Reading::Corrected) => {
                let bf = nl - 0.5 * al - 0.5 * &anti_p;
                (-&anti_p, bf.clone(), -bf.transpose(), z)
            }
            (LiftKind::Horizontal, Reading::Uncorrected) => (anti_p.clone(), &anti_n - 0.5 * &anti_p, 0.5 * &anti_p, z),
        };
        Block2Tensor::from_blocks(Frame::Adapted, Variance::Covariant, bb, bf, fb, ff)
    }

    /// `∇̃_α X̃_β + ∇̃_β X̃_α = (L_X̃ g̃)_{αβ}` in closed form.
    pub fn lie(&self, kind: LiftKind, reading: Reading) -> Block2Tensor {
        let n = self.dim();
        let z = DMatrix::zeros(n, n);
        let (nl, wl, al, p) = (&self.nl, &self.wl, &self.al, &self.p);
        let k = nl + nl.transpose();
        let sym_p = p + p.transpose();
        let (bb, bf, fb, ff) = match (kind, reading) {
            (LiftKind::Vertical, Reading::Corrected) => (k.clone(), nl.clone(), nl.transpose(), z),
            (LiftKind::Vertical, Reading::Uncorrected) => (k.clone(), k, z.clone(), z),
            (LiftKind::Complete, Reading::Corrected) => {
                let bf = &k + wl - 0.5 * al - 0.5 * &sym_p;
                (wl + wl.transpose() - &sym_p, bf.clone(), bf.transpose(), k)
            }
            (LiftKind::Complete, Reading::Uncorrected) => (wl + &sym_p, &k + wl + wl.transpose(), -0.5 * &sym_p, z),
            (LiftKind::Horizontal, Reading::Corrected) => {
                let bf = nl - 0.5 * al - 0.5 * &sym_p;
                (-&sym_p, bf.clone(), bf.transpose(), z)
            }
            (LiftKind::Horizontal, Reading::Uncorrected) => (sym_p.clone(), &k + 0.5 * &sym_p, -0.5 * &sym_p, z),
        };
        Block2Tensor::from_blocks(Frame::Adapted, Variance::Covariant, bb, bf, fb, ff)
    }

    /// `y^l ∇_i∇_l X_j + (R_{hsij} + R_{hsji}) X^h y^s` as stated before the
    /// Killing theorem.
    pub fn killing_identity_stated(&self) -> DMatrix<f64> {
        &self.wl + &self.p + self.p.transpose()
    }

    /// `y^l (∇_i∇_l X_j + ∇_j∇_l X_i) − (R_{hsij} + R_{hsji}) X^h y^s`, the
    /// symmetric identity that does follow from the Killing equation.
    pub fn killing_identity_symmetric(&self) -> DMatrix<f64> {
        &self.wl + self.wl.transpose() - &self.p - self.p.transpose()
    }
}

pub fn cov_deriv_lift(spec: &ManifoldSpec, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<Block2Tensor> {
    Ok(LiftPoint::new(spec, field, q)?.cov_deriv(kind, Reading::Corrected))
}

pub fn rotation_lift(spec: &ManifoldSpec, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<Block2Tensor> {
    Ok(LiftPoint::new(spec, field, q)?.rotation(kind, Reading::Corrected))
}

pub fn lie_derivative_lift(spec: &ManifoldSpec, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<Block2Tensor> {
    Ok(LiftPoint::new(spec, field, q)?.lie(kind, Reading::Corrected))
}

/// Per-block maxima of `|·|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub bb: f64,
    pub bf: f64,
    pub fb: f64,
    pub ff: f64,
}

impl BlockSummary {
    pub fn of(t: &Block2Tensor) -> Self {
        BlockSummary { bb: matrix_max_abs(&t.bb), bf: matrix_max_abs(&t.bf), fb: matrix_max_abs(&t.fb), ff: matrix_max_abs(&t.ff) }
    }

    pub fn merge(self, o: BlockSummary) -> Self {
        BlockSummary { bb: self.bb.max(o.bb), bf: self.bf.max(o.bf), fb: self.fb.max(o.fb), ff: self.ff.max(o.ff) }
    }

    pub fn max(&self) -> f64 {
        self.bb.max(self.bf).max(self.fb).max(self.ff)
    }

    pub fn blocks(&self) -> [(&'static str, f64); 4] {
        [("bb", self.bb), ("bf", self.bf), ("fb", self.fb), ("ff", self.ff)]
    }
}

/// One equation evaluated at every sample point.
#[derive(Clone, Debug)]
pub struct EquationSeries {
    pub tag: EqTag,
    pub values: Vec<Block2Tensor>,
    pub summary: BlockSummary,
}

impl EquationSeries {
    fn new(tag: EqTag, values: Vec<Block2Tensor>) -> Self {
        let summary = values.iter().map(BlockSummary::of).fold(BlockSummary::default(), BlockSummary::merge);
        EquationSeries { tag, values, summary }
    }

    /// Index of the sample with the largest entry.
    pub fn argmax(&self) -> usize {
        let mut best = (0, -1.0);
        for (k, v) in self.values.iter().enumerate() {
            let m = v.max_abs();
            if m > best.1 {
                best = (k, m);
            }
        }
        best.0
    }
}

/// Difference between an uncorrected block formula and its corrected form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub tag: EqTag,
    pub kind: LiftKind,
    pub block: String,
    pub max_deviation: f64,
}

/// Results for one lift kind of one field over the sample set.
#[derive(Clone, Debug)]
pub struct LiftAnalysis {
    pub field: String,
    pub kind: LiftKind,
    pub covariant: EquationSeries,
    pub rotation: EquationSeries,
    pub lie: EquationSeries,
    /// Max `|closed form − generic assembly|` for `∇̃X̃`.
    pub assembly_residual: f64,
    /// Max `|closed form − oracle|` for `∇̃X̃` and `L_X̃ g̃`.
    pub oracle_cov_residual: f64,
    pub oracle_lie_residual: f64,
    /// Oracle maxima of `|∇̃X̃|` and `|L_X̃ g̃|`.
    pub oracle_cov_max: f64,
    pub oracle_lie_max: f64,
    /// Largest per-point input scale.
    pub scale: f64,
    pub parallel: bool,
    pub killing: bool,
    pub oracle_parallel: bool,
    pub oracle_killing: bool,
    pub corrections: Vec<Correction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub max_abs: f64,
    pub scale: f64,
    pub holds: bool,
}

impl Predicate {
    fn from_samples(samples: impl IntoIterator<Item = (f64, f64)>) -> Predicate {
        let mut p = Predicate { max_abs: 0.0, scale: 0.0, holds: true };
        for (r, s) in samples {
            p.max_abs = p.max_abs.max(r);
            p.scale = p.scale.max(s);
            p.holds &= is_zero(r, s);
        }
        p
    }
}

/// Base-manifold predicates measured over the sample set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasePredicates {
    /// `∇_i X_j + ∇_j X_i = 0`
    pub killing: Predicate,
    /// `∇X = 0`
    pub parallel: Predicate,
    /// `∇∇X = 0`
    pub second_parallel: Predicate,
    /// `∇_i X_j − ∇_j X_i = 0`
    pub closed: Predicate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    T1,
    T2a,
    T2b,
}

impl TheoremId {
    pub fn tag(self) -> EqTag {
        match self {
            TheoremId::T1 => EqTag::T1,
            TheoremId::T2a => EqTag::T2a,
            TheoremId::T2b => EqTag::T2b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    CounterexampleCandidate,
    /// The two engines disagree on the bundle-side predicate.
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "consistent",
            Verdict::CounterexampleCandidate => "counterexample-candidate",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: BundlePoint,
    /// Bundle-side residual at the witness point.
    pub residual: f64,
    pub oracle_residual: f64,
}

/// "hypothesis on M ⟺ conclusion on T(M)", checked at sample resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremAudit {
    pub theorem: TheoremId,
    pub kind: LiftKind,
    pub base_killing: bool,
    pub base_parallel: bool,
    pub base_second_parallel: bool,
    pub hypothesis: bool,
    /// `parallel` for T1, `killing` otherwise.
    pub conclusion: bool,
    pub oracle_conclusion: bool,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub zero_rtol: f64,
    pub engine_tol: f64,
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub field: String,
    pub points: Vec<BundlePoint>,
    pub base: BasePredicates,
    pub analyses: Vec<LiftAnalysis>,
    pub audits: Vec<TheoremAudit>,
}

impl Classification {
    pub fn analysis(&self, kind: LiftKind) -> &LiftAnalysis {
        self.analyses.iter().find(|a| a.kind == kind).expect("every kind is analysed")
    }
}

fn corrections(points: &[LiftPoint], kind: LiftKind) -> Vec<Correction> {
    let (e_cov, e_rot, e_lie) = tags(kind);
    let mut out = Vec::new();
    type Eval = fn(&LiftPoint, LiftKind, Reading) -> Block2Tensor;
    let evals: [(EqTag, Eval); 3] = [(e_cov, LiftPoint::cov_deriv), (e_rot, LiftPoint::rotation), (e_lie, LiftPoint::lie)];
    for (tag, eval) in evals {
        let mut dev = BlockSummary::default();
        let mut scale: f64 = 0.0;
        for p in points {
            let diff = eval(p, kind, Reading::Uncorrected).to_matrix() - eval(p, kind, Reading::Corrected).to_matrix();
            dev = dev.merge(BlockSummary::of(&Block2Tensor::from_matrix(Frame::Adapted, Variance::Mixed, &diff)));
            scale = scale.max(p.scale());
        }
        for (block, d) in dev.blocks() {
            if !is_zero(d, scale) {
                out.push(Correction { tag, kind, block: block.to_string(), max_deviation: d });
            }
        }
    }
    out
}

fn analyse_kind(oracle: &Oracle, field: &str, kind: LiftKind, points: &[LiftPoint]) -> Result<LiftAnalysis> {
    let (e_cov, e_rot, e_lie) = tags(kind);
    let mut cov = Vec::with_capacity(points.len());
    let mut rot = Vec::with_capacity(points.len());
    let mut lie = Vec::with_capacity(points.len());
    let (mut assembly, mut o_cov, mut o_lie, mut o_cov_max, mut o_lie_max, mut scale) =
        (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let (mut parallel, mut killing, mut o_parallel, mut o_killing) = (true, true, true, true);
    for p in points {
        let c = p.cov_deriv(kind, Reading::Corrected);
        let l = p.lie(kind, Reading::Corrected);
        let s = p.scale();
        scale = scale.max(s);
        assembly = assembly.max(c.max_abs_diff(&p.cov_deriv_assembly(kind))?);
        let oc = oracle.cov_deriv_adapted(field, kind, p.point())?;
        let ol = oracle.lie_derivative_adapted(field, kind, p.point())?;
        o_cov = o_cov.max(c.max_abs_diff(&oc)?);
        o_lie = o_lie.max(l.max_abs_diff(&ol)?);
        o_cov_max = o_cov_max.max(oc.max_abs());
        o_lie_max = o_lie_max.max(ol.max_abs());
        parallel &= is_zero(c.max_abs(), s);
        killing &= is_zero(l.max_abs(), s);
        o_parallel &= is_zero(oc.max_abs(), s);
        o_killing &= is_zero(ol.max_abs(), s);
        rot.push(p.rotation(kind, Reading::Corrected));
        cov.push(c);
        lie.push(l);
    }
    Ok(LiftAnalysis {
        field: field.to_string(),
        kind,
        covariant: EquationSeries::new(e_cov, cov),
        rotation: EquationSeries::new(e_rot, rot),
        lie: EquationSeries::new(e_lie, lie),
        assembly_residual: assembly,
        oracle_cov_residual: o_cov,
        oracle_lie_residual: o_lie,
        oracle_cov_max: o_cov_max,
        oracle_lie_max: o_lie_max,
        scale,
        parallel,
        killing,
        oracle_parallel: o_parallel,
        oracle_killing: o_killing,
        corrections: corrections(points, kind),
    })
}

fn base_predicates(points: &[LiftPoint]) -> BasePredicates {
    let collect = |f: &dyn Fn(&LiftPoint) -> f64| Predicate::from_samples(points.iter().map(|p| (f(p), p.base_scale())));
    BasePredicates {
        killing: collect(&|p| matrix_max_abs(&p.base_killing())),
        parallel: collect(&|p| matrix_max_abs(p.base_nabla())),
        second_parallel: collect(&|p| p.base_nabla2_max()),
        closed: collect(&|p| matrix_max_abs(&p.base_rotation())),
    }
}

fn audit(
    theorem: TheoremId,
    kind: LiftKind,
    base: &BasePredicates,
    analysis: &LiftAnalysis,
    points: &[LiftPoint],
    oracle: &Oracle,
) -> Result<TheoremAudit> {
    let hypothesis = match theorem {
        TheoremId::T1 => base.parallel.holds,
        TheoremId::T2a => base.killing.holds && base.parallel.holds,
        TheoremId::T2b => base.killing.holds && base.second_parallel.holds,
    };
    let (series, conclusion, oracle_conclusion) = match theorem {
        TheoremId::T1 => (&analysis.covariant, analysis.parallel, analysis.oracle_parallel),
        _ => (&analysis.lie, analysis.killing, analysis.oracle_killing),
    };
    let verdict = if hypothesis == conclusion {
        Verdict::Consistent
    } else if conclusion == oracle_conclusion && analysis.oracle_cov_residual.max(analysis.oracle_lie_residual) <= ENGINE_TOL {
        Verdict::CounterexampleCandidate
    } else {
        Verdict::Inconclusive
    };
    let witness = if verdict == Verdict::Consistent {
        None
    } else {
        // Conclusion failing: the sample with the largest bundle residual.
        // Hypothesis failing: the sample with the largest base residual.
        let k = if !conclusion {
            series.argmax()
        } else {
            let base_residual = |p: &LiftPoint| match theorem {
                TheoremId::T1 => matrix_max_abs(p.base_nabla()),
                TheoremId::T2a => matrix_max_abs(&p.base_killing()).max(matrix_max_abs(p.base_nabla())),
                TheoremId::T2b => matrix_max_abs(&p.base_killing()).max(p.base_nabla2_max()),
            };
            (0..points.len()).max_by(|&a, &b| base_residual(&points[a]).total_cmp(&base_residual(&points[b]))).unwrap_or(0)
        };
        let q = points[k].point();
        let oracle_residual = match theorem {
            TheoremId::T1 => oracle.cov_deriv_adapted(&analysis.field, kind, q)?.max_abs(),
            _ => oracle.lie_derivative_adapted(&analysis.field, kind, q)?.max_abs(),
        };
        Some(Witness { point: q.clone(), residual: series.values[k].max_abs(), oracle_residual })
    };
    Ok(TheoremAudit {
        theorem,
        kind,
        base_killing: base.killing.holds,
        base_parallel: base.parallel.holds,
        base_second_parallel: base.second_parallel.holds,
        hypothesis,
        conclusion,
        oracle_conclusion,
        verdict,
        witness,
        zero_rtol: ZERO_RTOL,
        engine_tol: ENGINE_TOL,
    })
}

/// Measures every base and bundle predicate for `field` on `count` seeded
/// bundle points and audits the theorems against them.
pub fn classify_field(spec: &ManifoldSpec, field: &str, count: usize, seed: u64) -> Result<Classification> {
    classify_with(spec, &Oracle::new(spec), field, count, seed)
}

pub fn classify_with(spec: &ManifoldSpec, oracle: &Oracle, field: &str, count: usize, seed: u64) -> Result<Classification> {
    if count == 0 {
        return Err(KillingError::NoSamples);
    }
    spec.field(field)?;
    let points = sample_bundle(spec, count, seed);
    let lift_points = points.iter().map(|q| LiftPoint::new(spec, field, q)).collect::<Result<Vec<_>>>()?;
    let base = base_predicates(&lift_points);
    let analyses = LiftKind::ALL.into_iter().map(|kind| analyse_kind(oracle, field, kind, &lift_points)).collect::<Result<Vec<_>>>()?;
    let mut audits = Vec::new();
    for a in &analyses {
        audits.push(audit(TheoremId::T1, a.kind, &base, a, &lift_points, oracle)?);
    }
    for (theorem, kind) in [(TheoremId::T2a, LiftKind::Complete), (TheoremId::T2b, LiftKind::Horizontal)] {
        let a = analyses.iter().find(|a| a.kind == kind).expect("analysed");
        audits.push(audit(theorem, kind, &base, a, &lift_points, oracle)?);
    }
    Ok(Classification { field: field.to_string(), points, base, analyses, audits })
}

/// Closedness conditions against the rotation of the complete lift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosednessReport {
    pub field: String,
    pub samples: usize,
    /// max `|∇_i X_j − ∇_j X_i|`
    pub antisymmetric_residual: f64,
    /// max `|∇_i ∇_l X_j|`
    pub second_derivative_residual: f64,
    pub rotation: BlockSummary,
    pub conditions_hold: bool,
    pub closed: bool,
    /// False only when the conditions hold but the rotation does not vanish.
    pub implication_holds: bool,
}

pub fn closedness_check(spec: &ManifoldSpec, field: &str, samples: &[BundlePoint]) -> Result<ClosednessReport> {
    if samples.is_empty() {
        return Err(KillingError::NoSamples);
    }
    let mut anti = Predicate { max_abs: 0.0, scale: 0.0, holds: true };
    let mut second = anti;
    let mut rotation = BlockSummary::default();
    let mut closed = true;
    for q in samples {
        let p = LiftPoint::new(spec, field, q)?;
        let (bs, s) = (p.base_scale(), p.scale());
        let r1 = matrix_max_abs(&p.base_rotation());
        let nn_low = p.field.nabla2_lowered(&p.jet.base);
        let r2 = nn_low.max_abs();
        anti = Predicate { max_abs: anti.max_abs.max(r1), scale: anti.scale.max(bs), holds: anti.holds && is_zero(r1, bs) };
        second = Predicate { max_abs: second.max_abs.max(r2), scale: second.scale.max(bs), holds: second.holds && is_zero(r2, bs) };
        let rot = p.rotation(LiftKind::Complete, Reading::Corrected);
        closed &= is_zero(rot.max_abs(), s);
        rotation = rotation.merge(BlockSummary::of(&rot));
    }
    let conditions_hold = anti.holds && second.holds;
    Ok(ClosednessReport {
        field: field.to_string(),
        samples: samples.len(),
        antisymmetric_residual: anti.max_abs,
        second_derivative_residual: second.max_abs,
        rotation,
        conditions_hold,
        closed,
        implication_holds: !conditions_hold || closed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Interval;

    fn flat() -> ManifoldSpec {
        let mut b = ManifoldSpec::builder("flat", &["x1", "x2"]).unwrap();
        b.metric(0, 0, "1").unwrap().metric(1, 1, "1").unwrap();
        b.vector_field("translation", &["1", "0"]).unwrap();
        b.vector_field("rotation", &["-x2", "x1"]).unwrap();
        b.vector_field("gradient", &["x1", "x2"]).unwrap();
        b.base_domain(vec![Interval::new(-2.0, 2.0); 2]);
        b.build().unwrap()
    }

    fn sphere() -> ManifoldSpec {
        let mut b = ManifoldSpec::builder("sphere", &["theta", "phi"]).unwrap();
        b.metric(0, 0, "1").unwrap().metric(1, 1, "sin(theta)^2").unwrap();
        b.vector_field("dphi", &["0", "1"]).unwrap();
        b.vector_field("rotx", &["-sin(phi)", "-cos(theta)/sin(theta)*cos(phi)"]).unwrap();
        b.vector_field("mixed", &["theta*phi", "cos(phi) + theta^2"]).unwrap();
        b.base_domain(vec![Interval::new(0.3, 2.8), Interval::new(-3.0, 3.0)]);
        b.build().unwrap()
    }

    fn pts() -> Vec<BundlePoint> {
        vec![
            BundlePoint::new(vec![0.5, 0.3], vec![0.7, -1.1]),
            BundlePoint::new(vec![1.4, -2.0], vec![-0.3, 0.4]),
            BundlePoint::new(vec![2.5, 1.0], vec![1.2, 0.9]),
        ]
    }

    #[test]
    fn flat_translation_is_parallel_everywhere() {
        let s = flat();
        for q in pts() {
            for kind in LiftKind::ALL {
                assert_eq!(cov_deriv_lift(&s, "translation", kind, &q).unwrap().max_abs(), 0.0);
                assert_eq!(lie_derivative_lift(&s, "translation", kind, &q).unwrap().max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn flat_rotation_vertical_blocks() {
        let s = flat();
        let c = cov_deriv_lift(&s, "rotation", LiftKind::Vertical, &pts()[0]).unwrap();
        assert_eq!(c.bb.abs().max(), 0.0);
        assert_eq!(c.fb, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let r = rotation_lift(&s, "rotation", LiftKind::Vertical, &pts()[0]).unwrap();
        // ∇_i X_j with ∇_1X_2 = 1, ∇_2X_1 = −1
        assert_eq!(r.bf, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn closed_forms_match_generic_assembly() {
        let s = sphere();
        for q in pts() {
            for f in ["dphi", "rotx", "mixed"] {
                let p = LiftPoint::new(&s, f, &q).unwrap();
                for kind in LiftKind::ALL {
                    let d = p.cov_deriv(kind, Reading::Corrected).max_abs_diff(&p.cov_deriv_assembly(kind)).unwrap();
                    assert!(d <= 1e-10, "{f} {kind}: {d}");
                }
            }
        }
    }

    #[test]
    fn rotation_and_lie_are_parts_of_the_lowered_derivative() {
        let s = sphere();
        for q in pts() {
            for f in ["dphi", "mixed"] {
                let p = LiftPoint::new(&s, f, &q).unwrap();
                for kind in LiftKind::ALL {
                    let l = p.lowered(&p.cov_deriv_assembly(kind)).to_matrix();
                    let rot = p.rotation(kind, Reading::Corrected).to_matrix();
                    let lie = p.lie(kind, Reading::Corrected).to_matrix();
                    assert!((&rot - (&l - l.transpose())).abs().max() <= 1e-12, "rot {f} {kind}");
                    assert!((&lie - (&l + l.transpose())).abs().max() <= 1e-12, "lie {f} {kind}");
                    assert!((&rot + &lie - 2.0 * &l).abs().max() <= 1e-12);
                    assert!((&rot + rot.transpose()).abs().max() <= 1e-12);
                    assert!((&lie - lie.transpose()).abs().max() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_forms_match_oracle() {
        let s = sphere();
        let o = Oracle::new(&s);
        for q in pts() {
            for f in ["dphi", "rotx", "mixed"] {
                let p = LiftPoint::new(&s, f, &q).unwrap();
                for kind in LiftKind::ALL {
                    let lie = p.lie(kind, Reading::Corrected);
                    let ol = o.lie_derivative_adapted(f, kind, &q).unwrap();
                    assert!(lie.max_abs_diff(&ol).unwrap() <= 1e-8, "lie {f} {kind}");
                    let cov = p.cov_deriv(kind, Reading::Corrected);
                    let oc = o.cov_deriv_adapted(f, kind, &q).unwrap();
                    assert!(cov.max_abs_diff(&oc).unwrap() <= 1e-8, "cov {f} {kind}");
                }
            }
        }
    }

    #[test]
    fn uncorrected_forms_differ_where_expected() {
        let s = sphere();
        let p = LiftPoint::new(&s, "mixed", &pts()[0]).unwrap();
        // Horizontal (h, h̄)-block of the uncorrected derivative uses a instead of b.
        let uncorrected = p.cov_deriv(LiftKind::Horizontal, Reading::Uncorrected);
        let corrected = p.cov_deriv(LiftKind::Horizontal, Reading::Corrected);
        assert_eq!(uncorrected.bb, corrected.bb);
        assert!((uncorrected.bf - corrected.bf).abs().max() > 1e-3);
        // Uncorrected Lie blocks are not symmetric as a whole.
        let m = p.lie(LiftKind::Horizontal, Reading::Uncorrected).to_matrix();
        assert!((&m - m.transpose()).abs().max() > 1e-3);
    }

    #[test]
    fn sphere_horizontal_lie_upper_left_is_constant_curvature_expansion() {
        // With K = 1 and R_{hkji} = K(g_hk g_ji − g_hj g_ki),
        // (P + Pᵀ)_{ij} = K(2 g_ij y^s X_s − y_j X_i − y_i X_j); the block is −(P + Pᵀ).
        let s = sphere();
        for q in pts() {
            let p = LiftPoint::new(&s, "dphi", &q).unwrap();
            let g = &p.jet.base.g;
            let x = p.field.lowered(&p.jet.base);
            let yl: Vec<f64> = (0..2).map(|i| (0..2).map(|h| g[(i, h)] * q.y[h]).sum()).collect();
            let yx: f64 = q.y.iter().zip(&x).map(|(a, b)| a * b).sum();
            let want = DMatrix::from_fn(2, 2, |i, j| 2.0 * g[(i, j)] * yx - yl[j] * x[i] - yl[i] * x[j]);
            let got = p.lie(LiftKind::Horizontal, Reading::Corrected).bb;
            assert!((got + &want).abs().max() <= 1e-12);
            assert!(want.abs().max() > 1e-3);
        }
    }

    #[test]
    fn killing_identities_on_sphere() {
        let s = sphere();
        for q in pts() {
            for f in ["dphi", "rotx"] {
                let p = LiftPoint::new(&s, f, &q).unwrap();
                assert!(matrix_max_abs(&p.killing_identity_symmetric()) <= 1e-10);
            }
        }
    }

    #[test]
    fn closedness_examples() {
        let s = flat();
        let grad = closedness_check(&s, "gradient", &pts()).unwrap();
        assert_eq!(grad.antisymmetric_residual, 0.0);
        assert_eq!(grad.second_derivative_residual, 0.0);
        assert_eq!(grad.rotation.max(), 0.0);
        assert!(grad.conditions_hold && grad.closed && grad.implication_holds);
        let rot = closedness_check(&s, "rotation", &pts()).unwrap();
        assert!(rot.antisymmetric_residual >= 1.0 && !rot.closed);
        let sp = sphere();
        let d = closedness_check(&sp, "dphi", &pts()).unwrap();
        assert!(d.second_derivative_residual > 1e-3);
    }

    #[test]
    fn classify_flat_translation() {
        let c = classify_field(&flat(), "translation", 10, 1).unwrap();
        assert!(c.base.killing.holds && c.base.parallel.holds);
        for a in &c.analyses {
            assert!(a.parallel && a.killing && a.oracle_parallel && a.oracle_killing);
        }
        assert!(c.audits.iter().all(|a| a.verdict == Verdict::Consistent));
        assert_eq!(c.audits.len(), 5);
    }

    #[test]
    fn classify_flat_rotation() {
        let c = classify_field(&flat(), "rotation", 10, 1).unwrap();
        assert!(c.base.killing.holds && !c.base.parallel.holds && c.base.second_parallel.holds);
        assert!(c.analysis(LiftKind::Complete).killing && c.analysis(LiftKind::Complete).oracle_killing);
        let t2a = c.audits.iter().find(|a| a.theorem == TheoremId::T2a).unwrap();
        assert_eq!(t2a.verdict, Verdict::CounterexampleCandidate);
        assert!(t2a.witness.is_some());
        // The horizontal lift of a non-parallel field is not Killing.
        let h = c.analysis(LiftKind::Horizontal);
        assert!(!h.killing && !h.oracle_killing);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(matches!(classify_field(&flat(), "rotation", 0, 1), Err(KillingError::NoSamples)));
        assert!(matches!(classify_field(&flat(), "nope", 1, 1), Err(KillingError::Geometry(GeometryError::UnknownField(_)))));
    }
}
