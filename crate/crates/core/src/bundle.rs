//! Tangent-bundle data at a point `(x, y)` of `T(M)`.
//!
//! Induced coordinates are ordered `(x^1..x^n, y^1..y^n)`. The adapted frame
//! is `e_i = ∂_i − Γ^h_i ∂_{y^h}`, `e_ī = ∂_{y^i}` with coframe
//! `dx^h`, `δy^h = dy^h + Γ^h_i dx^i`, where `Γ^h_i = y^j Γ^h_{ji}`.
//! As matrices (columns are frame vectors, rows are coframe forms):
//!
//! ```text
//! E = | I   0 |      C = E⁻¹ = | I  0 |
//!     | −Γ  I |                | Γ  I |
//! ```
//!
//! Every vector and 2-tensor carries a [`Frame`] tag; operations that need a
//! particular frame reject the other one.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{one_form_at, BaseJet, FieldJet, GeometryError, ManifoldSpec};
use crate::tensor::Tensor3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("expected {expected} frame, got {found}")]
    FrameMismatch { expected: Frame, found: Frame },
    #[error("expected {expected} components, got {found}")]
    VarianceMismatch { expected: Variance, found: Variance },
    #[error("bundle point has base dimension {base} and fiber dimension {fiber}, chart has {dim}")]
    DimensionMismatch { base: usize, fiber: usize, dim: usize },
}

pub type Result<T, E = BundleError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Adapted,
    Induced,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Adapted => "adapted",
            Frame::Induced => "induced",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Covariant,
    Contravariant,
    Mixed,
}

impl fmt::Display for Variance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variance::Covariant => "covariant",
            Variance::Contravariant => "contravariant",
            Variance::Mixed => "mixed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftKind {
    Vertical,
    Complete,
    Horizontal,
}

impl LiftKind {
    pub const ALL: [LiftKind; 3] = [LiftKind::Vertical, LiftKind::Complete, LiftKind::Horizontal];

    pub fn name(self) -> &'static str {
        match self {
            LiftKind::Vertical => "vertical",
            LiftKind::Complete => "complete",
            LiftKind::Horizontal => "horizontal",
        }
    }

    pub fn from_name(s: &str) -> Option<LiftKind> {
        LiftKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// `V`, `C` or `H`.
    pub fn letter(self) -> char {
        match self {
            LiftKind::Vertical => 'V',
            LiftKind::Complete => 'C',
            LiftKind::Horizontal => 'H',
        }
    }
}

impl fmt::Display for LiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundlePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BundlePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        BundlePoint { x, y }
    }

    /// `(x^1..x^n, y^1..y^n)`.
    pub fn stacked(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn from_stacked(v: &[f64]) -> Self {
        let n = v.len() / 2;
        BundlePoint { x: v[..n].to_vec(), y: v[n..].to_vec() }
    }

    fn check(&self, spec: &ManifoldSpec) -> Result<()> {
        let n = spec.dim();
        if self.x.len() != n || self.y.len() != n {
            return Err(BundleError::DimensionMismatch { base: self.x.len(), fiber: self.y.len(), dim: n });
        }
        Ok(())
    }
}

/// Components split into the unbarred (`h`) and barred (`h̄`) blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    pub frame: Frame,
    pub variance: Variance,
    pub base: DVector<f64>,
    pub fiber: DVector<f64>,
}

impl BlockVector {
    pub fn new(frame: Frame, variance: Variance, base: DVector<f64>, fiber: DVector<f64>) -> Self {
        BlockVector { frame, variance, base, fiber }
    }

    pub fn from_stacked(frame: Frame, variance: Variance, v: &DVector<f64>) -> Self {
        let n = v.len() / 2;
        BlockVector { frame, variance, base: v.rows(0, n).into_owned(), fiber: v.rows(n, n).into_owned() }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(2 * n, |k, _| if k < n { self.base[k] } else { self.fiber[k - n] })
    }

    pub fn require(&self, frame: Frame) -> Result<&Self> {
        if self.frame != frame {
            return Err(BundleError::FrameMismatch { expected: frame, found: self.frame });
        }
        Ok(self)
    }

    /// Re-expresses the components in `target` using the frame pair at the
    /// point. Contravariant components go through `C`/`E`, covariant ones
    /// through `Eᵀ`/`Cᵀ`.
    pub fn to_frame(&self, frames: &FramePair, target: Frame) -> Result<BlockVector> {
        if self.frame == target {
            return Ok(self.clone());
        }
        let v = self.stacked();
        let out = match (self.variance, target) {
            (Variance::Contravariant, Frame::Adapted) => &frames.dual * v,
            (Variance::Contravariant, Frame::Induced) => &frames.frame * v,
            (Variance::Covariant, Frame::Adapted) => frames.frame.transpose() * v,
            (Variance::Covariant, Frame::Induced) => frames.dual.transpose() * v,
            (Variance::Mixed, _) => {
                return Err(BundleError::VarianceMismatch { expected: Variance::Contravariant, found: Variance::Mixed })
            }
        };
        Ok(BlockVector::from_stacked(target, self.variance, &out))
    }
}

/// A 2-index object on `T(M)` in four `n × n` blocks.
///
/// Block names follow the index pattern of the first and second slot:
/// `bb = (i, j)`, `bf = (i, j̄)`, `fb = (ī, j)`, `ff = (ī, j̄)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block2Tensor {
    pub frame: Frame,
    pub variance: Variance,
    pub bb: DMatrix<f64>,
    pub bf: DMatrix<f64>,
    pub fb: DMatrix<f64>,
    pub ff: DMatrix<f64>,
}

impl Block2Tensor {
    pub fn from_blocks(frame: Frame, variance: Variance, bb: DMatrix<f64>, bf: DMatrix<f64>, fb: DMatrix<f64>, ff: DMatrix<f64>) -> Self {
        let n = bb.nrows();
        for b in [&bb, &bf, &fb, &ff] {
            assert_eq!(b.shape(), (n, n), "all blocks must be n × n");
        }
        Block2Tensor { frame, variance, bb, bf, fb, ff }
    }

    pub fn from_matrix(frame: Frame, variance: Variance, m: &DMatrix<f64>) -> Self {
        let n = m.nrows() / 2;
        Block2Tensor {
            frame,
            variance,
            bb: m.view((0, 0), (n, n)).into_owned(),
            bf: m.view((0, n), (n, n)).into_owned(),
            fb: m.view((n, 0), (n, n)).into_owned(),
            ff: m.view((n, n), (n, n)).into_owned(),
        }
    }

    pub fn dim(&self) -> usize {
        self.bb.nrows()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.bb);
        m.view_mut((0, n), (n, n)).copy_from(&self.bf);
        m.view_mut((n, 0), (n, n)).copy_from(&self.fb);
        m.view_mut((n, n), (n, n)).copy_from(&self.ff);
        m
    }

    pub fn require(&self, frame: Frame) -> Result<&Self> {
        if self.frame != frame {
            return Err(BundleError::FrameMismatch { expected: frame, found: self.frame });
        }
        Ok(self)
    }

    pub fn transpose(&self) -> Block2Tensor {
        Block2Tensor::from_matrix(self.frame, self.variance, &self.to_matrix().transpose())
    }

    pub fn max_abs(&self) -> f64 {
        self.to_matrix().abs().max()
    }

    pub fn max_abs_diff(&self, other: &Block2Tensor) -> Result<f64> {
        other.require(self.frame)?;
        Ok((self.to_matrix() - other.to_matrix()).abs().max())
    }

    /// Covariant tensors transform as `EᵀTE` into the adapted frame and
    /// `CᵀTC` back; contravariant ones as `CTCᵀ` and `ETEᵀ`.
    pub fn to_frame(&self, frames: &FramePair, target: Frame) -> Result<Block2Tensor> {
        if self.frame == target {
            return Ok(self.clone());
        }
        let m = self.to_matrix();
        let p = match (self.variance, target) {
            (Variance::Covariant, Frame::Adapted) => frames.frame.transpose() * m * &frames.frame,
            (Variance::Covariant, Frame::Induced) => frames.dual.transpose() * m * &frames.dual,
            (Variance::Contravariant, Frame::Adapted) => &frames.dual * m * frames.dual.transpose(),
            (Variance::Contravariant, Frame::Induced) => &frames.frame * m * frames.frame.transpose(),
            (Variance::Mixed, _) => return Err(BundleError::VarianceMismatch { expected: Variance::Covariant, found: Variance::Mixed }),
        };
        Ok(Block2Tensor::from_matrix(target, self.variance, &p))
    }
}

/// Frame matrix `E` (columns `e_γ` in induced components) and its inverse
/// `C` (rows are the coframe).
#[derive(Clone, Debug, PartialEq)]
pub struct FramePair {
    pub frame: DMatrix<f64>,
    pub dual: DMatrix<f64>,
}

/// Coefficients `Γ̃^α_{γβ}` of the Levi-Civita connection in the adapted
/// frame, `∇_{e_γ} e_β = Γ̃^α_{γβ} e_α`.
///
/// Field names spell the pattern `upper_lower1lower2`, with `b` marking a
/// barred index; every array is indexed `[(h, j, i)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleConnection {
    pub h_ji: Tensor3,
    pub h_jbi: Tensor3,
    pub h_bji: Tensor3,
    pub h_bjbi: Tensor3,
    pub bh_ji: Tensor3,
    pub bh_jbi: Tensor3,
    pub bh_bji: Tensor3,
    pub bh_bjbi: Tensor3,
}

impl BundleConnection {
    pub fn dim(&self) -> usize {
        self.h_ji.dim()
    }

    /// Pattern names: `b` marks a barred index, in the order upper, `j`, `i`.
    pub const PATTERN_NAMES: [&'static str; 8] = ["h_ji", "h_jbi", "h_bji", "h_bjbi", "bh_ji", "bh_jbi", "bh_bji", "bh_bjbi"];

    /// `(name, array)` pairs in [`Self::PATTERN_NAMES`] order.
    pub fn patterns(&self) -> [(&'static str, &Tensor3); 8] {
        let arrays = [&self.h_ji, &self.h_jbi, &self.h_bji, &self.h_bjbi, &self.bh_ji, &self.bh_jbi, &self.bh_bji, &self.bh_bjbi];
        std::array::from_fn(|k| (Self::PATTERN_NAMES[k], arrays[k]))
    }

    /// The coefficients as one `2n`-cube indexed `[(α, γ, β)]`.
    pub fn to_full(&self) -> Tensor3 {
        let n = self.dim();
        Tensor3::from_fn(2 * n, |a, c, b| {
            let (ab, h) = (a >= n, a % n);
            let (cb, j) = (c >= n, c % n);
            let (bb, i) = (b >= n, b % n);
            let t = match (ab, cb, bb) {
                (false, false, false) => &self.h_ji,
                (false, false, true) => &self.h_jbi,
                (false, true, false) => &self.h_bji,
                (false, true, true) => &self.h_bjbi,
                (true, false, false) => &self.bh_ji,
                (true, false, true) => &self.bh_jbi,
                (true, true, false) => &self.bh_bji,
                (true, true, true) => &self.bh_bjbi,
            };
            t[(h, j, i)]
        })
    }

    pub fn from_full(full: &Tensor3) -> Self {
        let n = full.dim() / 2;
        let pick = |ua: usize, uc: usize, ub: usize| Tensor3::from_fn(n, |h, j, i| full[(h + ua, j + uc, i + ub)]);
        BundleConnection {
            h_ji: pick(0, 0, 0),
            h_jbi: pick(0, 0, n),
            h_bji: pick(0, n, 0),
            h_bjbi: pick(0, n, n),
            bh_ji: pick(n, 0, 0),
            bh_jbi: pick(n, 0, n),
            bh_bji: pick(n, n, 0),
            bh_bjbi: pick(n, n, n),
        }
    }

    pub fn max_abs_diff(&self, other: &BundleConnection) -> f64 {
        self.to_full().max_abs_diff(&other.to_full())
    }
}

/// Base jet plus the fiber-dependent contractions used throughout.
#[derive(Clone, Debug)]
pub struct BundleJet {
    pub q: BundlePoint,
    pub base: BaseJet,
    /// `Γ^h_i = y^j Γ^h_{ji}` at `[(h, i)]`.
    pub gamma_y: DMatrix<f64>,
    /// `ρ^h_{ji} = y^s R^h_{sji}` at `[(h, j, i)]`.
    pub rho: Tensor3,
}

impl BundleJet {
    pub fn at(spec: &ManifoldSpec, q: &BundlePoint) -> Result<BundleJet> {
        q.check(spec)?;
        let base = spec.jet_at(&q.x)?;
        Ok(BundleJet::from_base(base, q))
    }

    pub fn from_base(base: BaseJet, q: &BundlePoint) -> BundleJet {
        let n = base.dim();
        let gamma_y = base.contracted_christoffel(&q.y);
        let rho = Tensor3::from_fn(n, |h, j, i| (0..n).map(|s| q.y[s] * base.riemann[(h, s, j, i)]).sum());
        BundleJet { q: q.clone(), base, gamma_y, rho }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn frames(&self) -> FramePair {
        let n = self.dim();
        let mut frame = DMatrix::identity(2 * n, 2 * n);
        let mut dual = DMatrix::identity(2 * n, 2 * n);
        frame.view_mut((n, 0), (n, n)).copy_from(&(-&self.gamma_y));
        dual.view_mut((n, 0), (n, n)).copy_from(&self.gamma_y);
        FramePair { frame, dual }
    }

    pub fn metric_adapted(&self) -> Block2Tensor {
        let g = &self.base.g;
        let n = self.dim();
        Block2Tensor::from_blocks(Frame::Adapted, Variance::Covariant, DMatrix::zeros(n, n), g.clone(), g.clone(), g.clone())
    }

    pub fn metric_adapted_inv(&self) -> Block2Tensor {
        let gi = &self.base.g_inv;
        let n = self.dim();
        Block2Tensor::from_blocks(Frame::Adapted, Variance::Contravariant, -gi, gi.clone(), gi.clone(), DMatrix::zeros(n, n))
    }

    pub fn metric_induced(&self) -> Block2Tensor {
        let g = &self.base.g;
        let gam = &self.gamma_y;
        // g_{aj}Γ^j_b is (gΓ)_{ab}; Γ^i_a g_{ij} Γ^j_b is (Γᵀ g Γ)_{ab}.
        let g_gam = g * gam;
        let quad = gam.transpose() * g * gam;
        let bb = &g_gam + g_gam.transpose() + 0.5 * (&quad + quad.transpose());
        let bf = g + g_gam.transpose();
        let fb = bf.transpose();
        Block2Tensor::from_blocks(Frame::Induced, Variance::Covariant, bb, bf, fb, g.clone())
    }

    pub fn connection(&self) -> BundleConnection {
        let n = self.dim();
        let gam = &self.base.christoffel;
        let rho = &self.rho;
        BundleConnection {
            h_ji: Tensor3::from_fn(n, |h, j, i| gam[(h, j, i)] - 0.5 * (rho[(h, j, i)] + rho[(h, i, j)])),
            h_jbi: Tensor3::from_fn(n, |h, j, i| -0.5 * rho[(h, i, j)]),
            h_bji: Tensor3::from_fn(n, |h, j, i| -0.5 * rho[(h, j, i)]),
            h_bjbi: Tensor3::zeros(n),
            bh_ji: rho.clone(),
            bh_jbi: Tensor3::from_fn(n, |h, j, i| gam[(h, j, i)] + 0.5 * rho[(h, i, j)]),
            bh_bji: Tensor3::from_fn(n, |h, j, i| 0.5 * rho[(h, j, i)]),
            bh_bjbi: Tensor3::zeros(n),
        }
    }

    /// Anholonomy `Ω^α_{γβ}` with `[e_γ, e_β] = Ω^α_{γβ} e_α`, indexed
    /// `[(α, γ, β)]`. The nonzero parts are `Ω^{h̄}_{ji} = y^s R^h_{ijs}` and
    /// `Ω^{h̄}_{jī} = −Ω^{h̄}_{īj} = Γ^h_{ij}`.
    pub fn anholonomy(&self) -> Tensor3 {
        let n = self.dim();
        // ∂_k Γ^h_i = y^j ∂_kΓ^h_{ji}; ∂_{ȳ^j} Γ^h_i = Γ^h_{ji}
        let dgam = &self.base.d_christoffel;
        let gam = &self.base.christoffel;
        let y = &self.q.y;
        let d_x = |h: usize, i: usize, k: usize| (0..n).map(|j| y[j] * dgam[(h, j, i, k)]).sum::<f64>();
        let mut out = Tensor3::zeros(2 * n);
        for h in 0..n {
            for g in 0..n {
                for b in 0..n {
                    // e_g(−Γ^h_b) − e_b(−Γ^h_g)
                    let mut v = -d_x(h, b, g) + d_x(h, g, b);
                    for m in 0..n {
                        v += self.gamma_y[(m, g)] * gam[(h, m, b)] - self.gamma_y[(m, b)] * gam[(h, m, g)];
                    }
                    out[(n + h, g, b)] = v;
                    out[(n + h, g, n + b)] = gam[(h, b, g)];
                    out[(n + h, n + b, g)] = -gam[(h, b, g)];
                }
            }
        }
        out
    }

    /// `Γ̃^α_{γβ} − Γ̃^α_{βγ} − Ω^α_{γβ}`, zero for a torsion-free connection.
    pub fn torsion(&self) -> Tensor3 {
        let c = self.connection().to_full();
        let o = self.anholonomy();
        Tensor3::from_fn(2 * self.dim(), |a, g, b| c[(a, g, b)] - c[(a, b, g)] - o[(a, g, b)])
    }

    fn vec(&self, frame: Frame, variance: Variance, base: Vec<f64>, fiber: Vec<f64>) -> BlockVector {
        BlockVector::new(frame, variance, DVector::from_vec(base), DVector::from_vec(fiber))
    }

    /// `y^l v[(h, l)]` for a matrix indexed `[(h, l)]`.
    fn contract_y(&self, m: &DMatrix<f64>) -> Vec<f64> {
        (m * DVector::from_column_slice(&self.q.y)).iter().copied().collect()
    }

    pub fn lift_vector(&self, field: &FieldJet, kind: LiftKind, frame: Frame) -> BlockVector {
        let n = self.dim();
        let x = field.x.clone();
        let zero = vec![0.0; n];
        let (base, fiber) = match (kind, frame) {
            (LiftKind::Vertical, _) => (zero, x),
            (LiftKind::Complete, Frame::Induced) => (x, self.contract_y(&field.dx)),
            (LiftKind::Complete, Frame::Adapted) => (x, self.contract_y(&field.nabla)),
            (LiftKind::Horizontal, Frame::Induced) => {
                let fiber = (&self.gamma_y * DVector::from_column_slice(&x)).iter().map(|v| -v).collect();
                (x, fiber)
            }
            (LiftKind::Horizontal, Frame::Adapted) => (x, zero),
        };
        self.vec(frame, Variance::Contravariant, base, fiber)
    }

    /// Induced components of the lifts of `ω`: `(ω_i, 0)`, `(∂ω_i, ω_i)` with
    /// `∂ω_i = y^j ∂_j ω_i`, and `(−Γ^k_i ω_k, ω_i)`.
    pub fn lift_oneform(&self, w: &[f64], dw: &DMatrix<f64>, kind: LiftKind) -> BlockVector {
        let n = self.dim();
        let wv = w.to_vec();
        let (base, fiber) = match kind {
            LiftKind::Vertical => (wv, vec![0.0; n]),
            LiftKind::Complete => (self.contract_y(dw), wv),
            LiftKind::Horizontal => {
                let base = (self.gamma_y.transpose() * DVector::from_column_slice(w)).iter().map(|v| -v).collect();
                (base, wv)
            }
        };
        self.vec(Frame::Induced, Variance::Covariant, base, fiber)
    }

    /// Adapted covariant components of `g̃(lift X, ·)`: `(X_i, X_i)`,
    /// `(∇X_i, X_i + ∇X_i)`, `(0, X_i)` with `∇X_i = y^l ∇_l X_i`.
    pub fn associated_covector(&self, field: &FieldJet, kind: LiftKind) -> BlockVector {
        let n = self.dim();
        let xl = field.lowered(&self.base);
        let nabla_y: Vec<f64> = {
            let low = field.nabla_lowered(&self.base); // [(l, i)] = ∇_l X_i
            (0..n).map(|i| (0..n).map(|l| self.q.y[l] * low[(l, i)]).sum()).collect()
        };
        let (base, fiber) = match kind {
            LiftKind::Vertical => (xl.clone(), xl),
            LiftKind::Complete => {
                let fiber = xl.iter().zip(&nabla_y).map(|(a, b)| a + b).collect();
                (nabla_y, fiber)
            }
            LiftKind::Horizontal => (vec![0.0; n], xl),
        };
        self.vec(Frame::Adapted, Variance::Covariant, base, fiber)
    }
}

pub fn adapted_frame_at(spec: &ManifoldSpec, q: &BundlePoint) -> Result<FramePair> {
    Ok(BundleJet::at(spec, q)?.frames())
}

pub fn metric_adapted_at(spec: &ManifoldSpec, q: &BundlePoint) -> Result<Block2Tensor> {
    Ok(BundleJet::at(spec, q)?.metric_adapted())
}

pub fn metric_adapted_inv_at(spec: &ManifoldSpec, q: &BundlePoint) -> Result<Block2Tensor> {
    Ok(BundleJet::at(spec, q)?.metric_adapted_inv())
}

pub fn metric_induced_at(spec: &ManifoldSpec, q: &BundlePoint) -> Result<Block2Tensor> {
    Ok(BundleJet::at(spec, q)?.metric_induced())
}

pub fn bundle_connection_at(spec: &ManifoldSpec, q: &BundlePoint) -> Result<BundleConnection> {
    Ok(BundleJet::at(spec, q)?.connection())
}

pub fn lift_vector(spec: &ManifoldSpec, field: &str, kind: LiftKind, q: &BundlePoint, frame: Frame) -> Result<BlockVector> {
    let jet = BundleJet::at(spec, q)?;
    let f = FieldJet::at(spec, &jet.base, spec.field(field)?, &q.x)?;
    Ok(jet.lift_vector(&f, kind, frame))
}

pub fn lift_oneform(spec: &ManifoldSpec, form: &str, kind: LiftKind, q: &BundlePoint) -> Result<BlockVector> {
    let jet = BundleJet::at(spec, q)?;
    let (w, dw) = one_form_at(spec, spec.form(form)?, &q.x)?;
    Ok(jet.lift_oneform(&w, &dw, kind))
}

pub fn associated_covector(spec: &ManifoldSpec, field: &str, kind: LiftKind, q: &BundlePoint) -> Result<BlockVector> {
    let jet = BundleJet::at(spec, q)?;
    let f = FieldJet::at(spec, &jet.base, spec.field(field)?, &q.x)?;
    Ok(jet.associated_covector(&f, kind))
}

/// `g̃_{αβ} v^β` for an adapted contravariant vector.
pub fn lower_adapted(metric: &Block2Tensor, v: &BlockVector) -> Result<BlockVector> {
    metric.require(Frame::Adapted)?;
    v.require(Frame::Adapted)?;
    if v.variance != Variance::Contravariant {
        return Err(BundleError::VarianceMismatch { expected: Variance::Contravariant, found: v.variance });
    }
    let out = metric.to_matrix() * v.stacked();
    Ok(BlockVector::from_stacked(Frame::Adapted, Variance::Covariant, &out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Interval;
    use std::f64::consts::FRAC_PI_6;

    fn polar() -> ManifoldSpec {
        let mut b = ManifoldSpec::builder("polar", &["r", "theta"]).unwrap();
        b.metric(0, 0, "1").unwrap().metric(1, 1, "r^2").unwrap();
        b.vector_field("dphi", &["0", "1"]).unwrap();
        b.base_domain(vec![Interval::new(0.5, 3.0), Interval::new(-3.0, 3.0)]);
        b.build().unwrap()
    }

    fn sphere() -> ManifoldSpec {
        let mut b = ManifoldSpec::builder("sphere", &["theta", "phi"]).unwrap();
        b.metric(0, 0, "1").unwrap().metric(1, 1, "sin(theta)^2").unwrap();
        b.vector_field("dphi", &["0", "1"]).unwrap();
        b.one_form("w", &["cos(phi)", "theta*phi"]).unwrap();
        b.base_domain(vec![Interval::new(0.3, 2.8), Interval::new(-3.0, 3.0)]);
        b.build().unwrap()
    }

    fn flat() -> ManifoldSpec {
        let mut b = ManifoldSpec::builder("flat", &["x1", "x2"]).unwrap();
        b.metric(0, 0, "1").unwrap().metric(1, 1, "1").unwrap();
        b.vector_field("translation", &["1", "0"]).unwrap();
        b.vector_field("rotation", &["-x2", "x1"]).unwrap();
        b.build().unwrap()
    }

    fn q(x: [f64; 2], y: [f64; 2]) -> BundlePoint {
        BundlePoint::new(x.to_vec(), y.to_vec())
    }

    fn points() -> Vec<BundlePoint> {
        vec![q([0.5, 0.3], [0.7, -1.1]), q([1.4, -2.0], [-0.3, 0.4]), q([2.5, 1.0], [1.2, 0.9])]
    }

    #[test]
    fn flat_frame_is_identity() {
        let f = adapted_frame_at(&flat(), &q([0.3, 0.4], [1.0, -2.0])).unwrap();
        assert_eq!(f.frame, DMatrix::identity(4, 4));
        assert_eq!(f.dual, DMatrix::identity(4, 4));
    }

    #[test]
    fn polar_coframe_carries_contracted_christoffel() {
        let f = adapted_frame_at(&polar(), &q([2.0, 1.0], [0.0, 1.0])).unwrap();
        // row δy^r, column dx^θ
        assert!((f.dual[(2, 1)] + 2.0).abs() < 1e-15);
        assert!((&f.dual * &f.frame - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-12);
    }

    #[test]
    fn adapted_metric_blocks() {
        let m = metric_adapted_at(&flat(), &q([0.0, 0.0], [1.0, 1.0])).unwrap();
        let i = DMatrix::<f64>::identity(2, 2);
        assert_eq!((m.bb.clone(), m.bf.clone(), m.fb.clone(), m.ff.clone()), (i.clone() * 0.0, i.clone(), i.clone(), i.clone()));
        let inv = metric_adapted_inv_at(&flat(), &q([0.0, 0.0], [1.0, 1.0])).unwrap();
        assert_eq!((inv.bb, inv.bf, inv.fb, inv.ff), (-i.clone(), i.clone(), i.clone(), i * 0.0));
        let s = metric_adapted_at(&sphere(), &q([FRAC_PI_6, 0.0], [0.2, 0.1])).unwrap();
        assert!((s.ff[(1, 1)] - 0.25).abs() < 1e-15 && s.ff[(0, 0)] == 1.0);
    }

    #[test]
    fn adapted_metric_inverse_pair() {
        let s = sphere();
        for p in points() {
            let jet = BundleJet::at(&s, &p).unwrap();
            let prod = jet.metric_adapted().to_matrix() * jet.metric_adapted_inv().to_matrix();
            assert!((prod - DMatrix::<f64>::identity(4, 4)).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn induced_metric_is_congruent_to_adapted() {
        for spec in [sphere(), polar()] {
            for p in points() {
                let jet = BundleJet::at(&spec, &p).unwrap();
                let frames = jet.frames();
                let induced = jet.metric_induced();
                let pushed = jet.metric_adapted().to_frame(&frames, Frame::Induced).unwrap();
                assert!(induced.max_abs_diff(&pushed).unwrap() <= 1e-12);
                let m = induced.to_matrix();
                assert!((&m - m.transpose()).abs().max() == 0.0);
            }
        }
    }

    #[test]
    fn flat_polar_connection_reduces_to_christoffel() {
        let p = polar();
        let jet = BundleJet::at(&p, &q([1.7, 0.2], [0.4, -0.8])).unwrap();
        let c = jet.connection();
        let gam = &jet.base.christoffel;
        assert!(c.h_ji.max_abs_diff(gam) < 1e-12);
        assert!(c.bh_jbi.max_abs_diff(gam) < 1e-12);
        for t in [&c.bh_ji, &c.h_jbi, &c.h_bji, &c.bh_bji] {
            assert!(t.max_abs() < 1e-12);
        }
        assert_eq!(c.h_bjbi.max_abs(), 0.0);
        assert_eq!(c.bh_bjbi.max_abs(), 0.0);
        let flat = BundleJet::at(&flat(), &q([0.1, 0.2], [0.3, 0.4])).unwrap().connection();
        assert_eq!(flat.to_full().max_abs(), 0.0);
    }

    #[test]
    fn connection_is_torsion_free() {
        for spec in [sphere(), polar()] {
            for p in points() {
                let jet = BundleJet::at(&spec, &p).unwrap();
                assert!(jet.torsion().max_abs() <= 1e-12);
                // Ω^{h̄}_{ji} = −ρ^h_{ji}
                let om = jet.anholonomy();
                let rho = &jet.rho;
                let gam = &jet.base.christoffel;
                let expect = Tensor3::from_fn(4, |a, g, b| match (a >= 2, g >= 2, b >= 2) {
                    (true, false, false) => rho[(a - 2, g, b)] - rho[(a - 2, b, g)],
                    (true, false, true) => gam[(a - 2, b - 2, g)],
                    (true, true, false) => -gam[(a - 2, g - 2, b)],
                    _ => 0.0,
                });
                assert!(om.max_abs_diff(&expect) <= 1e-12);
            }
        }
    }

    #[test]
    fn full_round_trip() {
        let jet = BundleJet::at(&sphere(), &points()[1]).unwrap();
        let c = jet.connection();
        assert_eq!(BundleConnection::from_full(&c.to_full()), c);
    }

    #[test]
    fn lift_examples() {
        let f = flat();
        let t = lift_vector(&f, "translation", LiftKind::Complete, &q([0.3, 0.1], [2.0, 1.0]), Frame::Adapted).unwrap();
        assert_eq!(t.stacked().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        let r = lift_vector(&f, "rotation", LiftKind::Complete, &q([0.3, 0.1], [3.0, 5.0]), Frame::Adapted).unwrap();
        assert_eq!(r.fiber.as_slice(), &[-5.0, 3.0]);
        let v = lift_vector(&sphere(), "dphi", LiftKind::Vertical, &points()[0], Frame::Induced).unwrap();
        assert_eq!(v.stacked().as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        let c = associated_covector(&f, "translation", LiftKind::Complete, &q([0.0, 0.0], [1.0, 1.0])).unwrap();
        assert_eq!(c.stacked().as_slice(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn lift_frames_are_consistent() {
        for spec in [sphere(), polar(), flat()] {
            for p in points() {
                let jet = BundleJet::at(&spec, &p).unwrap();
                let frames = jet.frames();
                for field in spec.vector_fields() {
                    let fj = FieldJet::at(&spec, &jet.base, field, &p.x).unwrap();
                    for kind in LiftKind::ALL {
                        let induced = jet.lift_vector(&fj, kind, Frame::Induced);
                        let adapted = jet.lift_vector(&fj, kind, Frame::Adapted);
                        let moved = induced.to_frame(&frames, Frame::Adapted).unwrap();
                        assert!((moved.stacked() - adapted.stacked()).abs().max() <= 1e-12, "{kind}");
                    }
                }
            }
        }
    }

    #[test]
    fn associated_covector_is_lowered_lift() {
        let s = sphere();
        for p in points() {
            let jet = BundleJet::at(&s, &p).unwrap();
            let fj = FieldJet::at(&s, &jet.base, s.field("dphi").unwrap(), &p.x).unwrap();
            for kind in LiftKind::ALL {
                let lowered = lower_adapted(&jet.metric_adapted(), &jet.lift_vector(&fj, kind, Frame::Adapted)).unwrap();
                let eq = jet.associated_covector(&fj, kind);
                assert!((lowered.stacked() - eq.stacked()).abs().max() <= 1e-12);
            }
        }
    }

    #[test]
    fn oneform_lifts_pair_with_vector_lifts() {
        // ⟨lift ω, lift X⟩ pairings: V·V = 0, C·V = ω(X), H·H = 0 is not a
        // general identity, so only check frame-independence of the pairing.
        let s = sphere();
        for p in points() {
            let jet = BundleJet::at(&s, &p).unwrap();
            let frames = jet.frames();
            let fj = FieldJet::at(&s, &jet.base, s.field("dphi").unwrap(), &p.x).unwrap();
            let (w, dw) = one_form_at(&s, s.form("w").unwrap(), &p.x).unwrap();
            for kind in LiftKind::ALL {
                let form = jet.lift_oneform(&w, &dw, kind);
                let vec = jet.lift_vector(&fj, LiftKind::Complete, Frame::Induced);
                let induced = form.stacked().dot(&vec.stacked());
                let fa = form.to_frame(&frames, Frame::Adapted).unwrap();
                let va = vec.to_frame(&frames, Frame::Adapted).unwrap();
                assert!((fa.stacked().dot(&va.stacked()) - induced).abs() <= 1e-12);
            }
            let cv = jet
                .lift_oneform(&w, &dw, LiftKind::Complete)
                .stacked()
                .dot(&jet.lift_vector(&fj, LiftKind::Vertical, Frame::Induced).stacked());
            let wx: f64 = w.iter().zip(&fj.x).map(|(a, b)| a * b).sum();
            assert!((cv - wx).abs() <= 1e-12);
        }
    }

    #[test]
    fn horizontal_oneform_lift_sign() {
        // The horizontal 1-form lift keeps the sign (−Γ^k_i ω_k, ω_i), so it does
        // not annihilate horizontal lifts: ^Hω(^HX) = −2 ω_k Γ^k_i X^i.
        let s = sphere();
        for p in points() {
            let jet = BundleJet::at(&s, &p).unwrap();
            let fj = FieldJet::at(&s, &jet.base, s.field("dphi").unwrap(), &p.x).unwrap();
            let (w, dw) = one_form_at(&s, s.form("w").unwrap(), &p.x).unwrap();
            let pairing = jet
                .lift_oneform(&w, &dw, LiftKind::Horizontal)
                .stacked()
                .dot(&jet.lift_vector(&fj, LiftKind::Horizontal, Frame::Induced).stacked());
            let gx = &jet.gamma_y * DVector::from_column_slice(&fj.x);
            let expected: f64 = -2.0 * w.iter().zip(gx.iter()).map(|(a, b)| a * b).sum::<f64>();
            assert!((pairing - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn frame_mismatch_is_an_error() {
        let jet = BundleJet::at(&flat(), &q([0.0, 0.0], [1.0, 0.0])).unwrap();
        let induced = jet.metric_induced();
        assert!(matches!(induced.require(Frame::Adapted), Err(BundleError::FrameMismatch { .. })));
        let v = BlockVector::new(Frame::Induced, Variance::Contravariant, DVector::zeros(2), DVector::zeros(2));
        assert!(lower_adapted(&jet.metric_adapted(), &v).is_err());
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        let bad = BundlePoint::new(vec![0.0], vec![0.0, 0.0]);
        assert!(matches!(BundleJet::at(&flat(), &bad), Err(BundleError::DimensionMismatch { .. })));
    }
}
