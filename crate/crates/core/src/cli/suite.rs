//! Check suites behind the subcommands.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::bundle::{lower_adapted, BundleConnection, BundleError, BundleJet, BundlePoint, Frame, LiftKind};
use crate::geometry::{FieldJet, GeometryError, ManifoldSpec};
use crate::killing::{classify_with, closedness_check, tags, KillingError, LiftPoint, Reading};
use crate::oracle::{connection_to_adapted, finite_difference_audit, FdQuantity, Oracle, OracleError};
use crate::report::{AuditEntry, CheckEntry, CheckReport, CorrectionEntry, EqTag, SuiteReport, TOOL_VERSION};
use crate::sampling::sample_bundle;
use crate::tensor::{matrix_max_abs, max_abs_diff};

use super::specfile::{load_spec, LoadError};

/// Connection patterns that are identically zero.
pub const ZERO_PATTERNS: [&str; 2] = ["h_bjbi", "bh_bjbi"];

/// Finite-difference steps; the second is half the first.
pub const FD_STEPS: [f64; 2] = [1e-3, 5e-4];
/// Deviations below this are roundoff: the differencing is exact.
pub const FD_EXACT_FLOOR: f64 = 1e-9;
const FD_POINTS: usize = 8;

pub mod tol {
    pub const METRIC: f64 = 1e-10;
    pub const INVERSE: f64 = 1e-12;
    pub const CONNECTION: f64 = 1e-8;
    pub const ZERO_PATTERN: f64 = 1e-10;
    pub const LIFT: f64 = 1e-12;
    pub const ASSEMBLY: f64 = 1e-10;
    pub const ENGINES: f64 = 1e-8;
    pub const KILLING_IDENTITY: f64 = 1e-8;
    pub const CLOSED_CONDITIONS: f64 = 1e-12;
    pub const ROTATION: f64 = 1e-10;
    /// Allowed relative spread of the halving ratio around 4.
    pub const FD_ORDER: f64 = 0.3;
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("spec `{spec}` has no vector field `{field}`")]
    UnknownField { spec: String, field: String },
    #[error("--points must be at least 1")]
    NoSamples,
    #[error("cannot read catalog {path}: {source}")]
    Catalog { path: PathBuf, source: std::io::Error },
    #[error("no .spec files in {0}")]
    EmptyCatalog(PathBuf),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Killing(#[from] KillingError),
}

pub type Result<T, E = SuiteError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Options {
    pub points: usize,
    pub seed: u64,
    /// Replaces every per-check tolerance when set.
    pub tol: Option<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Options { points: 50, seed: 0, tol: None }
    }
}

impl Options {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn samples(&self, spec: &ManifoldSpec) -> Result<Vec<BundlePoint>> {
        if self.points == 0 {
            return Err(SuiteError::NoSamples);
        }
        Ok(sample_bundle(spec, self.points, self.seed))
    }
}

fn select_fields<'a>(spec: &'a ManifoldSpec, field: Option<&'a str>) -> Result<Vec<&'a str>> {
    match field {
        Some(f) => {
            spec.field(f).map_err(|_| SuiteError::UnknownField { spec: spec.name().into(), field: f.into() })?;
            Ok(vec![f])
        }
        None => Ok(spec.vector_fields().iter().map(|v| v.name.as_str()).collect()),
    }
}

fn diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    matrix_max_abs(&(a - b))
}

/// Frame, metric and connection-table checks; lift and covector checks per field.
pub fn verify_connection(spec: &ManifoldSpec, opts: &Options) -> Result<CheckReport> {
    let mut report = CheckReport::new("verify-connection", spec.name(), opts.seed, opts.points);
    connection_entries(spec, &Oracle::new(spec), opts, &mut report)?;
    Ok(report)
}

fn connection_entries(spec: &ManifoldSpec, oracle: &Oracle, opts: &Options, report: &mut CheckReport) -> Result<()> {
    let points = opts.samples(spec)?;
    let n = spec.dim();
    let id = DMatrix::<f64>::identity(2 * n, 2 * n);
    let (mut metric, mut inv_adapted, mut inv_induced, mut torsion, mut compat) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut patterns = [0.0_f64; 8];
    let mut zeros = [0.0_f64; 2];
    let fields: Vec<&str> = spec.vector_fields().iter().map(|f| f.name.as_str()).collect();
    // [field][kind] → (E5, E6, E10)
    let mut lifts = vec![[[0.0_f64; 3]; 3]; fields.len()];
    for q in &points {
        let jet = BundleJet::at(spec, q)?;
        let oj = oracle.jet_at(q)?;
        let induced = jet.metric_induced().to_matrix();
        metric = metric.max(diff(&induced, &oj.metric));
        let ga = jet.metric_adapted().to_matrix();
        inv_adapted = inv_adapted.max(diff(&(&ga * jet.metric_adapted_inv().to_matrix()), &id));
        inv_induced = inv_induced.max(diff(&(&induced * &oj.metric_inv), &id));

        let closed = jet.connection();
        let from_oracle = connection_to_adapted(&oj);
        for (k, ((name, a), (_, b))) in closed.patterns().into_iter().zip(from_oracle.patterns()).enumerate() {
            patterns[k] = patterns[k].max(a.max_abs_diff(b));
            if let Some(z) = ZERO_PATTERNS.iter().position(|p| *p == name) {
                zeros[z] = zeros[z].max(a.max_abs()).max(b.max_abs());
            }
        }
        torsion = torsion.max(jet.torsion().max_abs());
        compat = compat.max(oracle.metric_compatibility(q)?.max_abs());

        let frames = jet.frames();
        let g_adapted = jet.metric_adapted();
        for (fi, name) in fields.iter().enumerate() {
            let fj = FieldJet::at(spec, &jet.base, spec.field(name)?, &q.x)?;
            for kind in LiftKind::ALL {
                let ind = jet.lift_vector(&fj, kind, Frame::Induced);
                let ada = jet.lift_vector(&fj, kind, Frame::Adapted);
                let (sym, _) = oracle.lift_at(name, kind, q)?;
                let e5 = max_abs_diff(ind.stacked().as_slice(), &sym);
                let moved = ind.to_frame(&frames, Frame::Adapted)?;
                let e6 = max_abs_diff(moved.stacked().as_slice(), ada.stacked().as_slice());
                let lowered = lower_adapted(&g_adapted, &ada)?;
                let cov = jet.associated_covector(&fj, kind);
                let e10 = max_abs_diff(lowered.stacked().as_slice(), cov.stacked().as_slice());
                let slot = &mut lifts[fi][kind as usize];
                for (s, v) in slot.iter_mut().zip([e5, e6, e10]) {
                    *s = s.max(v);
                }
            }
        }
    }
    report.push(CheckEntry::new("metric.induced_vs_oracle", EqTag::E1, None, None, metric, opts.tol(tol::METRIC)));
    report.push(CheckEntry::new("metric.inverse_adapted", EqTag::E2, None, None, inv_adapted, opts.tol(tol::INVERSE)));
    report.push(CheckEntry::new("metric.inverse_induced", EqTag::E2, None, None, inv_induced, opts.tol(tol::METRIC)));
    for (name, r) in BundleConnection::PATTERN_NAMES.iter().zip(patterns) {
        report.push(CheckEntry::new(format!("connection.{name}"), EqTag::E3, None, None, r, opts.tol(tol::CONNECTION)));
    }
    for (name, r) in ZERO_PATTERNS.iter().zip(zeros) {
        report.push(CheckEntry::new(format!("connection.zero.{name}"), EqTag::E3, None, None, r, opts.tol(tol::ZERO_PATTERN)));
    }
    report.push(CheckEntry::new("connection.torsion", EqTag::E3, None, None, torsion, opts.tol(tol::CONNECTION)));
    report.push(CheckEntry::new("connection.metric_compatibility", EqTag::E3, None, None, compat, opts.tol(tol::CONNECTION)));
    for (name, per_kind) in fields.iter().zip(&lifts) {
        for kind in LiftKind::ALL {
            let [e5, e6, e10] = per_kind[kind as usize];
            let f = Some(*name);
            report.push(CheckEntry::new("lift.induced_vs_oracle", EqTag::E5, f, Some(kind), e5, opts.tol(tol::LIFT)));
            report.push(CheckEntry::new("lift.adapted_frame", EqTag::E6, f, Some(kind), e6, opts.tol(tol::LIFT)));
            report.push(CheckEntry::new("covector.lowering", EqTag::E10, f, Some(kind), e10, opts.tol(tol::LIFT)));
        }
    }
    Ok(())
}

/// Closed forms against the assembly and the oracle, the Killing identity,
/// and the theorem audits.
pub fn classify(spec: &ManifoldSpec, field: Option<&str>, opts: &Options) -> Result<CheckReport> {
    let mut report = CheckReport::new("classify", spec.name(), opts.seed, opts.points);
    let oracle = Oracle::new(spec);
    for f in select_fields(spec, field)? {
        classify_entries(spec, &oracle, f, opts, &mut report)?;
    }
    Ok(report)
}

fn classify_entries(spec: &ManifoldSpec, oracle: &Oracle, field: &str, opts: &Options, report: &mut CheckReport) -> Result<()> {
    if opts.points == 0 {
        return Err(SuiteError::NoSamples);
    }
    let c = classify_with(spec, oracle, field, opts.points, opts.seed)?;
    for a in &c.analyses {
        let (e_cov, _, e_lie) = tags(a.kind);
        let k = Some(a.kind);
        let f = Some(field);
        report.push(CheckEntry::new("cov.assembly", e_cov, f, k, a.assembly_residual, opts.tol(tol::ASSEMBLY)));
        report.push(CheckEntry::new("cov.oracle", e_cov, f, k, a.oracle_cov_residual, opts.tol(tol::ENGINES)));
        report.push(CheckEntry::new("lie.oracle", e_lie, f, k, a.oracle_lie_residual, opts.tol(tol::ENGINES)));
    }
    rotation_entries(spec, oracle, field, &c.points, opts, report)?;
    if c.base.killing.holds {
        let (stated, symmetric) = killing_identity(spec, field, &c.points)?;
        let f = Some(field);
        let k = Some(LiftKind::Complete);
        report.push(CheckEntry::new("killing_identity.stated", EqTag::E16, f, k, stated, opts.tol(tol::KILLING_IDENTITY)));
        report.push(CheckEntry::new("killing_identity.symmetric", EqTag::E16, f, k, symmetric, opts.tol(tol::KILLING_IDENTITY)));
    }
    report.audits.extend(c.audits.into_iter().map(|audit| AuditEntry { field: field.to_string(), audit }));
    for a in c.analyses {
        report.corrections.extend(a.corrections.into_iter().map(|correction| CorrectionEntry { field: field.to_string(), correction }));
    }
    Ok(())
}

/// Rotation closed forms against the antisymmetrized, lowered oracle
/// covariant derivative.
fn rotation_entries(
    spec: &ManifoldSpec,
    oracle: &Oracle,
    field: &str,
    points: &[BundlePoint],
    opts: &Options,
    report: &mut CheckReport,
) -> Result<()> {
    let mut worst = [0.0_f64; 3];
    for q in points {
        let p = LiftPoint::new(spec, field, q)?;
        for kind in LiftKind::ALL {
            let low = p.lowered(&oracle.cov_deriv_adapted(field, kind, q)?).to_matrix();
            let rot = &low - low.transpose();
            let closed = p.rotation(kind, Reading::Corrected).to_matrix();
            worst[kind as usize] = worst[kind as usize].max(diff(&rot, &closed));
        }
    }
    for kind in LiftKind::ALL {
        let (_, e_rot, _) = tags(kind);
        let r = worst[kind as usize];
        report.push(CheckEntry::new("rot.oracle", e_rot, Some(field), Some(kind), r, opts.tol(tol::ENGINES)));
    }
    Ok(())
}

/// Max residuals of the stated and the symmetric Killing identities.
pub fn killing_identity(spec: &ManifoldSpec, field: &str, points: &[BundlePoint]) -> Result<(f64, f64)> {
    let mut out = (0.0_f64, 0.0_f64);
    for q in points {
        let p = LiftPoint::new(spec, field, q)?;
        out.0 = out.0.max(matrix_max_abs(&p.killing_identity_stated()));
        out.1 = out.1.max(matrix_max_abs(&p.killing_identity_symmetric()));
    }
    Ok(out)
}

/// Whether the complete lift is closed: the base conditions and the
/// rotation blocks against their tolerances.
pub fn check_closed(spec: &ManifoldSpec, field: Option<&str>, opts: &Options) -> Result<CheckReport> {
    let mut report = CheckReport::new("check-closed", spec.name(), opts.seed, opts.points);
    let points = opts.samples(spec)?;
    for f in select_fields(spec, field)? {
        let c = closedness_check(spec, f, &points)?;
        let (fs, k) = (Some(f), Some(LiftKind::Complete));
        let t = opts.tol(tol::CLOSED_CONDITIONS);
        report.push(CheckEntry::new("closed.antisymmetric", EqTag::E14, fs, None, c.antisymmetric_residual, t));
        report.push(CheckEntry::new("closed.second_derivative", EqTag::E14, fs, None, c.second_derivative_residual, t));
        report.push(CheckEntry::new("closed.rotation", EqTag::E12, fs, k, c.rotation.max(), opts.tol(tol::ROTATION)));
    }
    Ok(report)
}

/// Both directions of the closedness equivalence as checks that must pass
/// for every field.
fn closedness_equivalence(
    spec: &ManifoldSpec,
    field: &str,
    points: &[BundlePoint],
    opts: &Options,
    report: &mut CheckReport,
) -> Result<()> {
    let c = closedness_check(spec, field, points)?;
    // conditions ⇒ closed: the rotation must vanish.
    let forward = if c.conditions_hold { c.rotation.max() } else { 0.0 };
    // closed ⇒ conditions: the conditions must vanish.
    let converse = if c.closed { c.antisymmetric_residual.max(c.second_derivative_residual) } else { 0.0 };
    let f = Some(field);
    report.push(CheckEntry::new("closed.sufficiency", EqTag::E14, f, Some(LiftKind::Complete), forward, opts.tol(tol::ROTATION)));
    report.push(CheckEntry::new("closed.necessity", EqTag::E14, f, Some(LiftKind::Complete), converse, opts.tol(tol::CLOSED_CONDITIONS)));
    Ok(())
}

/// Maximum finite-difference deviation over seeded points whose stencil
/// fits in the domain, for each step of [`FD_STEPS`].
pub fn fd_deviations(spec: &ManifoldSpec, oracle: &Oracle, quantity: FdQuantity, seed: u64) -> Result<[f64; 2]> {
    let mut out = [0.0_f64; 2];
    let mut used = 0;
    for q in sample_bundle(spec, 4 * FD_POINTS, seed) {
        if used == FD_POINTS {
            break;
        }
        let mut dev = [0.0; 2];
        let mut fits = true;
        for (d, h) in dev.iter_mut().zip(FD_STEPS) {
            match finite_difference_audit(spec, oracle, quantity, &q, h) {
                Ok(a) => *d = a.max_deviation,
                Err(OracleError::StencilOutsideDomain { .. }) => fits = false,
                Err(e) => return Err(e.into()),
            }
        }
        if fits {
            used += 1;
            out[0] = out[0].max(dev[0]);
            out[1] = out[1].max(dev[1]);
        }
    }
    Ok(out)
}

/// `|ratio / 4 − 1|` for the halving ratio of [`fd_deviations`].
pub fn fd_order_residual(dev: [f64; 2]) -> f64 {
    (dev[0] / dev[1] / 4.0 - 1.0).abs()
}

fn fd_entries(spec: &ManifoldSpec, oracle: &Oracle, opts: &Options, report: &mut CheckReport) -> Result<()> {
    for quantity in [FdQuantity::Christoffel, FdQuantity::Riemann, FdQuantity::LeviCivitaInduced] {
        let dev = fd_deviations(spec, oracle, quantity, opts.seed)?;
        let name = quantity.name();
        let entry = if dev[0] <= FD_EXACT_FLOOR {
            CheckEntry::new(format!("fd.{name}.exact"), EqTag::E3, None, None, dev[0], opts.tol(FD_EXACT_FLOOR))
        } else {
            CheckEntry::new(format!("fd.{name}.order"), EqTag::E3, None, None, fd_order_residual(dev), opts.tol(tol::FD_ORDER))
        };
        report.push(entry);
    }
    Ok(())
}

/// Every check over one spec.
pub fn full_report(spec: &ManifoldSpec, opts: &Options) -> Result<CheckReport> {
    let mut report = CheckReport::new("verify-paper", spec.name(), opts.seed, opts.points);
    let oracle = Oracle::new(spec);
    connection_entries(spec, &oracle, opts, &mut report)?;
    fd_entries(spec, &oracle, opts, &mut report)?;
    let points = opts.samples(spec)?;
    for f in select_fields(spec, None)? {
        classify_entries(spec, &oracle, f, opts, &mut report)?;
        closedness_equivalence(spec, f, &points, opts, &mut report)?;
    }
    Ok(report)
}

/// `.spec` files of a directory in name order.
pub fn catalog_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let read = std::fs::read_dir(dir).map_err(|source| SuiteError::Catalog { path: dir.to_path_buf(), source })?;
    let mut files = Vec::new();
    for e in read {
        let p = e.map_err(|source| SuiteError::Catalog { path: dir.to_path_buf(), source })?.path();
        if p.extension().is_some_and(|x| x == "spec") {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(SuiteError::EmptyCatalog(dir.to_path_buf()));
    }
    Ok(files)
}

pub fn verify_paper(dir: &Path, opts: &Options) -> Result<SuiteReport> {
    let mut reports = Vec::new();
    for path in catalog_files(dir)? {
        let spec = load_spec(&path)?;
        reports.push(full_report(&spec, opts)?);
    }
    Ok(SuiteReport { tool_version: TOOL_VERSION.to_string(), seed: opts.seed, samples: opts.points, reports })
}
