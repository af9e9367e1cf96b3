//! C ABI over `liftcheck`.
//!
//! Every function returns an [`LcStatus`]; on failure the message is kept in a
//! thread-local slot readable through [`lc_last_error`]. Specs are opaque
//! handles owned by the caller and released with [`lc_spec_free`]. Strings
//! returned through out-parameters are released with [`lc_string_free`].
//!
//! Array outputs are row-major and written to caller buffers whose lengths are
//! passed explicitly; a short buffer is an error and nothing is written.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use liftcheck::bundle::{Block2Tensor, BundleConnection, BundleError, BundleJet, BundlePoint, LiftKind};
use liftcheck::cli::suite::full_report;
use liftcheck::cli::{check_closed, classify, load_spec, parse_spec, verify_connection, LoadError, Options, SuiteError};
use liftcheck::geometry::{GeometryError, ManifoldSpec};
use liftcheck::killing::{KillingError, LiftPoint, Reading};
use liftcheck::oracle::{Oracle, OracleError};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    UnknownField = 5,
    DimensionMismatch = 6,
    BufferTooSmall = 7,
    Numeric = 8,
    InvalidArgument = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcLiftKind {
    Vertical = 0,
    Complete = 1,
    Horizontal = 2,
}

/// Which engine produces a derivative: the closed forms with the corrected
/// reading, the closed forms without the index and sign corrections, or the induced-coordinate
/// oracle.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcEngine {
    ClosedForm = 0,
    Uncorrected = 1,
    Oracle = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcCommand {
    VerifyConnection = 0,
    Classify = 1,
    CheckClosed = 2,
    Full = 3,
}

/// A parsed chart with its fields. Opaque to C.
pub struct LcSpec {
    spec: ManifoldSpec,
    fields: Vec<CString>,
    oracle: OnceLock<Oracle>,
}

impl LcSpec {
    fn new(spec: ManifoldSpec) -> LcSpec {
        let fields = spec.vector_fields().iter().map(|f| CString::new(f.name.as_str()).unwrap()).collect();
        LcSpec { spec, fields, oracle: OnceLock::new() }
    }

    fn oracle(&self) -> &Oracle {
        self.oracle.get_or_init(|| Oracle::new(&self.spec))
    }
}

struct Failure {
    status: LcStatus,
    message: String,
}

impl Failure {
    fn new(status: LcStatus, message: impl Into<String>) -> Failure {
        Failure { status, message: message.into() }
    }
}

type Outcome<T> = Result<T, Failure>;

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Failure {
        let status = match e {
            GeometryError::UnknownField(_) | GeometryError::UnknownForm(_) => LcStatus::UnknownField,
            GeometryError::DimensionMismatch { .. } => LcStatus::DimensionMismatch,
            GeometryError::Eval(_) | GeometryError::SingularMetric { .. } => LcStatus::Numeric,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<BundleError> for Failure {
    fn from(e: BundleError) -> Failure {
        match e {
            BundleError::Geometry(g) => g.into(),
            BundleError::DimensionMismatch { .. } => Failure::new(LcStatus::DimensionMismatch, e.to_string()),
            BundleError::FrameMismatch { .. } | BundleError::VarianceMismatch { .. } => {
                Failure::new(LcStatus::InvalidArgument, e.to_string())
            }
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Failure {
        match e {
            OracleError::Geometry(g) => g.into(),
            OracleError::UnknownField(_) => Failure::new(LcStatus::UnknownField, e.to_string()),
            OracleError::DimensionMismatch { .. } => Failure::new(LcStatus::DimensionMismatch, e.to_string()),
            OracleError::StepOutOfRange { .. } | OracleError::StencilOutsideDomain { .. } => {
                Failure::new(LcStatus::InvalidArgument, e.to_string())
            }
            OracleError::SingularInducedMetric { .. } => Failure::new(LcStatus::Numeric, e.to_string()),
        }
    }
}

impl From<KillingError> for Failure {
    fn from(e: KillingError) -> Failure {
        match e {
            KillingError::Geometry(g) => g.into(),
            KillingError::Bundle(b) => b.into(),
            KillingError::Oracle(o) => o.into(),
            KillingError::NoSamples => Failure::new(LcStatus::InvalidArgument, e.to_string()),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Failure {
        let status = match e {
            LoadError::Io { .. } => LcStatus::Io,
            _ => LcStatus::Parse,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<SuiteError> for Failure {
    fn from(e: SuiteError) -> Failure {
        match e {
            SuiteError::Load(l) => l.into(),
            SuiteError::UnknownField { .. } => Failure::new(LcStatus::UnknownField, e.to_string()),
            SuiteError::NoSamples => Failure::new(LcStatus::InvalidArgument, e.to_string()),
            SuiteError::Catalog { .. } | SuiteError::EmptyCatalog(_) => Failure::new(LcStatus::Io, e.to_string()),
            SuiteError::Geometry(g) => g.into(),
            SuiteError::Bundle(b) => b.into(),
            SuiteError::Oracle(o) => o.into(),
            SuiteError::Killing(k) => k.into(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Outcome<()>) -> LcStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    let failure = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return LcStatus::Ok,
        Ok(Err(failure)) => failure,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Failure::new(LcStatus::Panic, format!("internal error: {message}"))
        }
    };
    set_last_error(&failure.message);
    failure.status
}

unsafe fn c_str<'a>(ptr: *const c_char, what: &str) -> Outcome<&'a str> {
    if ptr.is_null() {
        return Err(Failure::new(LcStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| Failure::new(LcStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a>(spec: *const LcSpec) -> Outcome<&'a LcSpec> {
    spec.as_ref().ok_or_else(|| Failure::new(LcStatus::NullArgument, "spec is null"))
}

unsafe fn coords<'a>(ptr: *const f64, n: usize, what: &str, spec: &LcSpec) -> Outcome<&'a [f64]> {
    if n != spec.spec.dim() {
        return Err(Failure::new(LcStatus::DimensionMismatch, format!("{what} has {n} coordinates, chart has {}", spec.spec.dim())));
    }
    if ptr.is_null() {
        return Err(Failure::new(LcStatus::NullArgument, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, n))
}

unsafe fn write_out(values: &[f64], out: *mut f64, out_len: usize) -> Outcome<()> {
    if out.is_null() {
        return Err(Failure::new(LcStatus::NullArgument, "output buffer is null"));
    }
    if out_len < values.len() {
        return Err(Failure::new(LcStatus::BufferTooSmall, format!("output needs {} doubles, buffer holds {out_len}", values.len())));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

fn lift_kind(kind: u32) -> Outcome<LiftKind> {
    match kind {
        0 => Ok(LiftKind::Vertical),
        1 => Ok(LiftKind::Complete),
        2 => Ok(LiftKind::Horizontal),
        _ => Err(Failure::new(LcStatus::InvalidArgument, format!("unknown lift kind {kind}"))),
    }
}

fn engine_of(engine: u32) -> Outcome<LcEngine> {
    match engine {
        0 => Ok(LcEngine::ClosedForm),
        1 => Ok(LcEngine::Uncorrected),
        2 => Ok(LcEngine::Oracle),
        _ => Err(Failure::new(LcStatus::InvalidArgument, format!("unknown engine {engine}"))),
    }
}

fn row_major(t: &Block2Tensor) -> Vec<f64> {
    let m = t.to_matrix();
    (0..m.nrows()).flat_map(|r| m.row(r).iter().copied().collect::<Vec<_>>()).collect()
}

fn flatten(c: &BundleConnection) -> Vec<f64> {
    c.patterns().iter().flat_map(|(_, t)| t.as_slice().iter().copied()).collect()
}

/// Version of the library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn lc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Parse a spec from its text. `name` may be NULL; it names the chart when
/// the text does not.
///
/// # Safety
/// `text` and a non-NULL `name` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_spec_from_text(text: *const c_char, name: *const c_char, out: *mut *mut LcSpec) -> LcStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(LcStatus::NullArgument, "out is null"));
        }
        let body = c_str(text, "text")?;
        let name = if name.is_null() { "spec" } else { c_str(name, "name")? };
        let spec = parse_spec(body, name)?;
        *out = Box::into_raw(Box::new(LcSpec::new(spec)));
        Ok(())
    })
}

/// Load a spec file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_spec_from_path(path: *const c_char, out: *mut *mut LcSpec) -> LcStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(LcStatus::NullArgument, "out is null"));
        }
        let spec = load_spec(c_str(path, "path")?)?;
        *out = Box::into_raw(Box::new(LcSpec::new(spec)));
        Ok(())
    })
}

/// Release a spec. NULL is ignored.
///
/// # Safety
/// `spec` must come from `lc_spec_from_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lc_spec_free(spec: *mut LcSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Chart dimension, or 0 for NULL.
///
/// # Safety
/// `spec` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_spec_dim(spec: *const LcSpec) -> usize {
    spec.as_ref().map_or(0, |s| s.spec.dim())
}

/// Number of declared vector fields, or 0 for NULL.
///
/// # Safety
/// `spec` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_spec_field_count(spec: *const LcSpec) -> usize {
    spec.as_ref().map_or(0, |s| s.fields.len())
}

/// Name of the vector field at `index`, owned by the handle; NULL when out of
/// range.
///
/// # Safety
/// `spec` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_spec_field_name(spec: *const LcSpec, index: usize) -> *const c_char {
    spec.as_ref().and_then(|s| s.fields.get(index)).map_or(std::ptr::null(), |c| c.as_ptr())
}

/// Christoffel symbols `Γ^h_{ji}` at `x`, `n³` values indexed `[h][j][i]`.
///
/// # Safety
/// `x` holds `n` doubles; `out` holds `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lc_christoffel(spec: *const LcSpec, x: *const f64, n: usize, out: *mut f64, out_len: usize) -> LcStatus {
    guard(|| {
        let s = handle(spec)?;
        let x = coords(x, n, "x", s)?;
        write_out(s.spec.christoffel_at(x)?.as_slice(), out, out_len)
    })
}

/// Curvature `R^h_{kji}` at `x`, `n⁴` values indexed `[h][k][j][i]`.
///
/// # Safety
/// `x` holds `n` doubles; `out` holds `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lc_riemann(spec: *const LcSpec, x: *const f64, n: usize, out: *mut f64, out_len: usize) -> LcStatus {
    guard(|| {
        let s = handle(spec)?;
        let x = coords(x, n, "x", s)?;
        write_out(s.spec.riemann_at(x)?.as_slice(), out, out_len)
    })
}

/// Adapted-frame connection at `(x, y)`: `8·n³` values, eight `[h][j][i]`
/// arrays in the order h_ji, h_jbi, h_bji, h_bjbi, bh_ji, bh_jbi, bh_bji,
/// bh_bjbi (`b` marks a fiber index). `engine` is an `LcEngine`; both closed
/// form engines give the same table.
///
/// # Safety
/// `x` and `y` hold `n` doubles; `out` holds `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lc_connection(
    spec: *const LcSpec,
    engine: u32,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> LcStatus {
    guard(|| {
        let s = handle(spec)?;
        let q = BundlePoint::new(coords(x, n, "x", s)?.to_vec(), coords(y, n, "y", s)?.to_vec());
        let c = match engine_of(engine)? {
            LcEngine::Oracle => s.oracle().connection_adapted(&q)?,
            LcEngine::ClosedForm | LcEngine::Uncorrected => BundleJet::at(&s.spec, &q)?.connection(),
        };
        write_out(&flatten(&c), out, out_len)
    })
}

#[derive(Clone, Copy)]
enum Derivative {
    Lie,
    Covariant,
}

#[allow(clippy::too_many_arguments)]
unsafe fn lift_derivative(
    which: Derivative,
    spec: *const LcSpec,
    field: *const c_char,
    kind: u32,
    engine: u32,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> LcStatus {
    guard(|| {
        let s = handle(spec)?;
        let field = c_str(field, "field")?;
        let kind = lift_kind(kind)?;
        let engine = engine_of(engine)?;
        let q = BundlePoint::new(coords(x, n, "x", s)?.to_vec(), coords(y, n, "y", s)?.to_vec());
        let t = match (engine, which) {
            (LcEngine::Oracle, Derivative::Lie) => s.oracle().lie_derivative_adapted(field, kind, &q)?,
            (LcEngine::Oracle, Derivative::Covariant) => s.oracle().cov_deriv_adapted(field, kind, &q)?,
            (closed, which) => {
                let reading = if closed == LcEngine::Uncorrected { Reading::Uncorrected } else { Reading::Corrected };
                let p = LiftPoint::new(&s.spec, field, &q)?;
                match which {
                    Derivative::Lie => p.lie(kind, reading),
                    Derivative::Covariant => p.cov_deriv(kind, reading),
                }
            }
        };
        write_out(&row_major(&t), out, out_len)
    })
}

/// Lie derivative of the metric along a lift of `field`, adapted frame,
/// `(2n)²` values row-major with base indices first. `kind` is an
/// `LcLiftKind`, `engine` an `LcEngine`.
///
/// # Safety
/// `field` is NUL-terminated; `x` and `y` hold `n` doubles; `out` holds
/// `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lc_lie_derivative(
    spec: *const LcSpec,
    field: *const c_char,
    kind: u32,
    engine: u32,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> LcStatus {
    lift_derivative(Derivative::Lie, spec, field, kind, engine, x, y, n, out, out_len)
}

/// Covariant derivative `∇_γ X^α` of a lift of `field`, adapted frame,
/// `(2n)²` values row-major in `(γ, α)`.
///
/// # Safety
/// As for `lc_lie_derivative`.
#[no_mangle]
pub unsafe extern "C" fn lc_covariant_derivative(
    spec: *const LcSpec,
    field: *const c_char,
    kind: u32,
    engine: u32,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> LcStatus {
    lift_derivative(Derivative::Covariant, spec, field, kind, engine, x, y, n, out, out_len)
}

/// Run a check suite and return its JSON report through `json_out` (release
/// with `lc_string_free`). `command` is an `LcCommand`; `field` may be NULL
/// for all fields; `tol` below zero keeps the built-in tolerances. `passed`
/// (may be NULL) receives 1 when every check passed and no
/// counterexample candidate was found, else 0.
///
/// # Safety
/// Non-NULL pointers must be valid for their documented use.
#[no_mangle]
pub unsafe extern "C" fn lc_run_check(
    spec: *const LcSpec,
    command: u32,
    field: *const c_char,
    points: usize,
    seed: u64,
    tol: f64,
    json_out: *mut *mut c_char,
    passed: *mut i32,
) -> LcStatus {
    guard(|| {
        let s = handle(spec)?;
        if json_out.is_null() {
            return Err(Failure::new(LcStatus::NullArgument, "json_out is null"));
        }
        let field = if field.is_null() { None } else { Some(c_str(field, "field")?) };
        if tol.is_nan() {
            return Err(Failure::new(LcStatus::InvalidArgument, "tolerance is NaN"));
        }
        let opts = Options { points, seed, tol: (tol >= 0.0).then_some(tol) };
        let report = match command {
            0 => verify_connection(&s.spec, &opts)?,
            1 => classify(&s.spec, field, &opts)?,
            2 => check_closed(&s.spec, field, &opts)?,
            3 => full_report(&s.spec, &opts)?,
            _ => return Err(Failure::new(LcStatus::InvalidArgument, format!("unknown command {command}"))),
        };
        if !passed.is_null() {
            *passed = i32::from(report.success());
        }
        *json_out = CString::new(report.to_json()).unwrap().into_raw();
        Ok(())
    })
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
