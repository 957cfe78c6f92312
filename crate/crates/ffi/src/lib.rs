//! C ABI over the `kato` library.
//!
//! Every fallible call returns a [`KatoStatus`]; on failure a description is
//! available from [`kato_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new` functions and released by the matching
//! `*_free`. Matrices cross the boundary as row-major arrays of
//! [`KatoComplex`], with the caller passing the buffer length in elements.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kato::contour::{auto_basis, continue_basis, ContourSpec, InitPolicy, Mesh, RunOptions, RunReport};
use kato::problems::{lookup, ProblemSpec};
use kato::schemes::SchemeSpec;
use kato::spectral::{stable_projector, SpectralHalf, GAP_TOL};
use kato::{CMatrix, KatoError};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KatoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    DimensionMismatch = 4,
    BufferTooSmall = 5,
    InitNotInRange = 6,
    Io = 7,
    SingularMatrix = 20,
    RankDeficient = 21,
    SpectralGapViolation = 22,
    EmptySubspace = 23,
    DegenerateDuality = 24,
    DomainViolation = 25,
    RankCollapse = 26,
    NonFiniteState = 27,
    NoConvergence = 28,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KatoComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for KatoComplex {
    fn from(z: Complex64) -> Self {
        KatoComplex { re: z.re, im: z.im }
    }
}

impl From<KatoComplex> for Complex64 {
    fn from(z: KatoComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KatoCounters {
    pub steps: u64,
    /// Projector points consumed, summed over steps.
    pub p_evals: u64,
    /// Fresh family evaluations actually performed.
    pub p_evals_computed: u64,
    pub mat_mults: u64,
}

/// Spectral half-plane selector for [`kato_stable_projector`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KatoHalf {
    Stable = 0,
    Unstable = 1,
}

pub struct KatoProblem {
    spec: ProblemSpec,
}

pub struct KatoScheme {
    scheme: SchemeSpec,
}

pub struct KatoMesh {
    mesh: Mesh,
}

pub struct KatoReport {
    report: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &KatoError) -> KatoStatus {
    match e {
        KatoError::DimensionMismatch { .. } => KatoStatus::DimensionMismatch,
        KatoError::InvalidArgument(_) => KatoStatus::InvalidArgument,
        KatoError::Parse(_) => KatoStatus::Parse,
        KatoError::Io(_) => KatoStatus::Io,
        KatoError::SingularMatrix { .. } => KatoStatus::SingularMatrix,
        KatoError::RankDeficient { .. } => KatoStatus::RankDeficient,
        KatoError::SpectralGapViolation { .. } => KatoStatus::SpectralGapViolation,
        KatoError::EmptySubspace => KatoStatus::EmptySubspace,
        KatoError::DegenerateDuality => KatoStatus::DegenerateDuality,
        KatoError::DomainViolation { .. } => KatoStatus::DomainViolation,
        KatoError::InitNotInRange { .. } => KatoStatus::InitNotInRange,
        KatoError::RankCollapse { .. } => KatoStatus::RankCollapse,
        KatoError::NonFiniteState { .. } => KatoStatus::NonFiniteState,
        KatoError::NoConvergence { .. } => KatoStatus::NoConvergence,
    }
}

struct Fail(KatoStatus, String);

impl From<KatoError> for Fail {
    fn from(e: KatoError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(KatoStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> KatoStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => KatoStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            KatoStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(KatoStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn read_matrix(data: *const KatoComplex, rows: usize, cols: usize) -> Result<CMatrix, Fail> {
    if data.is_null() {
        return Err(null("matrix data"));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Fail(KatoStatus::InvalidArgument, "matrix size overflows".into()))?;
    let entries = std::slice::from_raw_parts(data, len);
    Ok(CMatrix::from_vec(
        rows,
        cols,
        entries.iter().map(|&z| z.into()).collect(),
    )?)
}

unsafe fn copy_matrix(m: &CMatrix, out: *mut KatoComplex, len: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    let needed = m.rows() * m.cols();
    if len < needed {
        return Err(Fail(
            KatoStatus::BufferTooSmall,
            format!("buffer holds {len} entries, {needed} needed"),
        ));
    }
    let dst = std::slice::from_raw_parts_mut(out, needed);
    for (d, s) in dst.iter_mut().zip(m.as_slice()) {
        *d = (*s).into();
    }
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kato_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Nonzero if `status` denotes a numerical failure (as opposed to bad input).
#[no_mangle]
pub extern "C" fn kato_status_is_numerical(status: KatoStatus) -> bool {
    (status as i32) >= 20 && status != KatoStatus::Panic
}

/// Looks up a problem by id (`moebius`, `rank1`, `evans-toy`,
/// `random:<seed>:<n>:<k>`).
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kato_problem_new(id: *const c_char, out: *mut *mut KatoProblem) -> KatoStatus {
    guard(|| {
        let id = read_str(id, "problem id")?;
        let spec = lookup(id)?;
        write_out(out, KatoProblem { spec }, "out")
    })
}

/// # Safety
/// `problem` must come from [`kato_problem_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kato_problem_free(problem: *mut KatoProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Ambient dimension `n`, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_problem_dim(problem: *const KatoProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.spec.family.dim())
}

/// Subspace dimension `k`, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_problem_rank(problem: *const KatoProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.spec.family.rank())
}

/// Writes `P(lambda)` (n × n, row-major) into `out`.
///
/// # Safety
/// `problem` must be a live handle; `out` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn kato_problem_eval(
    problem: *const KatoProblem,
    lambda: KatoComplex,
    out: *mut KatoComplex,
    len: usize,
) -> KatoStatus {
    guard(|| {
        let problem = handle(problem, "problem")?;
        let p = problem.spec.family.eval(lambda.into())?;
        copy_matrix(p.matrix(), out, len)
    })
}

/// Parses a scheme id (`greedy1`, `brz1`, `greedy2`, `rich2`, `rich3`,
/// `greedy3`, `lift:<scheme>`).
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kato_scheme_new(id: *const c_char, out: *mut *mut KatoScheme) -> KatoStatus {
    guard(|| {
        let scheme: SchemeSpec = read_str(id, "scheme id")?.parse()?;
        write_out(out, KatoScheme { scheme }, "out")
    })
}

/// # Safety
/// `scheme` must come from [`kato_scheme_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kato_scheme_free(scheme: *mut KatoScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

/// Nominal order of accuracy, or 0 for NULL.
///
/// # Safety
/// `scheme` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_scheme_order(scheme: *const KatoScheme) -> u32 {
    scheme.as_ref().map_or(0, |s| s.scheme.nominal_order())
}

/// Builds a mesh from a contour descriptor such as `circle:0,0:0.5:256`.
///
/// # Safety
/// `descriptor` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kato_mesh_new(descriptor: *const c_char, out: *mut *mut KatoMesh) -> KatoStatus {
    guard(|| {
        let contour: ContourSpec = read_str(descriptor, "contour descriptor")?.parse()?;
        let mesh = contour.mesh()?;
        write_out(out, KatoMesh { mesh }, "out")
    })
}

/// The problem's suggested contour, meshed.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kato_mesh_for_problem(problem: *const KatoProblem, out: *mut *mut KatoMesh) -> KatoStatus {
    guard(|| {
        let problem = handle(problem, "problem")?;
        let mesh = problem.spec.contour.mesh()?;
        write_out(out, KatoMesh { mesh }, "out")
    })
}

/// # Safety
/// `mesh` must come from a `kato_mesh_*` constructor and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn kato_mesh_free(mesh: *mut KatoMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of mesh points (`L + 1`), or 0 for NULL.
///
/// # Safety
/// `mesh` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_mesh_points(mesh: *const KatoMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.mesh.points().len())
}

/// # Safety
/// `mesh` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_mesh_closed(mesh: *const KatoMesh) -> bool {
    mesh.as_ref().is_some_and(|m| m.mesh.closed())
}

/// Continues a basis around `mesh`. `r0` is `rows × cols`, row-major; pass
/// NULL for the orthonormal basis of `range P(λ₀)`. With `project` set, an
/// `r0` outside the range is projected onto it instead of rejected.
///
/// # Safety
/// Handles must be live; `r0` must be NULL or hold `rows * cols` entries;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kato_continue(
    problem: *const KatoProblem,
    scheme: *const KatoScheme,
    mesh: *const KatoMesh,
    r0: *const KatoComplex,
    rows: usize,
    cols: usize,
    project: bool,
    out: *mut *mut KatoReport,
) -> KatoStatus {
    guard(|| {
        let problem = handle(problem, "problem")?;
        let scheme = handle(scheme, "scheme")?;
        let mesh = handle(mesh, "mesh")?;
        let family = problem.spec.family.as_ref();
        let r0 = if r0.is_null() {
            auto_basis(family, mesh.mesh.start())?
        } else {
            read_matrix(r0, rows, cols)?
        };
        let opts = RunOptions {
            init_policy: if project {
                InitPolicy::Project
            } else {
                InitPolicy::Require
            },
            ..RunOptions::default()
        };
        let report = continue_basis(family, &scheme.scheme, &mesh.mesh, &r0, &opts)?;
        write_out(out, KatoReport { report }, "out")
    })
}

/// # Safety
/// `report` must come from [`kato_continue`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kato_report_free(report: *mut KatoReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of frames (`L + 1`), or 0 for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kato_report_frames(report: *const KatoReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.frames.len())
}

/// Writes `|R_L - R_0|_F`. Fails with `InvalidArgument` on an open mesh.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kato_report_closure_error(report: *const KatoReport, out: *mut f64) -> KatoStatus {
    guard(|| {
        let report = handle(report, "report")?;
        let value = kato::contour::closure_error(&report.report)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = value;
        Ok(())
    })
}

/// Writes the absolute and relative drift `max_j |P_j R_j - R_j|_F`.
///
/// # Safety
/// `report` must be a live handle; `drift` and `drift_rel` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kato_report_drift(
    report: *const KatoReport,
    drift: *mut f64,
    drift_rel: *mut f64,
) -> KatoStatus {
    guard(|| {
        let report = handle(report, "report")?;
        if drift.is_null() || drift_rel.is_null() {
            return Err(null("out"));
        }
        *drift = report.report.drift;
        *drift_rel = report.report.drift_rel;
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kato_report_counters(report: *const KatoReport, out: *mut KatoCounters) -> KatoStatus {
    guard(|| {
        let report = handle(report, "report")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = &report.report.counters;
        *out = KatoCounters {
            steps: c.steps,
            p_evals: c.p_evals,
            p_evals_computed: c.p_evals_computed,
            mat_mults: c.mat_mults,
        };
        Ok(())
    })
}

/// Copies frame `index` (its point `λ_j` and the `n × k` basis, row-major).
///
/// # Safety
/// `report` must be a live handle; `lambda` must be writable; `out` must
/// hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn kato_report_frame(
    report: *const KatoReport,
    index: usize,
    lambda: *mut KatoComplex,
    out: *mut KatoComplex,
    len: usize,
) -> KatoStatus {
    guard(|| {
        let report = handle(report, "report")?;
        let frame = report.report.frames.get(index).ok_or_else(|| {
            Fail(
                KatoStatus::InvalidArgument,
                format!("frame {index} out of range ({} frames)", report.report.frames.len()),
            )
        })?;
        let lambda = lambda.as_mut().ok_or_else(|| null("lambda"))?;
        copy_matrix(&frame.r, out, len)?;
        *lambda = frame.lambda.into();
        Ok(())
    })
}

/// Spectral projector of the `n × n` matrix `a` (row-major) onto the
/// invariant subspace of the chosen half-plane. Writes the projector into
/// `out` and its rank into `rank`.
///
/// # Safety
/// `a` must hold `n * n` entries, `out` must hold `len` entries, `rank`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn kato_stable_projector(
    a: *const KatoComplex,
    n: usize,
    half: KatoHalf,
    out: *mut KatoComplex,
    len: usize,
    rank: *mut usize,
) -> KatoStatus {
    guard(|| {
        let a = read_matrix(a, n, n)?;
        let half = match half {
            KatoHalf::Stable => SpectralHalf::Stable,
            KatoHalf::Unstable => SpectralHalf::Unstable,
        };
        let p = stable_projector(&a, half, GAP_TOL)?;
        let rank = rank.as_mut().ok_or_else(|| null("rank"))?;
        copy_matrix(p.matrix(), out, len)?;
        *rank = p.rank();
        Ok(())
    })
}
