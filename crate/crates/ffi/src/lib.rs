//! C ABI for the csdl solver, projections and bound evaluators.
//!
//! Conventions:
//!
//! * every fallible function returns a [`CsdlStatus`]; on failure a
//!   description is available from [`csdl_last_error_message`] on the same
//!   thread;
//! * matrices are passed as column-major `double` buffers;
//! * fits are opaque [`CsdlFit`] handles released with [`csdl_fit_free`];
//! * panics never cross the boundary and are reported as `CSDL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ndarray::{Array2, ArrayView2, ShapeBuilder};

use csdl::bounds::{self, BoundInputs, BoundSet};
use csdl::projections;
use csdl::tensor_ops;
use csdl::{CsdlError, SolveResult, SolverConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsdlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Dimension = 3,
    InvalidInput = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsdlMode {
    /// `L_{1,1}` budget `lambda`.
    Constrained = 0,
    /// `L_{1,1}` penalty weight `lambda_prime`.
    Penalized = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsdlSolverOptions {
    pub mode: CsdlMode,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub iterations: usize,
    pub step_scale: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CsdlBoundSet {
    pub ub_componentwise: f64,
    pub ub_joint: f64,
    pub lb_componentwise: f64,
    pub lb_joint: f64,
}

impl From<BoundSet> for CsdlBoundSet {
    fn from(b: BoundSet) -> Self {
        CsdlBoundSet {
            ub_componentwise: b.ub_componentwise,
            ub_joint: b.ub_joint,
            lb_componentwise: b.lb_componentwise,
            lb_joint: b.lb_joint,
        }
    }
}

/// Result of a solve. Opaque to C.
pub struct CsdlFit {
    inner: SolveResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

#[derive(Debug)]
struct Failure(CsdlStatus, String);

impl From<CsdlError> for Failure {
    fn from(e: CsdlError) -> Self {
        let status = match &e {
            CsdlError::Dimension(_) => CsdlStatus::Dimension,
            CsdlError::Parameter(_) => CsdlStatus::InvalidParameter,
            CsdlError::Input(_) | CsdlError::Parse { .. } | CsdlError::Csv(_) => CsdlStatus::InvalidInput,
            CsdlError::Numerical(_) => CsdlStatus::Numerical,
            CsdlError::Io { .. } => CsdlStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CsdlStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CsdlStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CsdlStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {message}"));
            CsdlStatus::Panic
        }
    }
}

unsafe fn input_slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn matrix_view<'a>(
    data: *const f64,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<ArrayView2<'a, f64>, Failure> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure(CsdlStatus::Dimension, format!("{what} shape overflows")))?;
    let values = input_slice(data, len, what)?;
    Ok(ArrayView2::from_shape((rows, cols).f(), values).expect("length matches shape"))
}

unsafe fn write_out(src: &[f64], out: *mut f64, capacity: usize, what: &str) -> Result<(), Failure> {
    if capacity < src.len() {
        return Err(Failure(
            CsdlStatus::BufferTooSmall,
            format!("{what} needs {} values, buffer holds {capacity}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null(what));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn column_major(a: &Array2<f64>) -> Vec<f64> {
    a.t().iter().copied().collect()
}

unsafe fn fit_ref<'a>(fit: *const CsdlFit) -> Result<&'a CsdlFit, Failure> {
    fit.as_ref().ok_or_else(|| null("fit"))
}

/// Message for the last failed call on this thread, or NULL after a success.
///
/// The pointer stays valid until the next `csdl_*` call on the same thread.
#[no_mangle]
pub extern "C" fn csdl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn csdl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Constrained mode, `lambda = 0`, 200 iterations, step scale 0.01, seed 0.
#[no_mangle]
pub extern "C" fn csdl_solver_options_default() -> CsdlSolverOptions {
    CsdlSolverOptions {
        mode: CsdlMode::Constrained,
        lambda: 0.0,
        lambda_prime: 0.0,
        iterations: csdl::solver::DEFAULT_ITERATIONS,
        step_scale: csdl::solver::DEFAULT_STEP_SCALE,
        seed: 0,
    }
}

/// Fits `atoms` atoms of length `atom_length` to the signal `y[0..len]`.
///
/// On success `*out` receives a handle to free with [`csdl_fit_free`].
///
/// # Safety
/// `y` must point to `len` readable doubles, `options` to a valid
/// [`CsdlSolverOptions`] and `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn csdl_solve(
    y: *const f64,
    len: usize,
    atom_length: usize,
    atoms: usize,
    options: *const CsdlSolverOptions,
    out: *mut *mut CsdlFit,
) -> CsdlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let opts = options.as_ref().ok_or_else(|| null("options"))?;
        let signal = csdl::Signal::from_vec(input_slice(y, len, "y")?.to_vec())?;
        let base = match opts.mode {
            CsdlMode::Constrained => SolverConfig::constrained(atom_length, atoms, opts.lambda, opts.seed),
            CsdlMode::Penalized => SolverConfig::penalized(atom_length, atoms, opts.lambda_prime, opts.seed),
        };
        let cfg = base.with_iterations(opts.iterations).with_step_scale(opts.step_scale);
        let inner = csdl::solve(&signal, &cfg)?;
        *out = Box::into_raw(Box::new(CsdlFit { inner }));
        Ok(())
    })
}

/// Releases a fit. NULL is ignored.
///
/// # Safety
/// `fit` must be NULL or a handle from [`csdl_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_free(fit: *mut CsdlFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Signal length `N`, or 0 for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_signal_length(fit: *const CsdlFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.reconstruction.len())
}

/// Rows of the encoding, `N - n + 1`, or 0 for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_encoding_rows(fit: *const CsdlFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.encoding.rows())
}

/// Atom length `n`, or 0 for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_atom_length(fit: *const CsdlFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.dictionary.atom_length())
}

/// Number of atoms `K`, or 0 for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_atoms(fit: *const CsdlFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.dictionary.atoms())
}

/// Length of the objective trace (iterations actually run), or 0 for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_iterations(fit: *const CsdlFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.objective_trace.len())
}

/// Final objective, or NaN for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_final_objective(fit: *const CsdlFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.inner.final_objective)
}

/// Copies the reconstruction (`N` values).
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_copy_reconstruction(fit: *const CsdlFit, out: *mut f64, capacity: usize) -> CsdlStatus {
    guard(|| write_out(fit_ref(fit)?.inner.reconstruction.as_slice(), out, capacity, "reconstruction"))
}

/// Copies the encoding, column-major, `(N - n + 1) * K` values.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_copy_encoding(fit: *const CsdlFit, out: *mut f64, capacity: usize) -> CsdlStatus {
    guard(|| write_out(&column_major(fit_ref(fit)?.inner.encoding.values()), out, capacity, "encoding"))
}

/// Copies the dictionary, column-major, `n * K` values.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_copy_dictionary(fit: *const CsdlFit, out: *mut f64, capacity: usize) -> CsdlStatus {
    guard(|| write_out(&column_major(fit_ref(fit)?.inner.dictionary.values()), out, capacity, "dictionary"))
}

/// Copies the per-iteration objective trace.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn csdl_fit_copy_objective_trace(fit: *const CsdlFit, out: *mut f64, capacity: usize) -> CsdlStatus {
    guard(|| write_out(&fit_ref(fit)?.inner.objective_trace, out, capacity, "objective trace"))
}

/// `R ⊗ D` for column-major `r` (`rows x atoms`) and `d` (`atom_length x atoms`).
/// Writes `rows + atom_length - 1` values.
///
/// # Safety
/// Pointers must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn csdl_multi_convolve(
    r: *const f64,
    rows: usize,
    d: *const f64,
    atom_length: usize,
    atoms: usize,
    out: *mut f64,
    capacity: usize,
) -> CsdlStatus {
    guard(|| {
        let r = matrix_view(r, rows, atoms, "r")?;
        let d = matrix_view(d, atom_length, atoms, "d")?;
        let x = tensor_ops::multi_convolve(r, d)?;
        write_out(x.as_slice(), out, capacity, "out")
    })
}

/// Projects a column-major `rows x cols` matrix in place onto
/// `{R >= 0, sum R <= radius}`.
///
/// # Safety
/// `values` must point to `rows * cols` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn csdl_project_nonneg_l11_ball(
    values: *mut f64,
    rows: usize,
    cols: usize,
    radius: f64,
) -> CsdlStatus {
    guard(|| {
        let projected = projections::project_nonneg_l11_ball(matrix_view(values, rows, cols, "values")?, radius)?;
        let flat = column_major(projected.values());
        write_out(&flat, values, flat.len(), "values")
    })
}

/// The four sub-Gaussian risk bounds at signal length `n_signal`, atom
/// length `atom_length`, budget `lambda` and noise level `sigma`.
///
/// # Safety
/// `out` must point to writable storage for one [`CsdlBoundSet`].
#[no_mangle]
pub unsafe extern "C" fn csdl_bounds(
    n_signal: usize,
    atom_length: usize,
    lambda: f64,
    sigma: f64,
    out: *mut CsdlBoundSet,
) -> CsdlStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inputs = BoundInputs::new(n_signal, atom_length, lambda, sigma);
        inputs.validate()?;
        *out = BoundSet::evaluate(&inputs).into();
        Ok(())
    })
}

/// Penalty weight `sigma * sqrt(2 ln(2 N / delta))`.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn csdl_recommended_lambda_prime(
    sigma: f64,
    n_signal: usize,
    delta: f64,
    out: *mut f64,
) -> CsdlStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = bounds::recommended_lambda_prime(sigma, n_signal, delta)?;
        Ok(())
    })
}

/// Risk bound of the penalized estimator with weight `lambda_prime` at
/// confidence `1 - delta`.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn csdl_ub_penalized(
    n_signal: usize,
    atom_length: usize,
    sigma: f64,
    delta: f64,
    lambda_prime: f64,
    out: *mut f64,
) -> CsdlStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inputs = BoundInputs::new(n_signal, atom_length, 0.0, sigma).with_delta(delta);
        *out = bounds::ub_penalized(&inputs, lambda_prime)?;
        Ok(())
    })
}
