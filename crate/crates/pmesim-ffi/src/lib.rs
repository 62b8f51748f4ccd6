//! C ABI for the pmesim core: opaque handles, status codes, and a thread-local
//! last-error message. The header `include/pmesim.h` is generated by cbindgen
//! at build time.
//!
//! Ownership rules: every `*_new`/`pmesim_solve` output is owned by the caller
//! and released with the matching `*_free`; output buffers are caller-allocated
//! with the documented length.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use pmesim::monotone_graph::PhiSpec;
use pmesim::solver::{chi_field, evolve, PmeConfig, PmeSolution};
use pmesim::{Error, Grid1D, GridDensity, MonotoneGraph};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmesimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoConvergence = 3,
    RuntimeError = 4,
    IndexOutOfRange = 5,
}

/// Opaque diffusivity specification handle.
#[repr(C)]
pub struct PmesimPhi {
    _opaque: [u8; 0],
}

/// Opaque solution handle (times x nodes fields u, eta, chi).
#[repr(C)]
pub struct PmesimSolution {
    _opaque: [u8; 0],
}

struct SolutionInner {
    sol: PmeSolution,
    chi: Vec<Vec<f64>>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> PmesimStatus {
    match err {
        Error::NoConvergence { .. } => PmesimStatus::NoConvergence,
        Error::Config { .. } | Error::InvalidGrid(_) | Error::ScenarioUnknown(_) => {
            PmesimStatus::InvalidArgument
        }
        _ => PmesimStatus::RuntimeError,
    }
}

/// Copy the last error message for this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full untruncated length.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn pmesim_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

fn phi_out(phi: PhiSpec, out: *mut *mut PmesimPhi) -> PmesimStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return PmesimStatus::NullPointer;
    }
    let boxed = Box::into_raw(Box::new(phi)) as *mut PmesimPhi;
    unsafe { *out = boxed };
    PmesimStatus::Ok
}

/// Constant diffusivity `Φ ≡ c` (heat flow for c = 1).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmesim_phi_constant(c: f64, out: *mut *mut PmesimPhi) -> PmesimStatus {
    if !(c >= 0.0) || !c.is_finite() {
        set_error("constant diffusivity must be finite and nonnegative");
        return PmesimStatus::InvalidArgument;
    }
    phi_out(PhiSpec::constant(c), out)
}

/// Heaviside diffusivity: `Φ = low` below `threshold`, `high` above,
/// multivalued in between at the threshold.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmesim_phi_heaviside(
    threshold: f64,
    low: f64,
    high: f64,
    out: *mut *mut PmesimPhi,
) -> PmesimStatus {
    if !(threshold > 0.0) || !(low >= 0.0) || !(high >= low) {
        set_error("require threshold > 0 and 0 <= low <= high");
        return PmesimStatus::InvalidArgument;
    }
    phi_out(PhiSpec::heaviside(threshold, low, high), out)
}

/// Regularized Heaviside diffusivity `Φ_ε = H(·−threshold)·(high−low) + low + epsilon`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmesim_phi_regularized(
    threshold: f64,
    low: f64,
    high: f64,
    epsilon: f64,
    out: *mut *mut PmesimPhi,
) -> PmesimStatus {
    if !(threshold > 0.0) || !(low >= 0.0) || !(high >= low) || !(epsilon >= 0.0) {
        set_error("require threshold > 0, 0 <= low <= high, epsilon >= 0");
        return PmesimStatus::InvalidArgument;
    }
    phi_out(
        PhiSpec::regularized(PhiSpec::heaviside(threshold, low, high), epsilon),
        out,
    )
}

/// Release a diffusivity handle. Null is a no-op.
///
/// # Safety
/// `phi` must come from a `pmesim_phi_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pmesim_phi_free(phi: *mut PmesimPhi) {
    if !phi.is_null() {
        drop(Box::from_raw(phi as *mut PhiSpec));
    }
}

/// Solve `∂ₜu = ½∂²ₓₓβ(u)` with `β(u) = Φ²(u)u` (jump-completed) on the uniform
/// grid of `grid_n` cells over `[-half_width, half_width]`, from the initial
/// values `u0[grid_n]`, over `n_steps` implicit resolvent steps up to `t_final`.
///
/// # Safety
/// `phi` must be a live handle; `u0` must point to `grid_n` doubles; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmesim_solve(
    phi: *const PmesimPhi,
    half_width: f64,
    grid_n: usize,
    u0: *const f64,
    t_final: f64,
    n_steps: usize,
    out: *mut *mut PmesimSolution,
) -> PmesimStatus {
    if phi.is_null() || u0.is_null() || out.is_null() {
        set_error("null pointer argument");
        return PmesimStatus::NullPointer;
    }
    if !(half_width > 0.0) || grid_n < 8 || !(t_final > 0.0) || n_steps == 0 {
        set_error("require half_width > 0, grid_n >= 8, t_final > 0, n_steps >= 1");
        return PmesimStatus::InvalidArgument;
    }
    let phi_ref = &*(phi as *const PhiSpec);
    let values = std::slice::from_raw_parts(u0, grid_n).to_vec();
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        set_error("initial values must be finite and nonnegative");
        return PmesimStatus::InvalidArgument;
    }
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<SolutionInner, Error> {
        let grid = Grid1D::new(half_width, grid_n)?;
        let density = GridDensity::new(grid, values);
        let scan_max = 2.0 * density.norm_linf().max(1.0);
        let graph = MonotoneGraph::from_phi_with_scan(phi_ref, scan_max)?;
        let cfg = PmeConfig::new(grid, t_final, n_steps);
        let sol = evolve(&density, &graph, &cfg)?;
        let chi = chi_field(&sol, phi_ref)?;
        Ok(SolutionInner { sol, chi })
    }));
    match result {
        Ok(Ok(inner)) => {
            *out = Box::into_raw(Box::new(inner)) as *mut PmesimSolution;
            PmesimStatus::Ok
        }
        Ok(Err(e)) => {
            let code = status_of(&e);
            set_error(e.to_string());
            code
        }
        Err(_) => {
            set_error("internal panic during solve");
            PmesimStatus::RuntimeError
        }
    }
}

/// Release a solution handle. Null is a no-op.
///
/// # Safety
/// `sol` must come from `pmesim_solve` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pmesim_solution_free(sol: *mut PmesimSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol as *mut SolutionInner));
    }
}

/// Number of stored time levels (n_steps + 1), or 0 for a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pmesim_solution_n_times(sol: *const PmesimSolution) -> usize {
    if sol.is_null() {
        return 0;
    }
    (*(sol as *const SolutionInner)).sol.n_times()
}

/// Number of grid nodes, or 0 for a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pmesim_solution_grid_n(sol: *const PmesimSolution) -> usize {
    if sol.is_null() {
        return 0;
    }
    (*(sol as *const SolutionInner)).sol.grid.n
}

/// Which field of the solution to read.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmesimField {
    U = 0,
    Eta = 1,
    Chi = 2,
}

/// Copy one time level of the chosen field into `buf[grid_n]`; also writes the
/// level's time to `time_out` when non-null.
///
/// # Safety
/// `sol` must be a live handle; `buf` must point to `grid_n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pmesim_solution_row(
    sol: *const PmesimSolution,
    field: PmesimField,
    t_idx: usize,
    buf: *mut f64,
    time_out: *mut f64,
) -> PmesimStatus {
    if sol.is_null() || buf.is_null() {
        set_error("null pointer argument");
        return PmesimStatus::NullPointer;
    }
    let inner = &*(sol as *const SolutionInner);
    if t_idx >= inner.sol.n_times() {
        set_error(format!(
            "time index {t_idx} out of range (n_times = {})",
            inner.sol.n_times()
        ));
        return PmesimStatus::IndexOutOfRange;
    }
    let row: &[f64] = match field {
        PmesimField::U => &inner.sol.u[t_idx],
        PmesimField::Eta => &inner.sol.eta[t_idx],
        PmesimField::Chi => &inner.chi[t_idx],
    };
    std::ptr::copy_nonoverlapping(row.as_ptr(), buf, row.len());
    if !time_out.is_null() {
        *time_out = inner.sol.times[t_idx];
    }
    PmesimStatus::Ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            assert_eq!(
                pmesim_phi_constant(1.0, ptr::null_mut()),
                PmesimStatus::NullPointer
            );
            assert_eq!(
                pmesim_solve(
                    ptr::null(),
                    1.0,
                    64,
                    ptr::null(),
                    1.0,
                    4,
                    ptr::null_mut()
                ),
                PmesimStatus::NullPointer
            );
            pmesim_phi_free(ptr::null_mut());
            pmesim_solution_free(ptr::null_mut());
        }
    }

    #[test]
    fn invalid_phi_parameters_set_error_message() {
        unsafe {
            let mut phi: *mut PmesimPhi = ptr::null_mut();
            assert_eq!(
                pmesim_phi_heaviside(-1.0, 0.0, 1.0, &mut phi),
                PmesimStatus::InvalidArgument
            );
            let mut buf = [0i8; 128];
            let len = pmesim_last_error(buf.as_mut_ptr(), buf.len());
            assert!(len > 0);
        }
    }
}
