//! C ABI over the coulomb-gas library.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `_free` function. Every fallible call returns a [`CoulombStatus`];
//! outputs are written through pointers only on `COULOMB_STATUS_OK`. The
//! committed header lives in `include/coulomb_gas.h` and is regenerated by
//! the build script whenever the exported interface changes.
//!
//! A Rust panic crossing one of these `extern "C"` boundaries aborts the
//! process; none of the wrapped calls is expected to panic.

use coulomb_gas::equilibrium::solve_quadratic_equilibrium;
use coulomb_gas::groundstate::{certify_lower_bound, confined_lower_bound};
use coulomb_gas::kernel::TorusKernel;
use coulomb_gas::sampler::{init_rng, lattice_init, ChainState, REFRESH_EVERY};
use coulomb_gas::system::{Configuration, Domain, System};
use coulomb_gas::Error;
use std::os::raw::c_char;
use std::sync::Arc;

/// Result of every fallible call in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoulombStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range for the call.
    InvalidArgument = 2,
    /// A kernel evaluation hit the lattice origin.
    SingularInput = 3,
    /// Two particles coincide.
    CoincidentPoints = 4,
    /// The requested dimension, potential, or table is not supported.
    Unsupported = 5,
    /// A caller-provided buffer has the wrong length.
    BufferSize = 6,
    /// A certified bound was violated at runtime; this is a bug, not bad input.
    FloorViolation = 7,
    /// Filesystem failure underneath a table or snapshot operation.
    Io = 8,
}

fn status_of(e: &Error) -> CoulombStatus {
    match e {
        Error::UnsupportedDimension(_) | Error::UnsupportedPotential(_) => {
            CoulombStatus::Unsupported
        }
        Error::SingularInput(_) => CoulombStatus::SingularInput,
        Error::CoincidentPoints { .. } => CoulombStatus::CoincidentPoints,
        Error::SmearingRadius(_) | Error::InvalidArgument(_) | Error::Config(_) => {
            CoulombStatus::InvalidArgument
        }
        Error::TableFormat(_) => CoulombStatus::Unsupported,
        Error::FloorViolation(_) => CoulombStatus::FloorViolation,
        Error::Io(_) => CoulombStatus::Io,
    }
}

/// Periodic Coulomb kernel handle.
pub struct CoulombKernel {
    inner: Arc<TorusKernel>,
}

/// Metropolis chain handle over the unit torus.
pub struct CoulombChain {
    inner: ChainState,
}

/// Short static name for a status code, e.g. for log lines.
///
/// The returned string is static, NUL-terminated, and must not be freed.
#[no_mangle]
pub extern "C" fn coulomb_status_name(status: CoulombStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        CoulombStatus::Ok => b"ok\0",
        CoulombStatus::NullPointer => b"null pointer\0",
        CoulombStatus::InvalidArgument => b"invalid argument\0",
        CoulombStatus::SingularInput => b"singular input\0",
        CoulombStatus::CoincidentPoints => b"coincident points\0",
        CoulombStatus::Unsupported => b"unsupported\0",
        CoulombStatus::BufferSize => b"buffer size\0",
        CoulombStatus::FloorViolation => b"floor violation\0",
        CoulombStatus::Io => b"io\0",
    };
    name.as_ptr().cast()
}

/// Create a kernel that evaluates by Ewald summation.
///
/// Only `dim == 3` is supported. On success writes a handle to `out`; free
/// it with [`coulomb_kernel_free`].
///
/// # Safety
///
/// `out` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn coulomb_kernel_new(
    dim: u32,
    out: *mut *mut CoulombKernel,
) -> CoulombStatus {
    if out.is_null() {
        return CoulombStatus::NullPointer;
    }
    match TorusKernel::new(dim as usize) {
        Ok(k) => {
            *out = Box::into_raw(Box::new(CoulombKernel { inner: Arc::new(k) }));
            CoulombStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Create a kernel backed by a spline table with `nodes`³ knots, the form
/// used in sampling hot loops (~300× faster per evaluation).
///
/// # Safety
///
/// `out` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn coulomb_kernel_tabulated(
    dim: u32,
    nodes: usize,
    out: *mut *mut CoulombKernel,
) -> CoulombStatus {
    if out.is_null() {
        return CoulombStatus::NullPointer;
    }
    match TorusKernel::tabulated(dim as usize, nodes) {
        Ok(k) => {
            *out = Box::into_raw(Box::new(CoulombKernel { inner: Arc::new(k) }));
            CoulombStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Evaluate g at a displacement (any representative of the torus class).
///
/// # Safety
///
/// `kernel` must be a live handle, `x` must point to three doubles, and
/// `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn coulomb_kernel_eval(
    kernel: *const CoulombKernel,
    x: *const f64,
    out: *mut f64,
) -> CoulombStatus {
    if kernel.is_null() || x.is_null() || out.is_null() {
        return CoulombStatus::NullPointer;
    }
    let p = [*x, *x.add(1), *x.add(2)];
    match (*kernel).inner.eval(p) {
        Ok(v) => {
            *out = v;
            CoulombStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// The certified uniform lower bound m with g ≥ −m on the whole torus.
///
/// # Safety
///
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coulomb_kernel_m_pot(
    kernel: *const CoulombKernel,
    out: *mut f64,
) -> CoulombStatus {
    if kernel.is_null() || out.is_null() {
        return CoulombStatus::NullPointer;
    }
    *out = (*kernel).inner.m_pot();
    CoulombStatus::Ok
}

/// Certified lower bound on the N-particle minimum energy (ball smearing).
///
/// # Safety
///
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coulomb_smearing_bound(
    kernel: *const CoulombKernel,
    n: usize,
    out: *mut f64,
) -> CoulombStatus {
    if kernel.is_null() || out.is_null() {
        return CoulombStatus::NullPointer;
    }
    match certify_lower_bound(&(*kernel).inner, n) {
        Ok(b) => {
            *out = b.bound;
            CoulombStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Closed-form lower bound on the confined (free-space, quadratic trap)
/// regularized minimum energy, −0.9R²·N^{4/3}.
///
/// # Safety
///
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn coulomb_confined_bound(n: usize, out: *mut f64) -> CoulombStatus {
    if out.is_null() {
        return CoulombStatus::NullPointer;
    }
    let eq = match solve_quadratic_equilibrium(3) {
        Ok(eq) => eq,
        Err(e) => return status_of(&e),
    };
    match confined_lower_bound(&eq, n) {
        Ok(b) => {
            *out = b.bound;
            CoulombStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Release a kernel handle. Passing null is a no-op.
///
/// # Safety
///
/// `kernel` must be null or a handle obtained from this interface that has
/// not been freed yet; chains created from it stay valid (they share
/// ownership).
#[no_mangle]
pub unsafe extern "C" fn coulomb_kernel_free(kernel: *mut CoulombKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Start a Metropolis chain for N particles at inverse temperature beta,
/// from a jittered lattice keyed by `seed`. The proposal width self-tunes
/// until [`coulomb_chain_finish_burn_in`] freezes it.
///
/// # Safety
///
/// `kernel` must be a live handle and `out` writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn coulomb_chain_new(
    kernel: *const CoulombKernel,
    n: usize,
    beta: f64,
    seed: u64,
    out: *mut *mut CoulombChain,
) -> CoulombStatus {
    if kernel.is_null() || out.is_null() {
        return CoulombStatus::NullPointer;
    }
    let arc = (*kernel).inner.clone();
    let build = || -> coulomb_gas::Result<ChainState> {
        let system = System::torus(arc);
        let mut rng = init_rng(seed, 0);
        let cfg = Configuration::new(Domain::Torus, lattice_init(n, 0.35, &mut rng))?;
        ChainState::new(system, cfg, beta, seed, 0)
    };
    match build() {
        Ok(chain) => {
            *out = Box::into_raw(Box::new(CoulombChain { inner: chain }));
            CoulombStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Advance the chain by `count` Metropolis sweeps (N proposals each),
/// refreshing cached energies on the usual cadence.
///
/// # Safety
///
/// `chain` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn coulomb_chain_sweep(
    chain: *mut CoulombChain,
    count: u64,
) -> CoulombStatus {
    if chain.is_null() {
        return CoulombStatus::NullPointer;
    }
    let c = &mut (*chain).inner;
    for _ in 0..count {
        if let Err(e) = c.metropolis_sweep() {
            return status_of(&e);
        }
        if c.sweep() % REFRESH_EVERY == 0 {
            if let Err(e) = c.refresh() {
                return status_of(&e);
            }
        }
    }
    CoulombStatus::Ok
}

/// Freeze proposal tuning; call once sampling for statistics begins.
///
/// # Safety
///
/// `chain` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn coulomb_chain_finish_burn_in(chain: *mut CoulombChain) -> CoulombStatus {
    if chain.is_null() {
        return CoulombStatus::NullPointer;
    }
    (*chain).inner.finish_burn_in();
    CoulombStatus::Ok
}

/// Number of particles in the chain's configuration.
///
/// # Safety
///
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coulomb_chain_len(
    chain: *const CoulombChain,
    out: *mut usize,
) -> CoulombStatus {
    if chain.is_null() || out.is_null() {
        return CoulombStatus::NullPointer;
    }
    *out = (*chain).inner.configuration().len();
    CoulombStatus::Ok
}

/// Current total energy H of the configuration.
///
/// # Safety
///
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coulomb_chain_energy(
    chain: *const CoulombChain,
    out: *mut f64,
) -> CoulombStatus {
    if chain.is_null() || out.is_null() {
        return CoulombStatus::NullPointer;
    }
    *out = (*chain).inner.energy();
    CoulombStatus::Ok
}

/// Acceptance fraction since the last tuning window.
///
/// # Safety
///
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn coulomb_chain_acceptance(
    chain: *const CoulombChain,
    out: *mut f64,
) -> CoulombStatus {
    if chain.is_null() || out.is_null() {
        return CoulombStatus::NullPointer;
    }
    *out = (*chain).inner.acceptance();
    CoulombStatus::Ok
}

/// Copy the positions as x0,y0,z0,x1,… into `buf`, which must hold exactly
/// 3N doubles (see [`coulomb_chain_len`]).
///
/// # Safety
///
/// `chain` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn coulomb_chain_positions(
    chain: *const CoulombChain,
    buf: *mut f64,
    len: usize,
) -> CoulombStatus {
    if chain.is_null() || buf.is_null() {
        return CoulombStatus::NullPointer;
    }
    let positions = (*chain).inner.configuration().positions();
    if len != 3 * positions.len() {
        return CoulombStatus::BufferSize;
    }
    for (i, p) in positions.iter().enumerate() {
        for (a, &coord) in p.iter().enumerate() {
            *buf.add(3 * i + a) = coord;
        }
    }
    CoulombStatus::Ok
}

/// Release a chain handle. Passing null is a no-op.
///
/// # Safety
///
/// `chain` must be null or an unfreed handle from this interface.
#[no_mangle]
pub unsafe extern "C" fn coulomb_chain_free(chain: *mut CoulombChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}
