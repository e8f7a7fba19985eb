#ifndef COULOMB_GAS_H
#define COULOMB_GAS_H

/* Generated from the coulomb-gas-capi crate; edit the Rust source, not this file. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call in this interface.
typedef enum {
  COULOMB_STATUS_OK = 0,
  // A pointer argument was null.
  COULOMB_STATUS_NULL_POINTER = 1,
  // An argument was out of range for the call.
  COULOMB_STATUS_INVALID_ARGUMENT = 2,
  // A kernel evaluation hit the lattice origin.
  COULOMB_STATUS_SINGULAR_INPUT = 3,
  // Two particles coincide.
  COULOMB_STATUS_COINCIDENT_POINTS = 4,
  // The requested dimension, potential, or table is not supported.
  COULOMB_STATUS_UNSUPPORTED = 5,
  // A caller-provided buffer has the wrong length.
  COULOMB_STATUS_BUFFER_SIZE = 6,
  // A certified bound was violated at runtime; this is a bug, not bad input.
  COULOMB_STATUS_FLOOR_VIOLATION = 7,
  // Filesystem failure underneath a table or snapshot operation.
  COULOMB_STATUS_IO = 8,
} CoulombStatus;

// Metropolis chain handle over the unit torus.
typedef struct CoulombChain CoulombChain;

// Periodic Coulomb kernel handle.
typedef struct CoulombKernel CoulombKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Short static name for a status code, e.g. for log lines.
//
// The returned string is static, NUL-terminated, and must not be freed.
const char *coulomb_status_name(CoulombStatus status);

// Create a kernel that evaluates by Ewald summation.
//
// Only `dim == 3` is supported. On success writes a handle to `out`; free
// it with [`coulomb_kernel_free`].
//
// # Safety
//
// `out` must point to writable memory for one pointer.
CoulombStatus coulomb_kernel_new(uint32_t dim, CoulombKernel **out);

// Create a kernel backed by a spline table with `nodes`³ knots, the form
// used in sampling hot loops (~300× faster per evaluation).
//
// # Safety
//
// `out` must point to writable memory for one pointer.
CoulombStatus coulomb_kernel_tabulated(uint32_t dim, size_t nodes, CoulombKernel **out);

// Evaluate g at a displacement (any representative of the torus class).
//
// # Safety
//
// `kernel` must be a live handle, `x` must point to three doubles, and
// `out` to one writable double.
CoulombStatus coulomb_kernel_eval(const CoulombKernel *kernel, const double *x, double *out);

// The certified uniform lower bound m with g ≥ −m on the whole torus.
//
// # Safety
//
// `kernel` must be a live handle and `out` writable.
CoulombStatus coulomb_kernel_m_pot(const CoulombKernel *kernel, double *out);

// Certified lower bound on the N-particle minimum energy (ball smearing).
//
// # Safety
//
// `kernel` must be a live handle and `out` writable.
CoulombStatus coulomb_smearing_bound(const CoulombKernel *kernel, size_t n, double *out);

// Closed-form lower bound on the confined (free-space, quadratic trap)
// regularized minimum energy, −0.9R²·N^{4/3}.
//
// # Safety
//
// `out` must point to one writable double.
CoulombStatus coulomb_confined_bound(size_t n, double *out);

// Release a kernel handle. Passing null is a no-op.
//
// # Safety
//
// `kernel` must be null or a handle obtained from this interface that has
// not been freed yet; chains created from it stay valid (they share
// ownership).
void coulomb_kernel_free(CoulombKernel *kernel);

// Start a Metropolis chain for N particles at inverse temperature beta,
// from a jittered lattice keyed by `seed`. The proposal width self-tunes
// until [`coulomb_chain_finish_burn_in`] freezes it.
//
// # Safety
//
// `kernel` must be a live handle and `out` writable for one pointer.
CoulombStatus coulomb_chain_new(const CoulombKernel *kernel,
                                size_t n,
                                double beta,
                                uint64_t seed,
                                CoulombChain **out);

// Advance the chain by `count` Metropolis sweeps (N proposals each),
// refreshing cached energies on the usual cadence.
//
// # Safety
//
// `chain` must be a live handle.
CoulombStatus coulomb_chain_sweep(CoulombChain *chain, uint64_t count);

// Freeze proposal tuning; call once sampling for statistics begins.
//
// # Safety
//
// `chain` must be a live handle.
CoulombStatus coulomb_chain_finish_burn_in(CoulombChain *chain);

// Number of particles in the chain's configuration.
//
// # Safety
//
// `chain` must be a live handle and `out` writable.
CoulombStatus coulomb_chain_len(const CoulombChain *chain, size_t *out);

// Current total energy H of the configuration.
//
// # Safety
//
// `chain` must be a live handle and `out` writable.
CoulombStatus coulomb_chain_energy(const CoulombChain *chain, double *out);

// Acceptance fraction since the last tuning window.
//
// # Safety
//
// `chain` must be a live handle and `out` writable.
CoulombStatus coulomb_chain_acceptance(const CoulombChain *chain, double *out);

// Copy the positions as x0,y0,z0,x1,… into `buf`, which must hold exactly
// 3N doubles (see [`coulomb_chain_len`]).
//
// # Safety
//
// `chain` must be a live handle and `buf` writable for `len` doubles.
CoulombStatus coulomb_chain_positions(const CoulombChain *chain, double *buf, size_t len);

// Release a chain handle. Passing null is a no-op.
//
// # Safety
//
// `chain` must be null or an unfreed handle from this interface.
void coulomb_chain_free(CoulombChain *chain);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COULOMB_GAS_H */
