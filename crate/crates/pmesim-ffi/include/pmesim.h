#ifndef PMESIM_H
#define PMESIM_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which field of the solution to read.
 */
typedef enum PmesimField {
  PMESIM_FIELD_U = 0,
  PMESIM_FIELD_ETA = 1,
  PMESIM_FIELD_CHI = 2,
} PmesimField;

/**
 * Status codes returned by every fallible call.
 */
typedef enum PmesimStatus {
  PMESIM_STATUS_OK = 0,
  PMESIM_STATUS_NULL_POINTER = 1,
  PMESIM_STATUS_INVALID_ARGUMENT = 2,
  PMESIM_STATUS_NO_CONVERGENCE = 3,
  PMESIM_STATUS_RUNTIME_ERROR = 4,
  PMESIM_STATUS_INDEX_OUT_OF_RANGE = 5,
} PmesimStatus;

/**
 * Opaque diffusivity specification handle.
 */
typedef struct PmesimPhi {
  uint8_t _opaque[0];
} PmesimPhi;

/**
 * Opaque solution handle (times x nodes fields u, eta, chi).
 */
typedef struct PmesimSolution {
  uint8_t _opaque[0];
} PmesimSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message for this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full untruncated length.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null (query mode).
 */
uintptr_t pmesim_last_error(char *buf, uintptr_t cap);

/**
 * Constant diffusivity `Φ ≡ c` (heat flow for c = 1).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PmesimStatus pmesim_phi_constant(double c, struct PmesimPhi **out);

/**
 * Heaviside diffusivity: `Φ = low` below `threshold`, `high` above,
 * multivalued in between at the threshold.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PmesimStatus pmesim_phi_heaviside(double threshold,
                                       double low,
                                       double high,
                                       struct PmesimPhi **out);

/**
 * Regularized Heaviside diffusivity `Φ_ε = H(·−threshold)·(high−low) + low + epsilon`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PmesimStatus pmesim_phi_regularized(double threshold,
                                         double low,
                                         double high,
                                         double epsilon,
                                         struct PmesimPhi **out);

/**
 * Release a diffusivity handle. Null is a no-op.
 *
 * # Safety
 * `phi` must come from a `pmesim_phi_*` constructor and not be freed twice.
 */
void pmesim_phi_free(struct PmesimPhi *phi);

/**
 * Solve `∂ₜu = ½∂²ₓₓβ(u)` with `β(u) = Φ²(u)u` (jump-completed) on the uniform
 * grid of `grid_n` cells over `[-half_width, half_width]`, from the initial
 * values `u0[grid_n]`, over `n_steps` implicit resolvent steps up to `t_final`.
 *
 * # Safety
 * `phi` must be a live handle; `u0` must point to `grid_n` doubles; `out`
 * must be a valid pointer.
 */
enum PmesimStatus pmesim_solve(const struct PmesimPhi *phi,
                               double half_width,
                               uintptr_t grid_n,
                               const double *u0,
                               double t_final,
                               uintptr_t n_steps,
                               struct PmesimSolution **out);

/**
 * Release a solution handle. Null is a no-op.
 *
 * # Safety
 * `sol` must come from `pmesim_solve` and not be freed twice.
 */
void pmesim_solution_free(struct PmesimSolution *sol);

/**
 * Number of stored time levels (n_steps + 1), or 0 for a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
uintptr_t pmesim_solution_n_times(const struct PmesimSolution *sol);

/**
 * Number of grid nodes, or 0 for a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
uintptr_t pmesim_solution_grid_n(const struct PmesimSolution *sol);

/**
 * Copy one time level of the chosen field into `buf[grid_n]`; also writes the
 * level's time to `time_out` when non-null.
 *
 * # Safety
 * `sol` must be a live handle; `buf` must point to `grid_n` doubles.
 */
enum PmesimStatus pmesim_solution_row(const struct PmesimSolution *sol,
                                      enum PmesimField field,
                                      uintptr_t t_idx,
                                      double *buf,
                                      double *time_out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* PMESIM_H */
