#ifndef CSDL_H
#define CSDL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsdlMode {
  /**
   * `L_{1,1}` budget `lambda`.
   */
  CSDL_MODE_CONSTRAINED = 0,
  /**
   * `L_{1,1}` penalty weight `lambda_prime`.
   */
  CSDL_MODE_PENALIZED = 1,
} CsdlMode;

typedef enum CsdlStatus {
  CSDL_STATUS_OK = 0,
  CSDL_STATUS_NULL_POINTER = 1,
  CSDL_STATUS_INVALID_PARAMETER = 2,
  CSDL_STATUS_DIMENSION = 3,
  CSDL_STATUS_INVALID_INPUT = 4,
  CSDL_STATUS_NUMERICAL = 5,
  CSDL_STATUS_BUFFER_TOO_SMALL = 6,
  CSDL_STATUS_IO = 7,
  CSDL_STATUS_PANIC = 8,
} CsdlStatus;

/**
 * Result of a solve. Opaque to C.
 */
typedef struct CsdlFit CsdlFit;

typedef struct CsdlSolverOptions {
  enum CsdlMode mode;
  double lambda;
  double lambda_prime;
  size_t iterations;
  double step_scale;
  uint64_t seed;
} CsdlSolverOptions;

typedef struct CsdlBoundSet {
  double ub_componentwise;
  double ub_joint;
  double lb_componentwise;
  double lb_joint;
} CsdlBoundSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a success.
 *
 * The pointer stays valid until the next `csdl_*` call on the same thread.
 */
const char *csdl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *csdl_version(void);

/**
 * Constrained mode, `lambda = 0`, 200 iterations, step scale 0.01, seed 0.
 */
struct CsdlSolverOptions csdl_solver_options_default(void);

/**
 * Fits `atoms` atoms of length `atom_length` to the signal `y[0..len]`.
 *
 * On success `*out` receives a handle to free with [`csdl_fit_free`].
 *
 * # Safety
 * `y` must point to `len` readable doubles, `options` to a valid
 * [`CsdlSolverOptions`] and `out` to writable storage for one pointer.
 */
enum CsdlStatus csdl_solve(const double *y,
                           size_t len,
                           size_t atom_length,
                           size_t atoms,
                           const struct CsdlSolverOptions *options,
                           struct CsdlFit **out);

/**
 * Releases a fit. NULL is ignored.
 *
 * # Safety
 * `fit` must be NULL or a handle from [`csdl_solve`] not yet freed.
 */
void csdl_fit_free(struct CsdlFit *fit);

/**
 * Signal length `N`, or 0 for NULL.
 *
 * # Safety
 * `fit` must be NULL or a live handle.
 */
size_t csdl_fit_signal_length(const struct CsdlFit *fit);

/**
 * Rows of the encoding, `N - n + 1`, or 0 for NULL.
 *
 * # Safety
 * `fit` must be NULL or a live handle.
 */
size_t csdl_fit_encoding_rows(const struct CsdlFit *fit);

/**
 * Atom length `n`, or 0 for NULL.
 *
 * # Safety
 * `fit` must be NULL or a live handle.
 */
size_t csdl_fit_atom_length(const struct CsdlFit *fit);

/**
 * Number of atoms `K`, or 0 for NULL.
 *
 * # Safety
 * `fit` must be NULL or a live handle.
 */
size_t csdl_fit_atoms(const struct CsdlFit *fit);

/**
 * Length of the objective trace (iterations actually run), or 0 for NULL.
 *
 * # Safety
 * `fit` must be NULL or a live handle.
 */
size_t csdl_fit_iterations(const struct CsdlFit *fit);

/**
 * Final objective, or NaN for NULL.
 *
 * # Safety
 * `fit` must be NULL or a live handle.
 */
double csdl_fit_final_objective(const struct CsdlFit *fit);

/**
 * Copies the reconstruction (`N` values).
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `capacity` doubles.
 */
enum CsdlStatus csdl_fit_copy_reconstruction(const struct CsdlFit *fit,
                                             double *out,
                                             size_t capacity);

/**
 * Copies the encoding, column-major, `(N - n + 1) * K` values.
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `capacity` doubles.
 */
enum CsdlStatus csdl_fit_copy_encoding(const struct CsdlFit *fit, double *out, size_t capacity);

/**
 * Copies the dictionary, column-major, `n * K` values.
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `capacity` doubles.
 */
enum CsdlStatus csdl_fit_copy_dictionary(const struct CsdlFit *fit, double *out, size_t capacity);

/**
 * Copies the per-iteration objective trace.
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `capacity` doubles.
 */
enum CsdlStatus csdl_fit_copy_objective_trace(const struct CsdlFit *fit,
                                              double *out,
                                              size_t capacity);

/**
 * `R ⊗ D` for column-major `r` (`rows x atoms`) and `d` (`atom_length x atoms`).
 * Writes `rows + atom_length - 1` values.
 *
 * # Safety
 * Pointers must reference buffers of the stated sizes.
 */
enum CsdlStatus csdl_multi_convolve(const double *r,
                                    size_t rows,
                                    const double *d,
                                    size_t atom_length,
                                    size_t atoms,
                                    double *out,
                                    size_t capacity);

/**
 * Projects a column-major `rows x cols` matrix in place onto
 * `{R >= 0, sum R <= radius}`.
 *
 * # Safety
 * `values` must point to `rows * cols` writable doubles.
 */
enum CsdlStatus csdl_project_nonneg_l11_ball(double *values,
                                             size_t rows,
                                             size_t cols,
                                             double radius);

/**
 * The four sub-Gaussian risk bounds at signal length `n_signal`, atom
 * length `atom_length`, budget `lambda` and noise level `sigma`.
 *
 * # Safety
 * `out` must point to writable storage for one [`CsdlBoundSet`].
 */
enum CsdlStatus csdl_bounds(size_t n_signal,
                            size_t atom_length,
                            double lambda,
                            double sigma,
                            struct CsdlBoundSet *out);

/**
 * Penalty weight `sigma * sqrt(2 ln(2 N / delta))`.
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum CsdlStatus csdl_recommended_lambda_prime(double sigma,
                                              size_t n_signal,
                                              double delta,
                                              double *out);

/**
 * Risk bound of the penalized estimator with weight `lambda_prime` at
 * confidence `1 - delta`.
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum CsdlStatus csdl_ub_penalized(size_t n_signal,
                                  size_t atom_length,
                                  double sigma,
                                  double delta,
                                  double lambda_prime,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSDL_H */
