#ifndef TAILEX_H
#define TAILEX_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum TailexStatus {
  TAILEX_STATUS_OK = 0,
  TAILEX_STATUS_NULL_POINTER = 1,
  TAILEX_STATUS_INVALID_ARGUMENT = 2,
  TAILEX_STATUS_INSUFFICIENT_DATA = 3,
  TAILEX_STATUS_DEGENERATE = 4,
  TAILEX_STATUS_COLLINEAR = 5,
  TAILEX_STATUS_CONSISTENCY = 6,
  TAILEX_STATUS_IO = 7,
  TAILEX_STATUS_PANIC = 8,
  TAILEX_STATUS_OTHER = 9,
} TailexStatus;

typedef enum TailexSign {
  TAILEX_SIGN_POSITIVE = 0,
  TAILEX_SIGN_NEGATIVE = 1,
} TailexSign;

/**
 * Fitted least-squares model.
 */
typedef struct TailexOls TailexOls;

/**
 * Owned sample of `f64` values.
 */
typedef struct TailexSeries TailexSeries;

typedef struct TailexTailOptions {
  size_t min_tail;
  size_t max_candidates;
  bool discrete_shift;
  /**
   * Bootstrap draws for the goodness-of-fit p-value; 0 disables it.
   */
  size_t gof_bootstrap;
  uint64_t seed;
} TailexTailOptions;

typedef struct TailexTailFit {
  double r_min;
  double alpha;
  size_t n_tail;
  double ks;
  double std_error;
  bool thin_tail_warning;
  /**
   * NaN when no bootstrap was requested.
   */
  double gof_p_value;
} TailexTailFit;

typedef struct TailexQGaussianFit {
  double alpha;
  double scale;
  double objective;
  bool converged;
  size_t n_bins_used;
} TailexQGaussianFit;

typedef struct TailexCoefficient {
  double estimate;
  double std_error;
  double t_stat;
  double p_value;
  /**
   * Half-width of the 95% confidence interval.
   */
  double half_width;
} TailexCoefficient;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library from the same thread.
 */
const char *tailex_last_error(void);

/**
 * Static, NUL-terminated description of a status code.
 */
const char *tailex_status_str(enum TailexStatus status);

const char *tailex_version(void);

struct TailexTailOptions tailex_tail_options_default(void);

/**
 * Tail exponent of the magnitudes in `tail` at a fixed `r_min`.
 *
 * # Safety
 * `tail` must point to `len` values and `out_alpha` must be writable.
 */
enum TailexStatus tailex_mle_alpha(const double *tail,
                                   size_t len,
                                   double r_min,
                                   bool discrete_shift,
                                   double *out_alpha);

/**
 * # Safety
 * `tail` must point to `len` values and `out_ks` must be writable.
 */
enum TailexStatus tailex_ks_statistic(const double *tail,
                                      size_t len,
                                      double r_min,
                                      double alpha,
                                      double *out_ks);

/**
 * Cutoff scan and exponent for one side of `sample`. `options` may be null
 * for the defaults.
 *
 * # Safety
 * `sample` must point to `len` values, `options` must be null or valid and
 * `out` must be writable.
 */
enum TailexStatus tailex_fit_tail(const double *sample,
                                  size_t len,
                                  enum TailexSign sign,
                                  const struct TailexTailOptions *options,
                                  struct TailexTailFit *out);

/**
 * # Safety
 * `out_density` must be writable.
 */
enum TailexStatus tailex_qgaussian_pdf(double r, double alpha, double scale, double *out_density);

/**
 * Bins `sample` on the default hybrid grid and fits the q-Gaussian to the
 * resulting density.
 *
 * # Safety
 * `sample` must point to `len` values and `out` must be writable.
 */
enum TailexStatus tailex_fit_qgaussian(const double *sample,
                                       size_t len,
                                       bool unit_variance,
                                       struct TailexQGaussianFit *out);

/**
 * Least squares of `y` on an intercept and the `k` columns of the
 * row-major `n × k` matrix `x`.
 *
 * # Safety
 * `x` must point to `n·k` values, `y` to `n` values, and `out` must be
 * writable. The handle written to `out` must be released with
 * [`tailex_ols_free`].
 */
enum TailexStatus tailex_ols_fit(const double *x,
                                 size_t n,
                                 size_t k,
                                 const double *y,
                                 struct TailexOls **out);

/**
 * Number of coefficients including the intercept; 0 for a null handle.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t tailex_ols_coefficient_count(const struct TailexOls *fit);

/**
 * Coefficient `index`, with 0 the intercept.
 *
 * # Safety
 * `fit` must be null or a live handle and `out` must be writable.
 */
enum TailexStatus tailex_ols_coefficient(const struct TailexOls *fit,
                                         size_t index,
                                         struct TailexCoefficient *out);

/**
 * # Safety
 * `fit` must be null or a live handle.
 */
double tailex_ols_r_squared(const struct TailexOls *fit);

/**
 * Residual degrees of freedom.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t tailex_ols_df(const struct TailexOls *fit);

/**
 * # Safety
 * `fit` must be null or a handle from [`tailex_ols_fit`] not yet freed.
 */
void tailex_ols_free(struct TailexOls *fit);

/**
 * `n` Pareto(`alpha`, `r_min`) variates from `seed`.
 *
 * # Safety
 * `out` must be writable; release the handle with [`tailex_series_free`].
 */
enum TailexStatus tailex_gen_pareto(double alpha,
                                    double r_min,
                                    size_t n,
                                    uint64_t seed,
                                    struct TailexSeries **out);

/**
 * `n` Student-t variates on `df` degrees of freedom from `seed`.
 *
 * # Safety
 * `out` must be writable; release the handle with [`tailex_series_free`].
 */
enum TailexStatus tailex_gen_student_t(double df,
                                       size_t n,
                                       uint64_t seed,
                                       struct TailexSeries **out);

/**
 * # Safety
 * `series` must be null or a live handle.
 */
size_t tailex_series_len(const struct TailexSeries *series);

/**
 * Borrowed pointer to the values, valid until the handle is freed.
 *
 * # Safety
 * `series` must be null or a live handle.
 */
const double *tailex_series_data(const struct TailexSeries *series);

/**
 * # Safety
 * `series` must be null or a handle not yet freed.
 */
void tailex_series_free(struct TailexSeries *series);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAILEX_H */
