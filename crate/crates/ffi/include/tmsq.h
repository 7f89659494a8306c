#ifndef TMSQ_H
#define TMSQ_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum TmsqStatus {
  TMSQ_STATUS_OK = 0,
  TMSQ_STATUS_NULL_POINTER = 1,
  TMSQ_STATUS_INVALID_INPUT = 2,
  TMSQ_STATUS_DOMAIN = 3,
  TMSQ_STATUS_INFEASIBLE = 4,
  TMSQ_STATUS_INFEASIBLE_PAIR = 5,
  TMSQ_STATUS_NO_SQUEEZING = 6,
  TMSQ_STATUS_ILL_CONDITIONED = 7,
  TMSQ_STATUS_IO = 8,
  TMSQ_STATUS_FORMAT = 9,
  TMSQ_STATUS_UTF8 = 10,
  /**
   * A scenario ran but at least one invariant check failed.
   */
  TMSQ_STATUS_INVARIANT_FAILURE = 11,
  TMSQ_STATUS_PANIC = 12,
} TmsqStatus;

/**
 * A scenario configuration.
 */
typedef struct TmsqConfig TmsqConfig;

/**
 * Accumulates homodyne samples per LO phase for Gaussian tomography.
 */
typedef struct TmsqTomography TmsqTomography;

typedef struct TmsqPureSqueezing {
  double pure_db;
  double pure_db_stderr;
  double loss;
  double loss_stderr;
  double r;
  bool low_confidence;
} TmsqPureSqueezing;

typedef struct TmsqDuan {
  double value;
  double std_error;
  double var_x_diff;
  double var_p_sum;
  bool entangled;
} TmsqDuan;

typedef struct TmsqTomographyResult {
  double mean_x;
  double mean_p;
  double cov_xx;
  double cov_pp;
  double cov_xp;
  double det;
  double semi_major;
  double semi_minor;
  /**
   * Orientation of the squeezed axis, degrees in (−90, 90].
   */
  double angle_deg;
  /**
   * Asymptotic standard errors of mean_x, mean_p, cov_xx, cov_pp, cov_xp.
   */
  double std_errors[5];
  /**
   * The fit was constrained to det(cov) = 1.
   */
  bool on_boundary;
} TmsqTomographyResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next tmsq call on the same thread.
 */
const char *tmsq_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *tmsq_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library that has not
 * been freed.
 */
void tmsq_string_free(char *s);

/**
 * Quadrature variance at LO phase `phi` for squeezing r, angle theta and
 * loss, in shot-noise units.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum TmsqStatus tmsq_variance_at_phase(double r,
                                       double theta,
                                       double loss,
                                       double phi,
                                       double *out);

/**
 * Pure squeezing and loss from measured squeezing / anti-squeezing levels
 * (dB relative to shot noise) and their standard errors.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TmsqStatus tmsq_estimate_pure_squeezing(double squeezing_db,
                                             double squeezing_stderr,
                                             double antisqueezing_db,
                                             double antisqueezing_stderr,
                                             struct TmsqPureSqueezing *out);

/**
 * Var(x1 − x2) + Var(p1 + p2) from paired quadrature samples.
 *
 * # Safety
 * Each array must hold `n` doubles.
 */
enum TmsqStatus tmsq_duan(const double *x1,
                          const double *p1,
                          const double *x2,
                          const double *p2,
                          size_t n,
                          struct TmsqDuan *out);

/**
 * 10·log10(4 / duan).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TmsqStatus tmsq_effective_squeezing_db(double duan, double *out);

struct TmsqTomography *tmsq_tomography_new(void);

/**
 * # Safety
 * `h` must be NULL or a handle from [`tmsq_tomography_new`].
 */
void tmsq_tomography_free(struct TmsqTomography *h);

/**
 * Appends `n` quadrature samples measured at LO phase `phase` (rad).
 *
 * # Safety
 * `h` must be a live handle and `samples` must hold `n` doubles.
 */
enum TmsqStatus tmsq_tomography_add_samples(struct TmsqTomography *h,
                                            double phase,
                                            const double *samples,
                                            size_t n);

/**
 * Maximum-likelihood Gaussian fit of the accumulated samples.
 *
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum TmsqStatus tmsq_tomography_fit(const struct TmsqTomography *h,
                                    struct TmsqTomographyResult *out);

/**
 * Default configuration for a scenario name ("spectrum", "waveforms",
 * "tm_squeezing", "epr", "calibrate"). Returns NULL on error.
 *
 * # Safety
 * `scenario` must be a NUL-terminated string.
 */
struct TmsqConfig *tmsq_config_new(const char *scenario);

/**
 * Configuration parsed from a JSON document. Returns NULL on error.
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
struct TmsqConfig *tmsq_config_from_json(const char *json);

/**
 * # Safety
 * `h` must be NULL or a handle from this library.
 */
void tmsq_config_free(struct TmsqConfig *h);

/**
 * # Safety
 * `h` must be a live handle.
 */
enum TmsqStatus tmsq_config_set_seed(struct TmsqConfig *h, uint64_t seed);

/**
 * # Safety
 * `h` must be a live handle.
 */
enum TmsqStatus tmsq_config_set_frames(struct TmsqConfig *h, size_t n_frames);

/**
 * Adds a `section.key` = `value` override; the value is validated.
 *
 * # Safety
 * `h` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum TmsqStatus tmsq_config_set(struct TmsqConfig *h, const char *key, const char *value);

/**
 * Configuration as JSON, or NULL on error. Free with [`tmsq_string_free`].
 *
 * # Safety
 * `h` must be a live handle.
 */
char *tmsq_config_to_json(const struct TmsqConfig *h);

/**
 * Runs a scenario and writes its artifacts and manifest.json into
 * `out_dir` (NULL: the configured or default directory). When `manifest`
 * is non-NULL it receives the manifest JSON, to be freed with
 * [`tmsq_string_free`]. Returns `TMSQ_STATUS_INVARIANT_FAILURE` when the
 * run completed but a check failed.
 *
 * # Safety
 * `h` must be a live handle; `out_dir` NULL or NUL-terminated; `manifest`
 * NULL or a valid pointer.
 */
enum TmsqStatus tmsq_run(const struct TmsqConfig *h, const char *out_dir, char **manifest);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TMSQ_H */
