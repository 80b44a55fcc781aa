#ifndef CVBELL_H
#define CVBELL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvbStatus {
  CVB_STATUS_OK = 0,
  CVB_STATUS_NULL_POINTER = 1,
  CVB_STATUS_DOMAIN = 2,
  CVB_STATUS_SINGULAR = 3,
  CVB_STATUS_INVALID_REGIME = 4,
  CVB_STATUS_TRUNCATION = 5,
  CVB_STATUS_ENVELOPE_FAILURE = 6,
  CVB_STATUS_MULTIMODAL = 7,
  CVB_STATUS_CONFIG = 8,
  CVB_STATUS_IO = 9,
  CVB_STATUS_VALIDATION = 10,
  CVB_STATUS_PANIC = 11,
} CvbStatus;

/**
 * Experiment parameters (opaque).
 */
typedef struct CvbParams CvbParams;

/**
 * Heralded two-mode state (opaque).
 */
typedef struct CvbState CvbState;

typedef struct CvbBellResult {
  /**
   * `E(theta1, phi1), E(theta1, phi2), E(theta2, phi1), E(theta2, phi2)`.
   */
  double correlators[4];
  double s;
  double success_prob;
} CvbBellResult;

typedef struct CvbMcResult {
  /**
   * Nonzero when all four settings received events and `s_hat` is valid.
   */
  int32_t has_s;
  double s_hat;
  double stderr_s;
  /**
   * Per setting, in the same order as `CvbBellResult::correlators`.
   */
  uint64_t events[4];
  int64_t sign_sums[4];
  uint64_t pulses;
  double wall_sim_time;
  double p_hat;
} CvbMcResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. Valid until
 * the next failing call on the same thread.
 */
const char *cvb_last_error(void);

/**
 * Creates parameters with the default CHSH settings.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum CvbStatus cvb_params_new(double lambda,
                              double transmittance,
                              double eta,
                              double eta_bhd,
                              struct CvbParams **out);

/**
 * # Safety
 * `params` must come from [`cvb_params_new`].
 */
enum CvbStatus cvb_params_set_angles(struct CvbParams *params,
                                     double theta1,
                                     double theta2,
                                     double phi1,
                                     double phi2);

/**
 * # Safety
 * `params` must come from [`cvb_params_new`] or be NULL; it must not be used afterwards.
 */
void cvb_params_free(struct CvbParams *params);

/**
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum CvbStatus cvb_chsh(const struct CvbParams *params, struct CvbBellResult *out);

/**
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum CvbStatus cvb_success_probability(const struct CvbParams *params, double *out);

/**
 * Squeezing that maximizes S with the default settings.
 *
 * # Safety
 * `out_lambda` and `out_s_max` must be writable.
 */
enum CvbStatus cvb_optimize_lambda(double transmittance,
                                   double eta,
                                   double eta_bhd,
                                   double *out_lambda,
                                   double *out_s_max);

/**
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum CvbStatus cvb_state_new(const struct CvbParams *params, struct CvbState **out);

/**
 * Wigner function at `r = (x_A, p_A, x_B, p_B)`.
 *
 * # Safety
 * `state` must be a live handle, `r` must point to four doubles and `out` be writable.
 */
enum CvbStatus cvb_state_wigner(const struct CvbState *state, const double *r, double *out);

/**
 * # Safety
 * `state` must come from [`cvb_state_new`] or be NULL; it must not be used afterwards.
 */
void cvb_state_free(struct CvbState *state);

/**
 * Monte Carlo run of the event-ready protocol with equiprobable settings.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum CvbStatus cvb_run_protocol(const struct CvbParams *params,
                                uint64_t n_target_events,
                                uint64_t seed,
                                double rep_rate,
                                struct CvbMcResult *out);

/**
 * Seconds of data taking for a CHSH standard error `target_stderr`, with
 * equiprobable settings.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum CvbStatus cvb_acquisition_time(const struct CvbParams *params,
                                    double rep_rate,
                                    double target_stderr,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVBELL_H */
