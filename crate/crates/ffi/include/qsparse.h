#ifndef QSPARSE_H
#define QSPARSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Fusion rules reachable through [`qs_decide`].
 */
typedef enum QsDetector {
  QS_DETECTOR_LRT = 0,
  QS_DETECTOR_GLRT = 1,
  QS_DETECTOR_LMPT = 2,
  QS_DETECTOR_GLRTRS = 3,
  QS_DETECTOR_LMPTRS = 4,
} QsDetector;

/*
 Result of every fallible call. The first four values match the exit
 codes of the `qsparse` command.
 */
typedef enum QsStatus {
  QS_STATUS_OK = 0,
  QS_STATUS_CONFIG_ERROR = 1,
  QS_STATUS_DETECTOR_ERROR = 2,
  QS_STATUS_IO_ERROR = 3,
  QS_STATUS_INVALID_ARGUMENT = 4,
  QS_STATUS_NULL_POINTER = 5,
  QS_STATUS_PANIC = 6,
} QsStatus;

/*
 Reputation filter state of one E-GLRTRS or E-LMPTRS run.
 */
typedef struct QsFilter QsFilter;

/*
 Signal and noise parameters.
 */
typedef struct QsModel QsModel;

/*
 A sensor network: reference sensors first, then regular ones.
 */
typedef struct QsNetwork QsNetwork;

/*
 Outcome of one decision. Estimates a rule does not produce are NaN.
 */
typedef struct QsVerdict {
  double statistic;
  double threshold;
  /*
   1 when the rule decides H1; ties decide H0.
   */
  uint8_t decide_h1;
  double p_hat;
  double x_hat;
  /*
   Sensors that entered the statistic.
   */
  size_t kept;
} QsVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` as a
 NUL-terminated string, truncating if needed. Returns the full message
 length in bytes, without the terminator.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t qs_last_error_message(char *buf, size_t len);

/*
 Gaussian tail probability `Q(z)`.

 # Safety
 `out` must be null or valid for writes.
 */
enum QsStatus qs_q_tail(double z, double *out_value);

/*
 Inverse of [`qs_q_tail`] on `(0, 1)`.

 # Safety
 `out` must be null or valid for writes.
 */
enum QsStatus qs_q_tail_inverse(double p, double *out_value);

/*
 Creates a model with sparsity `p`, signal variance `sigma_x2`, noise
 variance `sigma_n2` and signal dimension `dim`.

 # Safety
 `out_model` must be null or valid for writes.
 */
enum QsStatus qs_model_new(double p,
                           double sigma_x2,
                           double sigma_n2,
                           size_t dim,
                           struct QsModel **out_model);

/*
 # Safety
 `model` must be null or a handle from [`qs_model_new`] not yet freed.
 */
void qs_model_free(struct QsModel *model);

/*
 Builds a network of `n_sensors` sensors sharing the finite cuts
 `cuts[0..n_cuts]` (`n_cuts = 2^q - 1`). The first `n_reference` are
 reference sensors whose cuts sit `reference_offset` below the regular
 ones, so honest references always report the top codeword. `gains` holds
 one squared gain per sensor, or is null for unit gains.

 # Safety
 `cuts` must point to `n_cuts` values; `gains`, when not null, to
 `n_sensors` values; `out_network` must be valid for writes.
 */
enum QsStatus qs_network_new(size_t n_sensors,
                             size_t n_reference,
                             const double *cuts,
                             size_t n_cuts,
                             const double *gains,
                             double reference_offset,
                             struct QsNetwork **out_network);

/*
 # Safety
 `network` must be null or a handle from [`qs_network_new`] not yet freed.
 */
void qs_network_free(struct QsNetwork *network);

/*
 Number of sensors, or 0 for a null handle.

 # Safety
 `network` must be null or a live handle.
 */
size_t qs_network_len(const struct QsNetwork *network);

/*
 Codewords per sensor, `2^q`, or 0 for a null handle.

 # Safety
 `network` must be null or a live handle.
 */
size_t qs_network_levels(const struct QsNetwork *network);

/*
 Attack estimate `x_hat` from the reference sensors' reports.

 # Safety
 `reports` must point to one codeword per sensor.
 */
enum QsStatus qs_estimate_attack(const struct QsNetwork *network,
                                 const uint16_t *reports,
                                 size_t n_reports,
                                 double *out_x_hat);

/*
 One decision of a base fusion rule.

 `alpha` and `p_attack` are the true attack parameters, used only by the
 LRT. The reference-sensor rules use `x_hat`, or estimate it from the
 reference reports when `x_hat` is NaN. `target_pfa` calibrates the
 threshold of every rule.

 # Safety
 `reports` must point to one codeword per sensor; handles must be live.
 */
enum QsStatus qs_decide(const struct QsNetwork *network,
                        const struct QsModel *model,
                        enum QsDetector detector,
                        const uint16_t *reports,
                        size_t n_reports,
                        double alpha,
                        double p_attack,
                        double x_hat,
                        double target_pfa,
                        struct QsVerdict *out_verdict);

/*
 Attack product `alpha * P_A` that blinds the LMPT (`detector = Lmpt`,
 weights at `p = 0`) or GLRT (`detector = Glrt`, weights at the model `p`).

 # Safety
 Handles must be live; `out_x` must be valid for writes.
 */
enum QsStatus qs_blinding_point(const struct QsNetwork *network,
                                const struct QsModel *model,
                                enum QsDetector detector,
                                double *out_x);

/*
 Starts a reputation-filtered run on `network`. `base` must be `Glrtrs` or
 `Lmptrs`; `alpha` is the known Byzantine fraction and `tau` the
 reputation threshold.

 # Safety
 `network` must be live; `out_filter` must be valid for writes.
 */
enum QsStatus qs_filter_new(const struct QsNetwork *network,
                            enum QsDetector base,
                            double alpha,
                            double tau,
                            double target_pfa,
                            struct QsFilter **out_filter);

/*
 # Safety
 `filter` must be null or a handle from [`qs_filter_new`] not yet freed.
 */
void qs_filter_free(struct QsFilter *filter);

/*
 Feeds one time step of reports and decides. `kept` in the verdict counts
 the regular sensors that survived the filter.

 # Safety
 `network` must be the network the filter was created with; `reports`
 must point to one codeword per sensor.
 */
enum QsStatus qs_filter_step(struct QsFilter *filter,
                             const struct QsNetwork *network,
                             const struct QsModel *model,
                             const uint16_t *reports,
                             size_t n_reports,
                             struct QsVerdict *out_verdict);

/*
 Runs a named preset and writes its CSV to `csv_path`. Zero `trials` or
 `workers` keep the preset's values.

 # Safety
 `name` and `csv_path` must be NUL-terminated strings.
 */
enum QsStatus qs_run_preset(const char *name,
                            uint64_t seed,
                            uint64_t trials,
                            size_t workers,
                            const char *csv_path);

/*
 Runs the experiment described by the config file at `config_path` and
 writes its CSV to `csv_path`.

 # Safety
 Both arguments must be NUL-terminated strings.
 */
enum QsStatus qs_run_config(const char *config_path, const char *csv_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSPARSE_H */
