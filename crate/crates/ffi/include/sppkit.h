#ifndef SPPKIT_H
#define SPPKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SppkitStatus {
  SPPKIT_STATUS_OK = 0,
  SPPKIT_STATUS_NULL_POINTER = 1,
  SPPKIT_STATUS_INVALID_ARGUMENT = 2,
  SPPKIT_STATUS_SHAPE_MISMATCH = 3,
  SPPKIT_STATUS_NUMERICAL = 4,
  SPPKIT_STATUS_TOO_LARGE = 5,
  SPPKIT_STATUS_BUFFER_TOO_SMALL = 6,
  SPPKIT_STATUS_IO = 7,
  SPPKIT_STATUS_PANIC = 8,
} SppkitStatus;

typedef enum SppkitModel {
  SPPKIT_MODEL_HEISENBERG = 0,
  SPPKIT_MODEL_CRX = 1,
  SPPKIT_MODEL_HEISENBERG_FIELD = 2,
} SppkitModel;

/**
 * System-environment dilation.
 */
typedef struct SppkitDilation SppkitDilation;

/**
 * Stochastic Pauli process as a matrix product state.
 */
typedef struct SppkitMps SppkitMps;

/**
 * Two-state storm chain.
 */
typedef struct SppkitStorm SppkitStorm;

/**
 * Transfer-operator spectrum; `correlation_length` is infinite for non-ergodic processes.
 */
typedef struct SppkitSpectrum {
  double lambda_star;
  double gap;
  double correlation_length;
  double non_normality;
  size_t dim;
  bool non_ergodic;
} SppkitSpectrum;

/**
 * Closed-form storm quantities; marginals are over (I, X, Y, Z).
 */
typedef struct SppkitStormSummary {
  double a;
  double b;
  double lambda2;
  double lambda_star;
  double gap;
  double correlation_length;
  double pi_calm;
  double pi_storm;
  double marginals[4];
} SppkitStormSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sppkit_version(void);

/**
 * Message of the last failure on this thread; valid until the next failing call.
 */
const char *sppkit_last_error(void);

/**
 * Releases a string returned by this library.
 */
void sppkit_string_free(char *s);

/**
 * Parses a dilation from its JSON form.
 */
enum SppkitStatus sppkit_dilation_from_json(const char *json, struct SppkitDilation **out);

/**
 * One-qubit worked model with `steps` applications of `exp(-iH(θ))`.
 */
enum SppkitStatus sppkit_dilation_worked(enum SppkitModel model,
                                         double theta,
                                         size_t steps,
                                         struct SppkitDilation **out);

/**
 * Haar-random unitaries and a random environment state.
 */
enum SppkitStatus sppkit_dilation_haar(size_t d_s,
                                       size_t d_e,
                                       size_t steps,
                                       uint64_t seed,
                                       struct SppkitDilation **out);

/**
 * Serializes a dilation to JSON; release with `sppkit_string_free`.
 */
enum SppkitStatus sppkit_dilation_to_json(const struct SppkitDilation *dilation, char **out);

void sppkit_dilation_free(struct SppkitDilation *dilation);

/**
 * Twirls a dilation into its Pauli process.
 */
enum SppkitStatus sppkit_mps_from_dilation(const struct SppkitDilation *dilation,
                                           struct SppkitMps **out);

enum SppkitStatus sppkit_mps_from_json(const char *json, struct SppkitMps **out);

/**
 * Serializes an MPS to JSON; release with `sppkit_string_free`.
 */
enum SppkitStatus sppkit_mps_to_json(const struct SppkitMps *mps, char **out);

/**
 * Labels per step (`4^n`), or 0 for a null handle.
 */
size_t sppkit_mps_labels(const struct SppkitMps *mps);

/**
 * Time steps, or 0 for a null handle.
 */
size_t sppkit_mps_steps(const struct SppkitMps *mps);

/**
 * Bond dimensions including both unit boundary bonds (`steps + 1` entries).
 */
enum SppkitStatus sppkit_mps_bond_dims(const struct SppkitMps *mps,
                                       size_t *out,
                                       size_t cap,
                                       size_t *len);

/**
 * Weight of one trajectory of `len` label indices.
 */
enum SppkitStatus sppkit_mps_weight(const struct SppkitMps *mps,
                                    const uint32_t *trajectory,
                                    size_t len,
                                    double *out);

/**
 * All `labels^steps` weights in lexicographic order, first step most significant.
 */
enum SppkitStatus sppkit_mps_weights(const struct SppkitMps *mps,
                                     double *out,
                                     size_t cap,
                                     size_t *len);

/**
 * `count` trajectories written row-major into `out` (`count * steps` entries).
 */
enum SppkitStatus sppkit_mps_sample(const struct SppkitMps *mps,
                                    uint64_t seed,
                                    size_t count,
                                    uint32_t *out,
                                    size_t cap);

/**
 * Spectrum of the transfer operator of the first bulk site.
 */
enum SppkitStatus sppkit_mps_spectrum(const struct SppkitMps *mps, struct SppkitSpectrum *out);

/**
 * Stationary `C(τ)` for `τ = 1..=max_tau` (`max_tau` entries); `f` and `g` hold one value per label.
 */
enum SppkitStatus sppkit_mps_covariance(const struct SppkitMps *mps,
                                        const double *f,
                                        const double *g,
                                        size_t labels,
                                        size_t max_tau,
                                        double *out,
                                        size_t cap);

void sppkit_mps_free(struct SppkitMps *mps);

/**
 * Storm chain from rates and per-state emission distributions over (I, X, Y, Z).
 */
enum SppkitStatus sppkit_storm_new(double a,
                                   double b,
                                   const double *q0,
                                   const double *q1,
                                   struct SppkitStorm **out);

/**
 * Storm chain with correlation length `xi` and total marginal error rate,
 * an error-free calm state and storm budget `q1_budget` split evenly.
 */
enum SppkitStatus sppkit_storm_from_xi(double xi,
                                       double marginal,
                                       double q1_budget,
                                       struct SppkitStorm **out);

enum SppkitStatus sppkit_storm_summary(const struct SppkitStorm *storm,
                                       struct SppkitStormSummary *out);

/**
 * Numerical spectrum of the storm transfer operator.
 */
enum SppkitStatus sppkit_storm_spectrum(const struct SppkitStorm *storm,
                                        struct SppkitSpectrum *out);

/**
 * Stationary storm process over `steps` rounds as an MPS.
 */
enum SppkitStatus sppkit_storm_to_mps(const struct SppkitStorm *storm,
                                      size_t steps,
                                      struct SppkitMps **out);

/**
 * Per-qubit fault labels (0=I, 1=X, 2=Y, 3=Z), row-major `[round][qubit]`.
 */
enum SppkitStatus sppkit_storm_sample_faults(const struct SppkitStorm *storm,
                                             size_t qubits,
                                             size_t rounds,
                                             uint64_t seed,
                                             uint8_t *out,
                                             size_t cap);

void sppkit_storm_free(struct SppkitStorm *storm);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPPKIT_H */
