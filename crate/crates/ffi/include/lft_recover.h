#ifndef LFT_RECOVER_H
#define LFT_RECOVER_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum LftrStatus {
  LFTR_STATUS_OK = 0,
  LFTR_STATUS_NULL_POINTER = 1,
  LFTR_STATUS_INVALID_ARGUMENT = 2,
  LFTR_STATUS_DIMENSION_MISMATCH = 3,
  // Shared eigenvalue, ill-posed loop, divergence or a failed factorization.
  LFTR_STATUS_NUMERICAL = 4,
  LFTR_STATUS_PARSE = 5,
  LFTR_STATUS_IO = 6,
  LFTR_STATUS_BUFFER_TOO_SMALL = 7,
  LFTR_STATUS_PANIC = 8,
} LftrStatus;

// Which interpolation design of the built-in example to construct.
typedef enum LftrExampleDesign {
  // Two distinct complex pairs, values only.
  LFTR_EXAMPLE_DESIGN_VALUES = 0,
  // One repeated complex pair, value and derivative.
  LFTR_EXAMPLE_DESIGN_DERIVATIVE = 1,
} LftrExampleDesign;

typedef enum LftrVerdict {
  LFTR_VERDICT_RECOVERABLE_WHP = 0,
  LFTR_VERDICT_LOCALLY_RECOVERABLE = 1,
  LFTR_VERDICT_NOT_RECOVERABLE = 2,
  LFTR_VERDICT_IDENTIFIABILITY_FAILED = 3,
} LftrVerdict;

// Opaque plant handle.
typedef struct LftrPlant LftrPlant;

// Opaque `(Ξ, Π)` handle.
typedef struct LftrSpec LftrSpec;

typedef struct LftrPlantDims {
  size_t m_x;
  size_t m_u;
  size_t m_y;
  size_t m_v;
  size_t m_z;
  size_t m_theta;
} LftrPlantDims;

typedef struct LftrRecoveryConfig {
  double lambda1;
  double lambda2;
  double step;
  double eps_it;
  size_t max_iter;
  bool clamp_to_box;
  bool backtracking;
} LftrRecoveryConfig;

typedef struct LftrRecoverySummary {
  size_t iterations;
  bool converged;
  double final_cost;
  size_t prox_fallbacks;
  bool t1_full_rank;
} LftrRecoverySummary;

typedef struct LftrRobustness {
  bool robust;
  // NaN when not robust.
  double kappa;
  size_t condition_rank;
  size_t condition_rows;
  size_t condition_cols;
  bool empty_null;
} LftrRobustness;

typedef struct LftrRecoverability {
  enum LftrVerdict verdict;
  double min_ratio;
  size_t n_samples;
  size_t n_failed;
} LftrRecoverability;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *lftr_version(void);

// Message of the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next failing call on the same thread.
const char *lftr_last_error_message(void);

// Parses a plant document held in a NUL-terminated string.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a writable pointer.
enum LftrStatus lftr_plant_from_json(const char *json, struct LftrPlant **out);

// # Safety
// `path` must be a valid NUL-terminated string and `out` a writable pointer.
enum LftrStatus lftr_plant_load(const char *path, struct LftrPlant **out);

// The built-in fourth-order example with θ = (ζ_p, ω_p).
//
// # Safety
// `out` must be a writable pointer.
enum LftrStatus lftr_plant_example(struct LftrPlant **out);

// # Safety
// `plant` must be NULL or a handle from a plant constructor, not yet freed.
void lftr_plant_free(struct LftrPlant *plant);

// # Safety
// `plant` must be a live handle and `out` a writable pointer.
enum LftrStatus lftr_plant_dims(const struct LftrPlant *plant, struct LftrPlantDims *out);

// Parses a document with `Xi` and `Pi` keys.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a writable pointer.
enum LftrStatus lftr_spec_from_json(const char *json, struct LftrSpec **out);

// # Safety
// `path` must be a valid NUL-terminated string and `out` a writable pointer.
enum LftrStatus lftr_spec_load(const char *path, struct LftrSpec **out);

// # Safety
// `out` must be a writable pointer.
enum LftrStatus lftr_spec_example(enum LftrExampleDesign design, struct LftrSpec **out);

// # Safety
// `spec` must be NULL or a handle from a spec constructor, not yet freed.
void lftr_spec_free(struct LftrSpec *spec);

// Order of Ξ, or 0 for a NULL handle.
//
// # Safety
// `spec` must be NULL or a live handle.
size_t lftr_spec_order(const struct LftrSpec *spec);

// Writes Γ (`m_y × m_xi`, column-major) for θ into `gamma_out`.
//
// # Safety
// Handles must be live; `theta` must hold `theta_len` doubles and
// `gamma_out` must have room for `gamma_len` doubles.
enum LftrStatus lftr_compute_rtim(const struct LftrPlant *plant,
                                  const struct LftrSpec *spec,
                                  const double *theta,
                                  size_t theta_len,
                                  double *gamma_out,
                                  size_t gamma_len);

// Fills `out` with the example defaults.
//
// # Safety
// `out` must be a writable pointer.
enum LftrStatus lftr_recovery_config_default(struct LftrRecoveryConfig *out);

// Recovers θ from a column-major Γ estimate.
//
// `config` may be NULL for the defaults and `init_theta` NULL for the upper
// corner of the parameter box. `summary` may be NULL.
//
// # Safety
// Handles must be live and every non-NULL pointer must reference a buffer of
// the stated length.
enum LftrStatus lftr_recover(const struct LftrPlant *plant,
                             const struct LftrSpec *spec,
                             const double *gamma,
                             size_t gamma_len,
                             const struct LftrRecoveryConfig *config,
                             const double *init_theta,
                             double *theta_out,
                             size_t theta_len,
                             struct LftrRecoverySummary *summary);

// # Safety
// Handles must be live, `theta` must hold `theta_len` doubles and `out` must be writable.
enum LftrStatus lftr_robustness(const struct LftrPlant *plant,
                                const struct LftrSpec *spec,
                                const double *theta,
                                size_t theta_len,
                                struct LftrRobustness *out);

// Sampled recoverability test over the parameter box.
//
// # Safety
// Handles must be live and `out` must be writable.
enum LftrStatus lftr_check_recoverability(const struct LftrPlant *plant,
                                          const struct LftrSpec *spec,
                                          size_t n_theta,
                                          size_t n_phi,
                                          double mu_t,
                                          uint64_t seed,
                                          struct LftrRecoverability *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LFT_RECOVER_H */
