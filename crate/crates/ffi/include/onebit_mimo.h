#ifndef ONEBIT_MIMO_H
#define ONEBIT_MIMO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Modulation codes accepted by [`om_spatial_code_new`].
#define OM_MOD_BPSK 0

#define OM_MOD_QAM4 1

#define OM_MOD_QAM16 2

// Detector codes reported in [`OmFerPoint::detector`].
#define OM_DET_SO 0

#define OM_DET_SCSO 1

#define OM_DET_OSCSO 2

#define OM_DET_ZF 3

#define OM_DET_GENIE 4

typedef enum OmStatus {
  OM_STATUS_OK = 0,
  OM_STATUS_NULL_POINTER = 1,
  OM_STATUS_INVALID_INPUT = 2,
  OM_STATUS_SHAPE = 3,
  OM_STATUS_SINGULAR_CHANNEL = 4,
  OM_STATUS_CONFIG = 5,
  OM_STATUS_IO = 6,
  OM_STATUS_INTERNAL = 7,
  OM_STATUS_PANIC = 8,
} OmStatus;

// Polar code with successive-cancellation decoding.
typedef struct OmPolarCode OmPolarCode;

// Spatial-domain code of one channel realization.
typedef struct OmSpatialCode OmSpatialCode;

// One row of a FER sweep.
typedef struct OmFerPoint {
  double snr_db;
  uint32_t detector;
  uint64_t frames;
  uint64_t user_block_errors;
  double fer;
  double mean_scans;
  uint64_t seed;
  uint64_t frame_errors_any;
} OmFerPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread ("" after a
// successful call). The pointer stays valid until the next call on the
// same thread.
const char *om_last_error(void);

// Library version as a static NUL-terminated string.
const char *om_version(void);

// Builds the spatial code of an `n_rx x n_users` channel given as row-major
// real and imaginary parts.
//
// # Safety
// `h_re` and `h_im` must point to `n_rx * n_users` doubles; `out` must be
// writable.
enum OmStatus om_spatial_code_new(const double *h_re,
                                  const double *h_im,
                                  size_t n_rx,
                                  size_t n_users,
                                  uint32_t modulation,
                                  double snr_db,
                                  struct OmSpatialCode **out);

// # Safety
// `code` must come from [`om_spatial_code_new`] and not be used afterwards.
void om_spatial_code_free(struct OmSpatialCode *code);

// Number of codewords `m^K` and codeword length `N`.
//
// # Safety
// `code` must be a live handle; `len` and `dims` must be writable.
enum OmStatus om_spatial_code_shape(const struct OmSpatialCode *code, size_t *len, size_t *dims);

// Writes codeword `l` (`N` bits) and its crossover probabilities.
// Either output may be null to skip it.
//
// # Safety
// Non-null outputs must hold `dims` elements.
enum OmStatus om_spatial_code_codeword(const struct OmSpatialCode *code,
                                       size_t l,
                                       uint8_t *bits,
                                       double *eps,
                                       size_t dims);

// SO LLRs of `user`'s label bits for the observation `r` (`r_len` bits).
//
// # Safety
// `r` must hold `r_len` bytes and `llrs` `llr_len` doubles.
enum OmStatus om_so_llrs(const struct OmSpatialCode *code,
                         const uint8_t *r,
                         size_t r_len,
                         size_t user,
                         double *llrs,
                         size_t llr_len);

// SCSO LLRs of `user` over the code refined by `n_fixed` pairs
// `(fixed_users[j], fixed_messages[j])`.
//
// # Safety
// Arrays must hold the stated number of elements.
enum OmStatus om_scso_llrs(const struct OmSpatialCode *code,
                           const uint8_t *r,
                           size_t r_len,
                           size_t user,
                           const size_t *fixed_users,
                           const size_t *fixed_messages,
                           size_t n_fixed,
                           double *llrs,
                           size_t llr_len);

// Maximum-likelihood joint messages, one per user.
//
// # Safety
// `r` must hold `r_len` bytes and `messages` `n_users` elements.
enum OmStatus om_ml_hard_detect(const struct OmSpatialCode *code,
                                const uint8_t *r,
                                size_t r_len,
                                size_t *messages,
                                size_t n_users);

// Polar code of length `n` and rate `rate`, frozen set designed at `design_db`.
//
// # Safety
// `out` must be writable.
enum OmStatus om_polar_new(size_t n, double rate, double design_db, struct OmPolarCode **out);

// # Safety
// `code` must come from [`om_polar_new`] and not be used afterwards.
void om_polar_free(struct OmPolarCode *code);

// Block length `n` and number of information bits `k`.
//
// # Safety
// `code` must be a live handle; outputs must be writable.
enum OmStatus om_polar_shape(const struct OmPolarCode *code, size_t *n, size_t *k);

// # Safety
// `info` must hold `k` bytes and `coded` `n` bytes.
enum OmStatus om_polar_encode(const struct OmPolarCode *code,
                              const uint8_t *info,
                              size_t k,
                              uint8_t *coded,
                              size_t n);

// Successive-cancellation decoding of `n` LLRs into `k` information bits.
//
// # Safety
// `llrs` must hold `n` doubles and `info` `k` bytes.
enum OmStatus om_polar_decode(const struct OmPolarCode *code,
                              const double *llrs,
                              size_t n,
                              uint8_t *info,
                              size_t k);

// Runs a FER sweep described by `config` (the `key = value` text format).
// On success `*points` owns `*len` rows; release them with
// [`om_fer_points_free`].
//
// # Safety
// `config` must be a NUL-terminated string; outputs must be writable.
enum OmStatus om_run_sweep(const char *config, struct OmFerPoint **points, size_t *len);

// # Safety
// `points` and `len` must come from one successful [`om_run_sweep`] call.
void om_fer_points_free(struct OmFerPoint *points, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ONEBIT_MIMO_H */
