#ifndef ETCDNES_H
#define ETCDNES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EtcdnesCompressorKind {
  ETCDNES_COMPRESSOR_KIND_IDENTITY = 0,
  /**
   * `param` is the number of quantization bits.
   */
  ETCDNES_COMPRESSOR_KIND_QUANTIZE = 1,
  /**
   * `param` is the number of kept coordinates.
   */
  ETCDNES_COMPRESSOR_KIND_TOP_K = 2,
  ETCDNES_COMPRESSOR_KIND_NORM_SIGN = 3,
} EtcdnesCompressorKind;

typedef enum EtcdnesStatus {
  ETCDNES_STATUS_OK = 0,
  ETCDNES_STATUS_NULL_POINTER = 1,
  ETCDNES_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed config text, unreadable file or failed write.
   */
  ETCDNES_STATUS_CONFIG = 3,
  /**
   * Graph not strongly connected or otherwise unusable.
   */
  ETCDNES_STATUS_INVALID_GRAPH = 4,
  /**
   * Parameter outside its admissible range, or a degenerate game.
   */
  ETCDNES_STATUS_INVALID_PARAMETER = 5,
  ETCDNES_STATUS_DIVERGED = 6,
  ETCDNES_STATUS_BUFFER_TOO_SMALL = 7,
  ETCDNES_STATUS_PANIC = 8,
} EtcdnesStatus;

/**
 * Opaque simulation handle.
 */
typedef struct EtcdnesSimulation EtcdnesSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *etcdnes_version(void);

/**
 * Message of the last failed call on this thread, empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *etcdnes_last_error(void);

/**
 * Builds a simulation of the first algorithm in `config_text` (the
 * key-value config format) started from `seed`.
 *
 * # Safety
 * `config_text` must be a NUL-terminated string; `out_sim` must be valid for
 * writes.
 */
enum EtcdnesStatus etcdnes_simulation_new(const char *config_text,
                                          uint64_t seed,
                                          struct EtcdnesSimulation **out_sim);

/**
 * Advances the simulation by `steps` iterations. On divergence the handle
 * keeps the last finite state.
 *
 * # Safety
 * `sim` must come from [`etcdnes_simulation_new`] and not be freed.
 */
enum EtcdnesStatus etcdnes_simulation_step(struct EtcdnesSimulation *sim, uint64_t steps);

/**
 * Iterations taken so far.
 *
 * # Safety
 * `sim` must be a live handle or null (returns 0).
 */
uint64_t etcdnes_simulation_iteration(const struct EtcdnesSimulation *sim);

/**
 * Normalized residual `‖X_k − X*‖ / ‖X_0 − X*‖` of the current state.
 *
 * # Safety
 * `sim` must be a live handle; `out_residual` must be valid for writes.
 */
enum EtcdnesStatus etcdnes_simulation_residual(struct EtcdnesSimulation *sim, double *out_residual);

/**
 * Cumulative bits sent and agent transmissions so far.
 *
 * # Safety
 * `sim` must be a live handle; both outputs must be valid for writes.
 */
enum EtcdnesStatus etcdnes_simulation_bits(struct EtcdnesSimulation *sim,
                                           uint64_t *out_bits,
                                           uint64_t *out_rounds);

/**
 * Copies the estimate matrix row-major (agent by profile coordinate) into
 * `buf`. `out_rows` and `out_cols` receive the shape even when `buf` is too
 * small.
 *
 * # Safety
 * `sim` must be a live handle, `buf` valid for `len` writes (or null with
 * `len` 0), and the shape outputs valid for writes.
 */
enum EtcdnesStatus etcdnes_simulation_estimate(struct EtcdnesSimulation *sim,
                                               double *buf,
                                               size_t len,
                                               size_t *out_rows,
                                               size_t *out_cols);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `sim` must come from [`etcdnes_simulation_new`] and not be used afterwards.
 */
void etcdnes_simulation_free(struct EtcdnesSimulation *sim);

/**
 * Runs every configured algorithm and seed and writes the CSV traces and
 * `summary.txt` into `out_dir`.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum EtcdnesStatus etcdnes_run_experiment(const char *config_text, const char *out_dir);

/**
 * Bits of one transmission of a `d`-vector with `scalar_bits`-bit scalars.
 *
 * # Safety
 * `out_bits` must be valid for writes.
 */
enum EtcdnesStatus etcdnes_compressor_bits(enum EtcdnesCompressorKind kind,
                                           uint32_t param,
                                           size_t d,
                                           uint32_t scalar_bits,
                                           uint64_t *out_bits);

/**
 * Spectral radius of the row-major 2×2 matrix `m[0..4]`; NaN for null.
 *
 * # Safety
 * `m` must point to four readable doubles.
 */
double etcdnes_spectral_radius_2x2(const double *m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ETCDNES_H */
