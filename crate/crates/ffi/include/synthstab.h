#ifndef SYNTHSTAB_H
#define SYNTHSTAB_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsBackend {
  SS_BACKEND_ORACLE = 0,
  SS_BACKEND_BLOCKMATCH = 1,
  SS_BACKEND_LEARNED = 2,
} SsBackend;

/**
 * Result codes. Codes 1 to 18 follow the order of the toolkit's error kinds.
 */
typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NON_SIMILARITY = 1,
  SS_STATUS_DEGENERATE_CONFIGURATION = 2,
  SS_STATUS_INVALID_SPEC = 3,
  SS_STATUS_INSUFFICIENT_MARKS = 4,
  SS_STATUS_IO = 5,
  SS_STATUS_FORMAT = 6,
  SS_STATUS_FRAME_MISMATCH = 7,
  SS_STATUS_DEGENERATE_FLOW = 8,
  SS_STATUS_NON_FINITE_LOSS = 9,
  SS_STATUS_SHAPE_MISMATCH = 10,
  SS_STATUS_SIGNAL_TOO_SHORT = 11,
  SS_STATUS_BAD_WINDOW = 12,
  SS_STATUS_SINGULAR_TRANSFORM = 13,
  SS_STATUS_LENGTH_MISMATCH = 14,
  SS_STATUS_DEGENERATE = 15,
  SS_STATUS_SERIES_TOO_SHORT = 16,
  SS_STATUS_ALL_FRAMES_FAILED = 17,
  SS_STATUS_INVALID_CONFIG = 18,
  SS_STATUS_NULL_POINTER = 100,
  SS_STATUS_INVALID_ARGUMENT = 101,
  SS_STATUS_BUFFER_TOO_SMALL = 102,
  SS_STATUS_PANIC = 103,
} SsStatus;

/**
 * Opaque pair of trained regressors.
 */
typedef struct SsModel SsModel;

/**
 * Opaque stabilization output.
 */
typedef struct SsStabilized SsStabilized;

/**
 * Opaque synthetic or loaded video with its ground truth.
 */
typedef struct SsVideo SsVideo;

typedef struct SsAffineParams {
  double t_x;
  double t_y;
  double theta;
  double s;
} SsAffineParams;

/**
 * Synthetic video settings; shake uses the default noise profile.
 */
typedef struct SsVideoConfig {
  size_t width;
  size_t height;
  size_t n_frames;
  size_t fps;
  size_t n_layers;
  uint64_t seed;
  /**
   * Video index within the seeded dataset.
   */
  size_t index;
} SsVideoConfig;

typedef struct SsMetrics {
  double stability_translation;
  double stability_rotation;
  double stability_avg;
  double input_stability_avg;
  /**
   * NaN when no frame could be fitted.
   */
  double distortion;
  double cropping_ratio;
  bool success;
} SsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL terminated and
 * truncated to `len`. Returns the full message length plus one.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ss_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ss_version(void);

/**
 * Least-squares 4-DOF fit from `n` point pairs given as interleaved `x, y`.
 *
 * # Safety
 * `src` and `dst` must point to `2 * n` doubles; `out` must be writable.
 */
enum SsStatus ss_fit_similarity(const double *src,
                                const double *dst,
                                size_t n,
                                struct SsAffineParams *out);

/**
 * Row-major 2x3 matrix of `p`.
 *
 * # Safety
 * `p` must be readable and `out` must point to 6 writable doubles.
 */
enum SsStatus ss_params_to_matrix(const struct SsAffineParams *p, double *out);

/**
 * Savitzky-Golay smoothing of `n` samples into `out` (also `n` long).
 *
 * # Safety
 * `signal` and `out` must each hold `n` doubles.
 */
enum SsStatus ss_savitzky_golay(const double *signal,
                                size_t n,
                                size_t window,
                                size_t polyorder,
                                double *out);

/**
 * Share of spectral power in the low-frequency band of a motion series.
 *
 * # Safety
 * `series` must hold `n` doubles and `out` must be writable.
 */
enum SsStatus ss_stability_score(const double *series, size_t n, double *out);

struct SsVideoConfig ss_video_config_default(void);

/**
 * Renders a shaky synthetic video with ground truth.
 *
 * # Safety
 * `cfg` must be readable and `out` writable. Release with `ss_video_free`.
 */
enum SsStatus ss_video_generate(const struct SsVideoConfig *cfg, struct SsVideo **out);

/**
 * Loads a video directory written by the `generate` command.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SsStatus ss_video_read(const char *path, struct SsVideo **out);

/**
 * # Safety
 * `video` must be null or a handle from this library, freed at most once.
 */
void ss_video_free(struct SsVideo *video);

/**
 * # Safety
 * `video` must be a live handle; the out pointers must be writable.
 */
enum SsStatus ss_video_info(const struct SsVideo *video,
                            size_t *n_frames,
                            size_t *width,
                            size_t *height);

/**
 * Copies frame `index` as row-major intensities in [0, 255].
 *
 * # Safety
 * `video` must be a live handle and `buf` hold `len` floats.
 */
enum SsStatus ss_video_frame(const struct SsVideo *video, size_t index, float *buf, size_t len);

/**
 * Copies the `n_frames - 1` ground-truth pair motions.
 *
 * # Safety
 * `video` must be a live handle and `out` hold `len` elements.
 */
enum SsStatus ss_video_ground_truth(const struct SsVideo *video,
                                    struct SsAffineParams *out,
                                    size_t len);

/**
 * Estimates motion with `backend`, smooths and warps. `model` is only read
 * for the learned backend.
 *
 * # Safety
 * `video` must be a live handle, `model` null or a live handle, and `out`
 * writable. Release the result with `ss_stabilized_free`.
 */
enum SsStatus ss_stabilize(const struct SsVideo *video,
                           enum SsBackend backend,
                           const struct SsModel *model,
                           size_t window,
                           size_t polyorder,
                           double crop,
                           struct SsStabilized **out);

/**
 * # Safety
 * `result` must be null or a handle from this library, freed at most once.
 */
void ss_stabilized_free(struct SsStabilized *result);

/**
 * # Safety
 * `result` must be a live handle; the out pointers must be writable.
 */
enum SsStatus ss_stabilized_info(const struct SsStabilized *result,
                                 size_t *n_frames,
                                 size_t *width,
                                 size_t *height);

/**
 * # Safety
 * `result` must be a live handle and `buf` hold `len` floats.
 */
enum SsStatus ss_stabilized_frame(const struct SsStabilized *result,
                                  size_t index,
                                  float *buf,
                                  size_t len);

/**
 * Copies the correction applied to each of the `n_frames` input frames.
 *
 * # Safety
 * `result` must be a live handle and `out` hold `len` elements.
 */
enum SsStatus ss_stabilized_applied(const struct SsStabilized *result,
                                    struct SsAffineParams *out,
                                    size_t len);

/**
 * Stability, distortion and cropping of `result` against `video`.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum SsStatus ss_evaluate(const struct SsVideo *video,
                          const struct SsStabilized *result,
                          struct SsMetrics *out);

/**
 * Loads `f_tr.bin` and `f_rs.bin` from a directory written by `train`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` writable.
 */
enum SsStatus ss_model_load(const char *dir, struct SsModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, freed at most once.
 */
void ss_model_free(struct SsModel *model);

/**
 * Motion from `frame_a` to `frame_b`, both `width * height` row-major.
 *
 * # Safety
 * `model` must be a live handle, both frames hold `width * height` floats
 * and `out` be writable.
 */
enum SsStatus ss_model_predict(const struct SsModel *model,
                               const float *frame_a,
                               const float *frame_b,
                               size_t width,
                               size_t height,
                               struct SsAffineParams *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYNTHSTAB_H */
