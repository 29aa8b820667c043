#ifndef POLSAR_FFI_H
#define POLSAR_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Values 10 and up match the exit codes of the `polsar` CLI.
typedef enum PolsarStatus {
  POLSAR_STATUS_OK = 0,
  POLSAR_STATUS_NULL_POINTER = 1,
  POLSAR_STATUS_INVALID_ARGUMENT = 2,
  POLSAR_STATUS_BUFFER_SIZE = 3,
  POLSAR_STATUS_IO = 10,
  POLSAR_STATUS_BAD_MAGIC = 11,
  POLSAR_STATUS_UNSUPPORTED_VERSION = 12,
  POLSAR_STATUS_TRUNCATED = 13,
  POLSAR_STATUS_CHANNEL_COUNT = 14,
  POLSAR_STATUS_MALFORMED = 15,
  POLSAR_STATUS_JSON = 16,
  POLSAR_STATUS_CONFIG = 17,
  POLSAR_STATUS_PRETRAIN = 20,
  POLSAR_STATUS_DIVERGED = 21,
  POLSAR_STATUS_POLSAR = 30,
  POLSAR_STATUS_SCENE = 31,
  POLSAR_STATUS_QUERY = 32,
  POLSAR_STATUS_PANIC = 99,
} PolsarStatus;

// Yamaguchi component powers: surface, double bounce, volume, helix.
typedef struct PolsarComponents PolsarComponents;

// Binary component masks in the same order as [`PolsarComponents`].
typedef struct PolsarLabels PolsarLabels;

// Trained or loaded model parameters.
typedef struct PolsarModel PolsarModel;

// A PolSAR raster (four complex channels per pixel).
typedef struct PolsarRaster PolsarRaster;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *polsar_version(void);

// Length in bytes of the calling thread's last error message, excluding
// the terminating NUL; 0 if there is none.
size_t polsar_last_error_length(void);

// Copies the last error message into `buf` (truncated to `len - 1` bytes,
// always NUL-terminated when `len > 0`). Returns the full message length.
//
// # Safety
// `buf` must be null or point to at least `len` writable bytes.
size_t polsar_last_error_message(char *buf, size_t len);

void polsar_clear_error(void);

// Reads a CPXR file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PolsarStatus polsar_raster_read(const char *path, struct PolsarRaster **out);

// Writes a CPXR file.
//
// # Safety
// `raster` must be a live handle; `path` a NUL-terminated string.
enum PolsarStatus polsar_raster_write(const struct PolsarRaster *raster, const char *path);

// Synthesizes the four-quadrant demo scene.
//
// # Safety
// `out` must be writable.
enum PolsarStatus polsar_raster_synthesize_demo(size_t height,
                                                size_t width,
                                                uint64_t seed,
                                                struct PolsarRaster **out);

// Builds a raster from `8 * height * width` samples laid out as eight
// planes: re/im of HH, HV, VH, VV.
//
// # Safety
// `planes` must point to `8 * height * width` readable doubles.
enum PolsarStatus polsar_raster_from_planes(size_t height,
                                            size_t width,
                                            const double *planes,
                                            struct PolsarRaster **out);

// # Safety
// `raster` must be a live handle; `height` and `width` writable.
enum PolsarStatus polsar_raster_shape(const struct PolsarRaster *raster,
                                      size_t *height,
                                      size_t *width);

// Total power per pixel into `out` (`len == height * width`, row-major).
//
// # Safety
// `raster` must be a live handle; `out` must hold `len` doubles.
enum PolsarStatus polsar_raster_span(const struct PolsarRaster *raster, double *out, size_t len);

// # Safety
// `raster` must be null or a handle not yet freed.
void polsar_raster_free(struct PolsarRaster *raster);

// Boxcar coherency (odd `window`) then Yamaguchi decomposition.
//
// # Safety
// `raster` must be a live handle; `out` writable.
enum PolsarStatus polsar_decompose(const struct PolsarRaster *raster,
                                   size_t window,
                                   struct PolsarComponents **out);

// Copies component `index` (0 surface, 1 double bounce, 2 volume, 3 helix).
//
// # Safety
// `components` must be a live handle; `out` must hold `len` doubles.
enum PolsarStatus polsar_components_plane(const struct PolsarComponents *components,
                                          size_t index,
                                          double *out,
                                          size_t len);

// # Safety
// `components` must be null or a handle not yet freed.
void polsar_components_free(struct PolsarComponents *components);

// Rayleigh median binarization of each component.
//
// # Safety
// `components` must be a live handle; `out` writable.
enum PolsarStatus polsar_labels_generate(const struct PolsarComponents *components,
                                         struct PolsarLabels **out);

// Copies mask `index` as 0/1 bytes.
//
// # Safety
// `labels` must be a live handle; `out` must hold `len` bytes.
enum PolsarStatus polsar_labels_mask(const struct PolsarLabels *labels,
                                     size_t index,
                                     uint8_t *out,
                                     size_t len);

// # Safety
// `labels` must be null or a handle not yet freed.
void polsar_labels_free(struct PolsarLabels *labels);

// Trains on one raster and its labels. `config_toml` holds run config text
// (null for defaults). `final_loss` may be null.
//
// # Safety
// Handles must be live; strings NUL-terminated; `out` writable.
enum PolsarStatus polsar_model_train(const struct PolsarRaster *raster,
                                     const struct PolsarLabels *labels,
                                     const char *config_toml,
                                     struct PolsarModel **out,
                                     double *final_loss);

// Loads a checkpoint from its JSON manifest.
//
// # Safety
// `manifest_path` NUL-terminated; `out` writable.
enum PolsarStatus polsar_model_load(const char *manifest_path, struct PolsarModel **out);

// Writes `<stem>.ppck` and `<stem>.json` into `dir`.
//
// # Safety
// `model` must be a live handle; strings NUL-terminated.
enum PolsarStatus polsar_model_save(const struct PolsarModel *model,
                                    const char *dir,
                                    const char *stem);

// Per-component overall accuracy (percent) on a raster and its labels;
// `oa` receives four values.
//
// # Safety
// Handles must be live; `oa` must hold 4 doubles.
enum PolsarStatus polsar_model_evaluate(const struct PolsarModel *model,
                                        const struct PolsarRaster *raster,
                                        const struct PolsarLabels *labels,
                                        double *oa);

// # Safety
// `model` must be null or a handle not yet freed.
void polsar_model_free(struct PolsarModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLSAR_FFI_H */
