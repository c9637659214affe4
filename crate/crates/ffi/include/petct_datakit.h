#ifndef PETCT_DATAKIT_H
#define PETCT_DATAKIT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PdkStatus {
  PDK_STATUS_OK = 0,
  PDK_STATUS_NULL_POINTER = 1,
  PDK_STATUS_INVALID_ARGUMENT = 2,
  PDK_STATUS_IO = 3,
  PDK_STATUS_FORMAT = 4,
  PDK_STATUS_GRID_MISMATCH = 5,
  PDK_STATUS_KIND_MISMATCH = 6,
  PDK_STATUS_BUFFER_TOO_SMALL = 7,
  PDK_STATUS_PANIC = 99,
} PdkStatus;

typedef enum PdkVolumeKind {
  PDK_VOLUME_KIND_HU = 0,
  PDK_VOLUME_KIND_SUV = 1,
  PDK_VOLUME_KIND_BINARY = 2,
  PDK_VOLUME_KIND_PROB = 3,
} PdkVolumeKind;

typedef enum PdkInterp {
  PDK_INTERP_NEAREST = 0,
  PDK_INTERP_TRILINEAR = 1,
} PdkInterp;

/**
 * Opaque volume handle.
 */
typedef struct PdkVolume PdkVolume;

/**
 * Rotation about one axis (0 = x, 1 = y, 2 = z) followed by a shift in voxels.
 */
typedef struct PdkRigidParams {
  double rotation_deg;
  uint8_t rotation_axis;
  double shift_voxels[3];
} PdkRigidParams;

typedef struct PdkBudget {
  double case_limit_s;
  double ensemble_limit_s;
  double tta_limit_per_model_s;
  uint32_t max_tta;
  uint32_t max_models;
  bool tta_window_includes_first_pass;
} PdkBudget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *pdk_last_error(void);

/**
 * Creates a volume from `len` x-fastest values. `dims` and `spacing` point to 3 elements each.
 */
enum PdkStatus pdk_volume_new(const size_t *dims,
                              const double *spacing,
                              const double *data,
                              size_t len,
                              enum PdkVolumeKind kind,
                              struct PdkVolume **out);

enum PdkStatus pdk_volume_load(const char *path, enum PdkVolumeKind kind, struct PdkVolume **out);

/**
 * Writes NIfTI-1; gzip-compressed when the path ends in `.gz`.
 */
enum PdkStatus pdk_volume_save(const struct PdkVolume *vol, const char *path);

/**
 * Releases a handle. NULL is ignored.
 */
void pdk_volume_free(struct PdkVolume *vol);

enum PdkStatus pdk_volume_dims(const struct PdkVolume *vol, size_t *out);

enum PdkStatus pdk_volume_spacing(const struct PdkVolume *vol, double *out);

enum PdkStatus pdk_volume_kind(const struct PdkVolume *vol, enum PdkVolumeKind *out);

/**
 * Number of voxels, 0 for NULL.
 */
size_t pdk_volume_len(const struct PdkVolume *vol);

/**
 * Copies the voxel values into `buf`, which must hold at least `pdk_volume_len` values.
 */
enum PdkStatus pdk_volume_copy_data(const struct PdkVolume *vol, double *buf, size_t buf_len);

enum PdkStatus pdk_suv_mask(const struct PdkVolume *pred,
                            const struct PdkVolume *pet,
                            double threshold,
                            struct PdkVolume **out);

enum PdkStatus pdk_dice(const struct PdkVolume *pred, const struct PdkVolume *gt, double *out);

/**
 * `connectivity` is 6, 18 or 26.
 */
enum PdkStatus pdk_fp_volume_ml(const struct PdkVolume *pred,
                                const struct PdkVolume *gt,
                                uint8_t connectivity,
                                double *out);

/**
 * `connectivity` is 6, 18 or 26.
 */
enum PdkStatus pdk_fn_volume_ml(const struct PdkVolume *pred,
                                const struct PdkVolume *gt,
                                uint8_t connectivity,
                                double *out);

/**
 * `axes` is a bit set: 1 = x, 2 = y, 4 = z.
 */
enum PdkStatus pdk_mirror(const struct PdkVolume *vol, uint8_t axes, struct PdkVolume **out);

enum PdkStatus pdk_apply_rigid(const struct PdkVolume *vol,
                               const struct PdkRigidParams *params,
                               enum PdkInterp interp,
                               double pad_value,
                               struct PdkVolume **out);

enum PdkStatus pdk_budget_default(struct PdkBudget *out);

/**
 * Extra TTA passes that fit after a first pass of `first_pass_s` seconds.
 */
enum PdkStatus pdk_plan_tta(double first_pass_s, const struct PdkBudget *budget, size_t *out);

/**
 * Ensemble size for a per-model time of `model_time_s` seconds.
 */
enum PdkStatus pdk_plan_ensemble(double model_time_s, const struct PdkBudget *budget, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PETCT_DATAKIT_H */
