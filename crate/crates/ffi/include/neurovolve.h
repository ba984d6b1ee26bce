#ifndef NEUROVOLVE_H
#define NEUROVOLVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NvStatus {
  NV_STATUS_OK = 0,
  NV_STATUS_NULL_POINTER = 1,
  NV_STATUS_INVALID_ARGUMENT = 2,
  NV_STATUS_IO = 3,
  NV_STATUS_FORMAT = 4,
  NV_STATUS_GEOMETRY = 5,
  NV_STATUS_PANIC = 6,
} NvStatus;

// Opaque volume handle.
typedef struct NvVolume NvVolume;

// Lesion-wise Dice and NSD for one region.
typedef struct NvRegionScore {
  double lsd;
  double nsd;
} NvRegionScore;

// Scores for ET, TC and WT, in that order.
typedef struct NvCaseScore {
  struct NvRegionScore regions[3];
} NvCaseScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length
// excluding the terminator; pass a null `buf` to query it.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t nv_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *nv_version(void);

// Reads a NIfTI-1 file (`.nii` or `.nii.gz`).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum NvStatus nv_volume_read(const char *path, struct NvVolume **out);

// Writes a volume; labels as uint8, intensities as float32.
//
// # Safety
// `vol` must be a live handle; `path` a NUL-terminated string.
enum NvStatus nv_volume_write(const struct NvVolume *vol, const char *path);

// Creates a volume from `nx*ny*nz` values (x fastest). With `is_label`
// nonzero the values must be non-negative integers.
//
// # Safety
// `dims` and `spacing` point to three values each, `data` to the voxels,
// `out` is writable.
enum NvStatus nv_volume_new(const size_t *dims,
                            const double *spacing,
                            int32_t is_label,
                            const double *data,
                            struct NvVolume **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `vol` must be null or a handle not yet freed.
void nv_volume_free(struct NvVolume *vol);

// # Safety
// `vol` must be a live handle; `out` points to three writable values.
enum NvStatus nv_volume_dims(const struct NvVolume *vol, size_t *out);

// # Safety
// `vol` must be a live handle; `out` points to three writable values.
enum NvStatus nv_volume_spacing(const struct NvVolume *vol, double *out);

// Writes 1 for label volumes, 0 for intensity volumes.
//
// # Safety
// `vol` must be a live handle; `out` writable.
enum NvStatus nv_volume_is_label(const struct NvVolume *vol, int32_t *out);

// Borrows the voxel buffer (x fastest). The pointer stays valid until the
// handle is freed.
//
// # Safety
// `vol` must be a live handle; `data` and `len` writable.
enum NvStatus nv_volume_data(const struct NvVolume *vol, const double **data, size_t *len);

// Dice of two byte masks (nonzero = inside).
//
// # Safety
// `a` and `b` hold `nx*ny*nz` bytes; `dims` three values; `out` writable.
enum NvStatus nv_dice(const uint8_t *a, const uint8_t *b, const size_t *dims, double *out);

// Normalized surface distance of two byte masks at tolerance `tau_mm`.
//
// # Safety
// As for [`nv_dice`]; `spacing` points to three values.
enum NvStatus nv_nsd(const uint8_t *gt,
                     const uint8_t *pred,
                     const size_t *dims,
                     const double *spacing,
                     double tau_mm,
                     double *out);

// Lesion-wise Dice of two byte masks. `connectivity` is 6, 18 or 26.
//
// # Safety
// As for [`nv_dice`].
enum NvStatus nv_lesion_dice(const uint8_t *gt,
                             const uint8_t *pred,
                             const size_t *dims,
                             uint32_t connectivity,
                             size_t dilation_vox,
                             size_t min_lesion_vox,
                             double *out);

// Per-region scores of two segmentations under the default label scheme
// (0 background, 1 NCR, 2 ED, 3 ET), default lesion parameters and
// tolerance `tau_mm`.
//
// # Safety
// `gt` and `pred` must be live handles; `out` writable.
enum NvStatus nv_score_segmentations(const struct NvVolume *gt,
                                     const struct NvVolume *pred,
                                     double tau_mm,
                                     struct NvCaseScore *out);

// Voxel count of a region (0 ET, 1 TC, 2 WT) under the default label scheme.
//
// # Safety
// `seg` must be a live handle; `out` writable.
enum NvStatus nv_region_voxels(const struct NvVolume *seg, uint32_t region, size_t *out);

// Writes `count` default phantom cases with noise seed `seed` under
// `output_dir` in the BraTS layout.
//
// # Safety
// `output_dir` must be a NUL-terminated string.
enum NvStatus nv_phantom_generate(const char *output_dir, size_t count, uint64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEUROVOLVE_H */
