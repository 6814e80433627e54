/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef STENCILKIT_H
#define STENCILKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SkCoefficientStorage {
  SK_COEFFICIENT_STORAGE_CONSTANT = 0,
  SK_COEFFICIENT_STORAGE_VARIABLE = 1,
} SkCoefficientStorage;

typedef enum SkDimensionality {
  SK_DIMENSIONALITY_D1 = 1,
  SK_DIMENSIONALITY_D2 = 2,
  SK_DIMENSIONALITY_D3 = 3,
} SkDimensionality;

typedef enum SkElementType {
  SK_ELEMENT_TYPE_FLOAT32 = 0,
  SK_ELEMENT_TYPE_FLOAT64 = 1,
} SkElementType;

// Result codes of every fallible call.
typedef enum SkStatus {
  SK_STATUS_OK = 0,
  SK_STATUS_NULL_POINTER = 1,
  SK_STATUS_INVALID_ARGUMENT = 2,
  SK_STATUS_UNSUPPORTED_STENCIL = 3,
  SK_STATUS_INVALID_GRID = 4,
  SK_STATUS_MACHINE = 5,
  SK_STATUS_IO = 6,
  // The output buffer was too small; the required length was still reported.
  SK_STATUS_BUFFER_TOO_SMALL = 7,
  SK_STATUS_INTERNAL = 8,
} SkStatus;

typedef enum SkStencilKind {
  SK_STENCIL_KIND_STAR = 0,
  SK_STENCIL_KIND_BOX = 1,
} SkStencilKind;

typedef enum SkWeighting {
  SK_WEIGHTING_HOMOGENEOUS = 0,
  SK_WEIGHTING_HETEROGENEOUS = 1,
  SK_WEIGHTING_ISOTROPIC = 2,
  SK_WEIGHTING_POINT_SYMMETRIC = 3,
} SkWeighting;

// Opaque stencil kernel.
typedef struct SkKernel SkKernel;

// Opaque machine model.
typedef struct SkMachine SkMachine;

// Stencil parameters. The enum-typed fields are passed as plain integers
// holding the values of `SkStencilKind`, `SkWeighting`,
// `SkCoefficientStorage` and `SkElementType`.
typedef struct SkStencilSpec {
  uint32_t dimensions;
  uint32_t radius;
  uint32_t kind;
  uint32_t weighting;
  uint32_t storage;
  uint32_t element;
} SkStencilSpec;

typedef struct SkOpCounts {
  size_t adds;
  size_t muls;
  size_t loads;
  size_t stores;
  size_t distinct_streams;
} SkOpCounts;

// Grid extents including halos. 2D grids ignore `m`.
typedef struct SkGrid {
  size_t m;
  size_t n;
  size_t p;
} SkGrid;

typedef struct SkLayerCondition {
  // NUL-terminated level name, truncated to 15 bytes.
  char level[16];
  uint32_t dimensionality;
  bool holds;
  // Smallest cubic edge at which the condition fails; 0 when it never does.
  uint64_t break_size;
  double requirement_bytes;
  double effective_size_bytes;
} SkLayerCondition;

// Bytes per cache line of work on each link, in order L1L2, L2L3, L3MEM.
typedef struct SkTraffic {
  double load_bytes[3];
  double store_bytes[3];
} SkTraffic;

// ECM contributions and prediction in cycles per cache line of work.
typedef struct SkEcm {
  double t_comp;
  double t_reg_l1;
  double t_l1l2;
  double t_l2l3;
  double t_l3mem;
  double t_total;
  // Single-core performance in lattice updates per second.
  double lups;
} SkEcm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null when there is
// none. The pointer stays valid until the next failing call on this thread.
const char *sk_last_error_message(void);

// Builds a kernel. Release it with `sk_kernel_free`.
//
// # Safety
// `spec` must point to a valid `SkStencilSpec` and `out` to writable storage.
enum SkStatus sk_kernel_new(const struct SkStencilSpec *spec, struct SkKernel **out_kernel);

// # Safety
// `kernel` must be null or a handle from `sk_kernel_new` not yet freed.
void sk_kernel_free(struct SkKernel *kernel);

// # Safety
// `kernel` must be a live handle and `out_count` writable.
enum SkStatus sk_kernel_term_count(const struct SkKernel *kernel, size_t *out_count);

// # Safety
// `kernel` must be a live handle and `out_counts` writable.
enum SkStatus sk_kernel_op_counts(const struct SkKernel *kernel, struct SkOpCounts *out_counts);

// Emits the C benchmark source. `block` of 0 selects the unblocked loop
// nest. The string must be released with `sk_string_free`.
//
// # Safety
// `kernel` must be a live handle and `out_source` writable.
enum SkStatus sk_kernel_emit_c(const struct SkKernel *kernel,
                               bool openmp,
                               size_t block,
                               char **out_source);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void sk_string_free(char *s);

// Loads a machine file by path, or one of the built-in models by name
// (`hsw`, `bdw`, `skx`, `zen`, `toy`).
//
// # Safety
// `path_or_name` must be a NUL-terminated string and `out_machine` writable.
enum SkStatus sk_machine_load(const char *path_or_name, struct SkMachine **out_machine);

// Parses a machine description from TOML text.
//
// # Safety
// `toml_text` must be a NUL-terminated string and `out_machine` writable.
enum SkStatus sk_machine_parse(const char *toml_text, struct SkMachine **out_machine);

// # Safety
// `machine` must be null or a handle from this library not yet freed.
void sk_machine_free(struct SkMachine *machine);

// Evaluates the layer conditions at `grid` with the default safety factor.
//
// Writes up to `capacity` conditions to `out_conditions` and the number
// available to `out_len`. Returns `SK_STATUS_BUFFER_TOO_SMALL` when
// `capacity` is insufficient; pass a null buffer with capacity 0 to query
// the size. `out_traffic` may be null.
//
// # Safety
// Handles must be live; `out_conditions` must hold `capacity` elements.
enum SkStatus sk_layer_conditions(const struct SkKernel *kernel,
                                  const struct SkMachine *machine,
                                  struct SkGrid grid,
                                  struct SkLayerCondition *out_conditions,
                                  size_t capacity,
                                  size_t *out_len,
                                  struct SkTraffic *out_traffic);

// Single-core ECM prediction from layer-condition traffic at `grid`.
//
// # Safety
// Handles must be live and `out_ecm` writable.
enum SkStatus sk_ecm(const struct SkKernel *kernel,
                     const struct SkMachine *machine,
                     struct SkGrid grid,
                     struct SkEcm *out_ecm);

// Converts cycles per cache line to MLUP/s.
//
// # Safety
// `out_mlups` must be writable.
enum SkStatus sk_convert_to_mlups(double cycles_per_cl,
                                  double clock_hz,
                                  double lup_per_cl,
                                  double *out_mlups);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STENCILKIT_H */
