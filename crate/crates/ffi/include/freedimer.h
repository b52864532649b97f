#ifndef FREEDIMER_H
#define FREEDIMER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  FD_STATUS_OK = 0,
  FD_STATUS_NULL_POINTER = 1,
  FD_STATUS_VALIDATION = 2,
  FD_STATUS_NUMERICAL = 3,
  FD_STATUS_BUFFER_TOO_SMALL = 4,
  FD_STATUS_PANIC = 5,
} FdStatus;

/**
 * Opaque domain handle.
 */
typedef struct FdDomain FdDomain;

/**
 * Opaque augmented-graph handle; the inverse Kasteleyn matrix is computed on first use.
 */
typedef struct FdGraph FdGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
 * `len`). Returns the full message length excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t fd_last_error(char *buf, size_t len);

/**
 * Rectangle domain of odd sides with the top-row notch.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
FdStatus fd_domain_rectangle(size_t width, size_t height, FdDomain **out);

/**
 * Domain from `n` vertices with coordinates `xs[i], ys[i]`.
 *
 * # Safety
 * `xs` and `ys` must point to `n` readable values; `out` to a handle slot.
 */
FdStatus fd_domain_from_points(const int64_t *xs, const int64_t *ys, size_t n, FdDomain **out);

/**
 * Domain from JSON text `{"type":"rectangle",...}` / `{"type":"explicit",...}` or `rect:WxH`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` a handle slot.
 */
FdStatus fd_domain_parse(const char *text, FdDomain **out);

/**
 * # Safety
 * `d` must be null or a handle from this library not yet freed.
 */
void fd_domain_free(FdDomain *d);

/**
 * Number of vertices, 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t fd_domain_vertex_count(const FdDomain *d);

/**
 * Augmented graph with `nside` side triangle pairs. `finite_corners != 0` gives every leg
 * weight `z`; otherwise the two corner legs carry the corner weight.
 *
 * # Safety
 * `d` must be a live domain handle; `out` a handle slot.
 */
FdStatus fd_graph_new(const FdDomain *d,
                      double z,
                      size_t nside,
                      int32_t finite_corners,
                      FdGraph **out);

/**
 * # Safety
 * `g` must be null or a live graph handle.
 */
void fd_graph_free(FdGraph *g);

/**
 * # Safety
 * `g` must be null or a live graph handle.
 */
size_t fd_graph_vertex_count(const FdGraph *g);

/**
 * Weighted count of dimer covers, `|Pf K|`.
 *
 * # Safety
 * `g` must be a live graph handle and `out` writable.
 */
FdStatus fd_graph_partition_function(const FdGraph *g, double *out);

/**
 * Probability that the edge between `(ux,uy)` and `(vx,vy)` is in the cover. Apex vertices
 * sit on row -1.
 *
 * # Safety
 * `g` must be a live graph handle and `out` writable.
 */
FdStatus fd_graph_edge_probability(const FdGraph *g,
                                   int64_t ux,
                                   int64_t uy,
                                   int64_t vx,
                                   int64_t vy,
                                   double *out);

/**
 * Writes `q_0..=q_kmax` into `out`, which must hold `kmax + 1` values.
 *
 * # Safety
 * `out` must point to `len` writable values.
 */
FdStatus fd_jump_weights(double z, size_t kmax, double *out, size_t len);

/**
 * Draws one exact sample and writes the x coordinates of its monomers (sorted) into `xs`.
 * `count` receives the number of monomers even when the buffer is too small.
 *
 * # Safety
 * `g` must be a live graph handle, `xs` must point to `cap` writable values (or be null
 * with `cap == 0`) and `count` must be writable.
 */
FdStatus fd_sample_monomers(const FdGraph *g,
                            uint64_t seed,
                            uint64_t stream,
                            int64_t *xs,
                            size_t cap,
                            size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREEDIMER_H */
