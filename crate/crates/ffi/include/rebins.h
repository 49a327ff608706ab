#ifndef REBINS_H
#define REBINS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define REBINS_STRATEGY_FIFO 0

#define REBINS_STRATEGY_LIFO 1

#define REBINS_STRATEGY_RANDOM 2

#define REBINS_RULE_BALANCED 0

#define REBINS_RULE_SCALED 1

#define REBINS_RULE_ADDITIVE 2

/**
 * Result of a fallible call.
 */
typedef enum {
  REBINS_STATUS_OK = 0,
  REBINS_STATUS_NULL_POINTER = 1,
  REBINS_STATUS_INVALID_ARGUMENT = 2,
  REBINS_STATUS_RUNTIME_ERROR = 3,
  REBINS_STATUS_PANIC = 4,
} RebinsStatus;

/**
 * Opaque graph handle.
 */
typedef struct RebinsGraph RebinsGraph;

/**
 * Opaque simulation handle: a configuration, its graph and RNG streams.
 */
typedef struct RebinsSim RebinsSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * call into this library from the same thread.
 */
const char *rebins_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rebins_version(void);

/**
 * Complete graph on `n >= 2` nodes.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
RebinsStatus rebins_graph_complete(size_t n, RebinsGraph **out);

/**
 * Cycle on `n >= 3` nodes.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
RebinsStatus rebins_graph_ring(size_t n, RebinsGraph **out);

/**
 * Random `d`-regular graph drawn with the given seed.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
RebinsStatus rebins_graph_random_regular(size_t n, size_t d, uint64_t seed, RebinsGraph **out);

/**
 * Graph from `edge_count` pairs stored as `2 * edge_count` node indices.
 *
 * # Safety
 * `pairs` must point to `2 * edge_count` readable values; `out` must be
 * null or valid for writes.
 */
RebinsStatus rebins_graph_from_edges(const uint32_t *pairs, size_t edge_count, RebinsGraph **out);

/**
 * Node count, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t rebins_graph_node_count(const RebinsGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle not used afterwards.
 */
void rebins_graph_free(RebinsGraph *graph);

/**
 * New simulation of `m` balls on a copy of `graph`. `placement` uses the
 * CLI syntax (`spread`, `point:IDX`, `random`, `counts:A,B,...`).
 *
 * # Safety
 * `graph` must be a live handle, `placement` a NUL-terminated string, and
 * `out` valid for writes.
 */
RebinsStatus rebins_sim_new(const RebinsGraph *graph,
                            size_t m,
                            const char *placement,
                            uint32_t strategy_code,
                            bool traced,
                            uint64_t seed,
                            RebinsSim **out);

/**
 * Advance one synchronous round.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
RebinsStatus rebins_sim_step(RebinsSim *sim);

/**
 * Advance `rounds` synchronous rounds.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
RebinsStatus rebins_sim_run(RebinsSim *sim, uint64_t rounds);

/**
 * Current round, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
uint64_t rebins_sim_round(const RebinsSim *sim);

/**
 * Node count, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t rebins_sim_node_count(const RebinsSim *sim);

/**
 * Copy the per-node loads into `buf`, which must hold at least
 * `rebins_sim_node_count(sim)` values.
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` writes.
 */
RebinsStatus rebins_sim_loads(const RebinsSim *sim, uint32_t *buf, size_t len);

/**
 * Largest queue, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
uint32_t rebins_sim_max_load(const RebinsSim *sim);

/**
 * Fraction of empty nodes, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double rebins_sim_empty_fraction(const RebinsSim *sim);

/**
 * Whether the current configuration is legitimate under the rule
 * (`alpha`, `REBINS_RULE_*`).
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
RebinsStatus rebins_sim_is_legitimate(const RebinsSim *sim, double alpha, uint32_t rule, bool *out);

/**
 * Whether every ball has visited every node. Requires a traced simulation.
 *
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
RebinsStatus rebins_sim_all_covered(const RebinsSim *sim, bool *out);

/**
 * # Safety
 * `sim` must be null or a live handle not used afterwards.
 */
void rebins_sim_free(RebinsSim *sim);

/**
 * Exact mean single-ball cover time of the complete graph on `n` nodes.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
RebinsStatus rebins_coupon_collector_mean(size_t n, double *out);

/**
 * Point estimate and 95% Wilson interval of `successes / trials`.
 *
 * # Safety
 * The three output pointers must be valid for writes.
 */
RebinsStatus rebins_wilson(uint64_t successes,
                           uint64_t trials,
                           double *fraction,
                           double *lower,
                           double *upper);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REBINS_H */
