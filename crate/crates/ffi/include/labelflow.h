/* Copyright (c) 2026 The labelflow Authors. SPDX-License-Identifier: Apache-2.0 */

#ifndef LABELFLOW_H
#define LABELFLOW_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum LfStatus {
  LF_STATUS_OK = 0,
  LF_STATUS_NULL_ARGUMENT = 1,
  LF_STATUS_INVALID_UTF8 = 2,
  LF_STATUS_CONFIG = 3,
  LF_STATUS_TOPOLOGY = 4,
  LF_STATUS_RUN = 5,
  LF_STATUS_OUT_OF_RANGE = 6,
  LF_STATUS_BUFFER_TOO_SMALL = 7,
  LF_STATUS_PANIC = 8,
} LfStatus;

/*
 Outcome of one simulation run.
 */
typedef struct LfRunResult LfRunResult;

/*
 Parsed network. Shareable between runs.
 */
typedef struct LfTopology LfTopology;

/*
 Headline numbers of a run. Rates are per second of measured time.
 */
typedef struct LfKpis {
  double tx_bytes;
  double rx_bytes;
  double avg_tput_mbps;
  /*
   NaN when no sample had active flows
   */
  double max_fri_pct;
  double avg_labels_p;
  double max_labels_p;
  double sum_dft_mean;
  double msgs_per_s_mean;
  double msgs_per_s_max;
  double packet_in_per_s;
  uint64_t arrivals;
  uint64_t completed;
  uint64_t path_violations;
  uint64_t capacity_violations;
} LfKpis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, a static string.
 */
const char *lf_version(void);

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call into the library from the same thread.
 */
const char *lf_last_error(void);

/*
 Parses a topology document.

 # Safety
 `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LfStatus lf_topology_parse(const char *text, struct LfTopology **out);

/*
 Reads and parses a topology file.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LfStatus lf_topology_load(const char *path, struct LfTopology **out);

/*
 The built-in 39-node backbone.

 # Safety
 `out` must be a valid pointer.
 */
enum LfStatus lf_topology_backbone(struct LfTopology **out);

/*
 Node count, or 0 for a null handle.

 # Safety
 `topo` must be null or a live handle.
 */
size_t lf_topology_node_count(const struct LfTopology *topo);

/*
 Directed link count, or 0 for a null handle.

 # Safety
 `topo` must be null or a live handle.
 */
size_t lf_topology_link_count(const struct LfTopology *topo);

/*
 PE count, or 0 for a null handle.

 # Safety
 `topo` must be null or a live handle.
 */
size_t lf_topology_pe_count(const struct LfTopology *topo);

/*
 # Safety
 `topo` must be null or a handle not yet freed.
 */
void lf_topology_free(struct LfTopology *topo);

/*
 Runs one replication of threshold cell `cell` of the TOML scenario
 `config`. With a null `topo` the config's own topology is used
 (the built-in backbone when it names none).

 # Safety
 `config` must be a NUL-terminated string, `topo` null or a live handle,
 and `out` a valid pointer.
 */
enum LfStatus lf_run(const char *config,
                     const struct LfTopology *topo,
                     size_t cell,
                     uint64_t replication,
                     struct LfRunResult **out);

/*
 Fills `out` with the run's KPIs.

 # Safety
 `result` must be a live handle and `out` a valid pointer.
 */
enum LfStatus lf_result_kpis(const struct LfRunResult *result, struct LfKpis *out);

/*
 Writes the 64-digit hex SHA-256 of the result JSON plus a NUL into
 `buf`, which must hold at least 65 bytes.

 # Safety
 `result` must be a live handle and `buf` valid for `len` bytes.
 */
enum LfStatus lf_result_checksum(const struct LfRunResult *result, char *buf, size_t len);

/*
 Full result as JSON, or null for a null handle. Release with
 [`lf_string_free`].

 # Safety
 `result` must be null or a live handle.
 */
char *lf_result_json(const struct LfRunResult *result);

/*
 # Safety
 `result` must be null or a handle not yet freed.
 */
void lf_result_free(struct LfRunResult *result);

/*
 # Safety
 `s` must be null or a string returned by this library and not yet freed.
 */
void lf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LABELFLOW_H */
