/*
 * C API for the pcomp shared library: chunked parallel attention with
 * self-information chunk eviction, per-head KV-cache eviction / attention
 * calibration, global attention over the compressed cache, and the attention
 * analysis lab. Opaque handles, integer status codes, per-thread error text.
 */
#ifndef PCOMP_H
#define PCOMP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pc_status {
    PC_OK = 0,
    PC_EVALIDATION = 1, /* bad config, bad argument, contract violation */
    PC_EIO = 2          /* file missing/unreadable/corrupt */
} pc_status;

typedef struct pc_config pc_config;
typedef struct pc_result pc_result;

/* Message for the most recent failure on this thread; empty string if none. */
const char* pc_error_message(void);

/* ---- configuration ----------------------------------------------------- */

pc_config* pc_config_new(void);
void pc_config_free(pc_config* cfg);

/* Flat key=value config file with '#' comments. */
pc_status pc_config_load(pc_config* cfg, const char* path);

/* Set one field by name, e.g. pc_config_set(cfg, "chunk_width", "96"). */
pc_status pc_config_set(pc_config* cfg, const char* key, const char* value);

/* ---- commands ----------------------------------------------------------
 * Each command validates, computes, then writes its files under out_dir
 * (overriding the config's out_dir when out_dir is non-NULL). Nothing is
 * written when a command fails. */

/* Full pipeline; writes run.txt, cost.csv, timings.txt. *out (optional)
 * receives a result handle to free with pc_result_free. */
pc_status pc_run(const pc_config* cfg, const char* out_dir, pc_result** out);

/* One cost row per configured kv_budget; writes bench.csv, timings.txt. */
pc_status pc_bench(const pc_config* cfg, const char* out_dir);

/* Pipeline with attention capture; writes profile.csv, patterns.csv,
 * sparsity.csv, decay.csv, analyze.txt. */
pc_status pc_analyze(const pc_config* cfg, const char* out_dir);

/* Sparsity sweep + decay fit; writes sparsity.csv, decay.csv. *trend_pass
 * (optional) is set to 1 when the effective-entry fraction is non-increasing
 * across the width ladder. */
pc_status pc_verify_sparsity(const pc_config* cfg, const char* out_dir, int* trend_pass);

/* ---- run results -------------------------------------------------------- */

void pc_result_free(pc_result* res);

size_t pc_result_generated_count(const pc_result* res);
int32_t pc_result_generated_at(const pc_result* res, size_t i);
int pc_result_truncated(const pc_result* res);
double pc_result_ppl(const pc_result* res);
size_t pc_result_retained_count(const pc_result* res);
size_t pc_result_retained_at(const pc_result* res, size_t i);

/* Deterministic counters: "score_pairs_prefill", "cache_rows_peak",
 * "rows_encoded", "rows_retained", "rows_global", "max_position_seen",
 * "simulated_memory_bytes_peak", "max_parallel_chunks". Unknown name: 0. */
uint64_t pc_result_counter(const pc_result* res, const char* name);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PCOMP_H */
