#include "pcomp.h"

#include "commands.hpp"
#include "error.hpp"

#include <cstring>
#include <string>

using namespace pcomp;

struct pc_config {
    RunConfig cfg;
};

struct pc_result {
    PipelineResult result;
    CostReport cost;
};

namespace {

thread_local std::string g_error;

pc_status to_status(const Error& e) {
    g_error = e.what();
    return e.kind() == ErrKind::io ? PC_EIO : PC_EVALIDATION;
}

template <typename F>
pc_status guarded(F&& fn) {
    try {
        fn();
        g_error.clear();
        return PC_OK;
    } catch (const Error& e) {
        return to_status(e);
    } catch (const std::exception& e) {
        g_error = e.what();
        return PC_EVALIDATION;
    }
}

RunConfig with_out_dir(const pc_config* cfg, const char* out_dir) {
    RunConfig c = cfg->cfg;
    if (out_dir && *out_dir) c.out_dir = out_dir;
    return c;
}

} // namespace

extern "C" {

const char* pc_error_message(void) { return g_error.c_str(); }

pc_config* pc_config_new(void) { return new pc_config{}; }

void pc_config_free(pc_config* cfg) { delete cfg; }

pc_status pc_config_load(pc_config* cfg, const char* path) {
    if (!cfg || !path) {
        g_error = "null argument";
        return PC_EVALIDATION;
    }
    return guarded([&] { cfg->cfg = load_config_file(path); });
}

pc_status pc_config_set(pc_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) {
        g_error = "null argument";
        return PC_EVALIDATION;
    }
    return guarded([&] { cfg->cfg.set(key, value); });
}

pc_status pc_run(const pc_config* cfg, const char* out_dir, pc_result** out) {
    if (!cfg) {
        g_error = "null config";
        return PC_EVALIDATION;
    }
    return guarded([&] {
        RunOutput ro = cmd_run(with_out_dir(cfg, out_dir));
        if (out) *out = new pc_result{std::move(ro.result), ro.cost};
    });
}

pc_status pc_bench(const pc_config* cfg, const char* out_dir) {
    if (!cfg) {
        g_error = "null config";
        return PC_EVALIDATION;
    }
    return guarded([&] { cmd_bench(with_out_dir(cfg, out_dir)); });
}

pc_status pc_analyze(const pc_config* cfg, const char* out_dir) {
    if (!cfg) {
        g_error = "null config";
        return PC_EVALIDATION;
    }
    return guarded([&] { cmd_analyze(with_out_dir(cfg, out_dir)); });
}

pc_status pc_verify_sparsity(const pc_config* cfg, const char* out_dir, int* trend_pass) {
    if (!cfg) {
        g_error = "null config";
        return PC_EVALIDATION;
    }
    return guarded([&] {
        SparsityVerdict v = cmd_verify_sparsity(with_out_dir(cfg, out_dir));
        if (trend_pass) *trend_pass = v.trend_pass ? 1 : 0;
    });
}

void pc_result_free(pc_result* res) { delete res; }

size_t pc_result_generated_count(const pc_result* res) {
    return res ? res->result.generated.size() : 0;
}

int32_t pc_result_generated_at(const pc_result* res, size_t i) {
    if (!res || i >= res->result.generated.size()) return -1;
    return res->result.generated[i];
}

int pc_result_truncated(const pc_result* res) { return res && res->result.truncated ? 1 : 0; }

double pc_result_ppl(const pc_result* res) { return res ? res->result.ppl : 0.0; }

size_t pc_result_retained_count(const pc_result* res) {
    return res ? res->result.retained_chunks.size() : 0;
}

size_t pc_result_retained_at(const pc_result* res, size_t i) {
    if (!res || i >= res->result.retained_chunks.size()) return static_cast<size_t>(-1);
    return res->result.retained_chunks[i];
}

uint64_t pc_result_counter(const pc_result* res, const char* name) {
    if (!res || !name) return 0;
    const std::string n = name;
    if (n == "score_pairs_prefill") return res->result.score_pairs_prefill;
    if (n == "cache_rows_peak") return res->result.cache_rows_peak;
    if (n == "rows_encoded") return res->result.rows_encoded;
    if (n == "rows_retained") return res->result.rows_retained;
    if (n == "rows_global") return res->result.rows_global;
    if (n == "max_position_seen") return res->result.max_position_seen;
    if (n == "simulated_memory_bytes_peak") return res->cost.simulated_memory_bytes_peak;
    if (n == "max_parallel_chunks") return res->cost.max_parallel_chunks;
    return 0;
}

} // extern "C"
