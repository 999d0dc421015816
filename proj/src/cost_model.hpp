#pragma once

#include "model.hpp"

#include <cstdint>

namespace pcomp {

struct CostReport {
    std::uint64_t score_pairs_prefill = 0;
    std::uint64_t cache_rows_peak = 0;
    std::uint64_t simulated_memory_bytes_peak = 0;
    std::uint64_t per_chunk_bytes = 0;
    std::uint64_t max_parallel_chunks = 0;
    double wall_prefill_ms = 0.0;
    double wall_per_token_ms = 0.0;
};

// Steady per-chunk footprint: retained KV rows across layers/heads as f64
// key+value pairs, plus one hidden-state activation buffer. The activation
// term is identical across budgets so budget ratios isolate the KV term.
std::uint64_t kv_bytes_per_chunk(const ModelConfig& cfg, std::size_t kv_budget,
                                 std::size_t query_len);
std::uint64_t activation_bytes_per_chunk(const ModelConfig& cfg, std::size_t chunk_width,
                                         std::size_t query_len);
std::uint64_t per_chunk_peak_bytes(const ModelConfig& cfg, std::size_t chunk_width,
                                   std::size_t kv_budget, std::size_t query_len);

std::uint64_t max_parallel_chunks(std::uint64_t memory_budget_bytes,
                                  std::uint64_t per_chunk_bytes);

std::uint64_t cache_rows_to_bytes(const ModelConfig& cfg, std::uint64_t rows);

} // namespace pcomp
