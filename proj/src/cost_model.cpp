#include "cost_model.hpp"

#include "error.hpp"

namespace pcomp {

std::uint64_t kv_bytes_per_chunk(const ModelConfig& cfg, std::size_t kv_budget,
                                 std::size_t query_len) {
    const std::uint64_t rows = kv_budget + query_len;
    return rows * cfg.n_layers * cfg.n_heads * cfg.d_head * sizeof(double) * 2;
}

std::uint64_t activation_bytes_per_chunk(const ModelConfig& cfg, std::size_t chunk_width,
                                         std::size_t query_len) {
    return static_cast<std::uint64_t>(chunk_width + query_len) * cfg.d_model() * sizeof(double);
}

std::uint64_t per_chunk_peak_bytes(const ModelConfig& cfg, std::size_t chunk_width,
                                   std::size_t kv_budget, std::size_t query_len) {
    return kv_bytes_per_chunk(cfg, kv_budget, query_len) +
           activation_bytes_per_chunk(cfg, chunk_width, query_len);
}

std::uint64_t max_parallel_chunks(std::uint64_t memory_budget_bytes,
                                  std::uint64_t per_chunk_bytes) {
    if (memory_budget_bytes == 0) fail_validation("max_parallel_chunks: zero memory budget");
    if (per_chunk_bytes == 0) fail_validation("max_parallel_chunks: zero per-chunk bytes");
    return memory_budget_bytes / per_chunk_bytes;
}

std::uint64_t cache_rows_to_bytes(const ModelConfig& cfg, std::uint64_t rows) {
    return rows * cfg.d_head * sizeof(double) * 2;
}

} // namespace pcomp
