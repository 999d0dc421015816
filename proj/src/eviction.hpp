#pragma once

#include "local_attention.hpp"

#include <set>
#include <vector>

namespace pcomp {

enum class Region { sink, recency, middle };
enum class EvictionMode { none, compression, calibration, both };

struct EvictionPolicy {
    std::size_t kv_budget = 32;
    double lambda_mult = 5.0;
    std::size_t sink_len = 0;    // 0 = auto: ceil(w_c / 10)
    std::size_t recency_len = 0; // 0 = auto: ceil(w_c / 10)
    // One region set per layer; empty set = no calibration at that layer.
    std::vector<std::set<Region>> layer_regions;

    // Proportional mapping of the 32-layer bands: shallow third evicts middle
    // bias, middle third recency, deep third sink.
    static std::vector<std::set<Region>> default_schedule(std::size_t n_layers);

    void validate(std::size_t n_layers) const;
};

struct BiasRegions {
    std::vector<std::size_t> sink;
    std::vector<std::size_t> recency;
    std::vector<std::size_t> middle;
};

// Partition of the chunk's context positions; oversized sink/recency are
// clamped proportionally.
BiasRegions classify_bias_regions(std::size_t w_c, std::size_t sink_len, std::size_t recency_len);

struct CompressedKV {
    std::size_t chunk_index = 0;
    std::size_t context_len = 0;
    std::size_t query_len = 0;
    double self_information = 0.0;
    std::vector<double> last_context_logits;
    // [layer][head]: retained context rows then all query rows, original order.
    std::vector<std::vector<Matrix>> k;
    std::vector<std::vector<Matrix>> v;
    // [layer][head]: ascending indices into the chunk (context then query).
    std::vector<std::vector<std::vector<std::size_t>>> retained;

    std::size_t retained_context_count(std::size_t layer, std::size_t head) const {
        return retained[layer][head].size() - query_len;
    }
    std::uint64_t total_rows() const;
};

// Shared threshold rule with the analysis lab's outlier counter.
double calibration_threshold(const std::vector<double>& scores, double lambda_mult);
std::vector<std::size_t> outlier_indices(const std::vector<double>& scores, double lambda_mult);

// Retained-context-index computation for one head of one layer; exposed so
// property tests can drive it on raw score vectors.
std::vector<std::size_t> calibration_retained_indices(const std::vector<double>& scores,
                                                      const BiasRegions& regions,
                                                      const std::set<Region>& scheduled,
                                                      double lambda_mult);

CompressedKV evict_low(const ChunkState& state, std::size_t kv_budget);
CompressedKV evict_high_calibration(const ChunkState& state, const EvictionPolicy& policy);
CompressedKV apply_policy(const ChunkState& state, const EvictionPolicy& policy,
                          EvictionMode mode);

} // namespace pcomp
