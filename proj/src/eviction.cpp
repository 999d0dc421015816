#include "eviction.hpp"

#include "error.hpp"
#include "tensor.hpp"

#include <algorithm>
#include <numeric>

namespace pcomp {

std::vector<std::set<Region>> EvictionPolicy::default_schedule(std::size_t n_layers) {
    std::vector<std::set<Region>> sched(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        if (l * 3 < n_layers) {
            sched[l] = {Region::middle};
        } else if (l * 3 < 2 * n_layers) {
            sched[l] = {Region::recency};
        } else {
            sched[l] = {Region::sink};
        }
    }
    return sched;
}

void EvictionPolicy::validate(std::size_t n_layers) const {
    if (kv_budget < 1) fail_validation("EvictionPolicy: kv_budget must be >= 1");
    if (!(lambda_mult > 1.0)) fail_validation("EvictionPolicy: lambda_mult must be > 1");
    if (!layer_regions.empty() && layer_regions.size() != n_layers) {
        fail_validation("EvictionPolicy: layer schedule size != n_layers");
    }
}

BiasRegions classify_bias_regions(std::size_t w_c, std::size_t sink_len, std::size_t recency_len) {
    std::size_t s = sink_len;
    std::size_t r = recency_len;
    if (s + r > w_c) {
        // proportional clamp, middle collapses to empty
        const std::size_t total = s + r;
        s = total == 0 ? 0 : w_c * sink_len / total;
        r = w_c - s;
    }
    BiasRegions out;
    for (std::size_t i = 0; i < s; ++i) out.sink.push_back(i);
    for (std::size_t i = s; i + r < w_c; ++i) out.middle.push_back(i);
    for (std::size_t i = w_c - r; i < w_c; ++i) out.recency.push_back(i);
    return out;
}

std::uint64_t CompressedKV::total_rows() const {
    std::uint64_t n = 0;
    for (const auto& layer : k) {
        for (const auto& m : layer) n += m.rows;
    }
    return n;
}

double calibration_threshold(const std::vector<double>& scores, double lambda_mult) {
    if (scores.empty()) return 0.0;
    const double mean =
        std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    return lambda_mult * mean;
}

std::vector<std::size_t> outlier_indices(const std::vector<double>& scores, double lambda_mult) {
    const double lambda = calibration_threshold(scores, lambda_mult);
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (scores[j] > lambda) out.push_back(j);
    }
    return out;
}

std::vector<std::size_t> calibration_retained_indices(const std::vector<double>& scores,
                                                      const BiasRegions& regions,
                                                      const std::set<Region>& scheduled,
                                                      double lambda_mult) {
    std::vector<bool> evict(scores.size(), false);
    if (!scheduled.empty()) {
        const double lambda = calibration_threshold(scores, lambda_mult);
        auto mark = [&](const std::vector<std::size_t>& idx) {
            for (std::size_t j : idx) {
                if (scores[j] > lambda) evict[j] = true;
            }
        };
        if (scheduled.contains(Region::sink)) mark(regions.sink);
        if (scheduled.contains(Region::recency)) mark(regions.recency);
        if (scheduled.contains(Region::middle)) mark(regions.middle);
    }
    std::vector<std::size_t> retained;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (!evict[j]) retained.push_back(j);
    }
    return retained;
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto src = m.row(idx[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

// Build a CompressedKV from per-layer-per-head retained CONTEXT index sets;
// query rows are always appended in full.
CompressedKV gather(const ChunkState& state,
                    const std::vector<std::vector<std::vector<std::size_t>>>& ctx_retained) {
    const std::size_t n_layers = state.kv.k.size();
    const std::size_t n_heads = n_layers ? state.kv.k[0].size() : 0;
    CompressedKV out;
    out.chunk_index = state.chunk_index;
    out.context_len = state.context_len;
    out.query_len = state.query_len;
    out.self_information = state.self_information;
    out.last_context_logits = state.last_context_logits;
    out.k.resize(n_layers);
    out.v.resize(n_layers);
    out.retained.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        out.k[l].resize(n_heads);
        out.v[l].resize(n_heads);
        out.retained[l].resize(n_heads);
        for (std::size_t h = 0; h < n_heads; ++h) {
            std::vector<std::size_t> idx = ctx_retained[l][h];
            for (std::size_t q = 0; q < state.query_len; ++q) {
                idx.push_back(state.context_len + q);
            }
            out.k[l][h] = gather_rows(state.kv.k[l][h], idx);
            out.v[l][h] = gather_rows(state.kv.v[l][h], idx);
            out.retained[l][h] = std::move(idx);
        }
    }
    return out;
}

std::vector<std::size_t> all_context_indices(std::size_t w_c) {
    std::vector<std::size_t> idx(w_c);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

// Top-budget of `scores` restricted to `candidates`, ties to the lower index,
// result ascending.
std::vector<std::size_t> top_budget_of(const std::vector<double>& scores,
                                       const std::vector<std::size_t>& candidates,
                                       std::size_t budget) {
    if (budget >= candidates.size()) return candidates;
    std::vector<double> sub(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) sub[i] = scores[candidates[i]];
    auto local = top_k_indices(sub, budget);
    std::vector<std::size_t> out;
    out.reserve(local.size());
    for (std::size_t i : local) out.push_back(candidates[i]);
    return out;
}

} // namespace

CompressedKV evict_low(const ChunkState& state, std::size_t kv_budget) {
    const std::size_t budget = std::min(kv_budget, state.context_len);
    const std::size_t n_layers = state.scores.size();
    std::vector<std::vector<std::vector<std::size_t>>> retained(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        retained[l].resize(state.scores[l].size());
        for (std::size_t h = 0; h < state.scores[l].size(); ++h) {
            retained[l][h] =
                top_budget_of(state.scores[l][h], all_context_indices(state.context_len), budget);
        }
    }
    return gather(state, retained);
}

CompressedKV evict_high_calibration(const ChunkState& state, const EvictionPolicy& policy) {
    const std::size_t n_layers = state.scores.size();
    policy.validate(n_layers);
    const auto schedule =
        policy.layer_regions.empty() ? EvictionPolicy::default_schedule(n_layers)
                                     : policy.layer_regions;
    const std::size_t auto_len = (state.context_len + 9) / 10;
    const BiasRegions regions =
        classify_bias_regions(state.context_len, policy.sink_len ? policy.sink_len : auto_len,
                              policy.recency_len ? policy.recency_len : auto_len);
    std::vector<std::vector<std::vector<std::size_t>>> retained(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        retained[l].resize(state.scores[l].size());
        for (std::size_t h = 0; h < state.scores[l].size(); ++h) {
            retained[l][h] = calibration_retained_indices(state.scores[l][h], regions, schedule[l],
                                                          policy.lambda_mult);
        }
    }
    return gather(state, retained);
}

CompressedKV apply_policy(const ChunkState& state, const EvictionPolicy& policy,
                          EvictionMode mode) {
    const std::size_t n_layers = state.scores.size();
    switch (mode) {
    case EvictionMode::none: {
        std::vector<std::vector<std::vector<std::size_t>>> retained(n_layers);
        for (std::size_t l = 0; l < n_layers; ++l) {
            retained[l].assign(state.scores[l].size(), all_context_indices(state.context_len));
        }
        return gather(state, retained);
    }
    case EvictionMode::compression:
        return evict_low(state, policy.kv_budget);
    case EvictionMode::calibration:
        return evict_high_calibration(state, policy);
    case EvictionMode::both: {
        // Calibration first so bias outliers never occupy budget slots.
        CompressedKV calibrated = evict_high_calibration(state, policy);
        const std::size_t budget = std::min(policy.kv_budget, state.context_len);
        std::vector<std::vector<std::vector<std::size_t>>> retained(n_layers);
        for (std::size_t l = 0; l < n_layers; ++l) {
            retained[l].resize(state.scores[l].size());
            for (std::size_t h = 0; h < state.scores[l].size(); ++h) {
                std::vector<std::size_t> survivors(
                    calibrated.retained[l][h].begin(),
                    calibrated.retained[l][h].begin() +
                        static_cast<std::ptrdiff_t>(calibrated.retained_context_count(l, h)));
                retained[l][h] = top_budget_of(state.scores[l][h], survivors, budget);
            }
        }
        return gather(state, retained);
    }
    }
    fail_validation("apply_policy: invalid mode");
}

} // namespace pcomp
