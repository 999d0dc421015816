#include "local_attention.hpp"

#include "error.hpp"

#include <string>

namespace pcomp {

std::vector<double> cumulative_scores_row(const Matrix& attention, std::size_t context_len,
                                          std::size_t query_len, std::size_t q_obs) {
    if (q_obs < 1 || q_obs > query_len) {
        fail_validation("cumulative_scores: q_obs " + std::to_string(q_obs) +
                        " outside [1, " + std::to_string(query_len) + "]");
    }
    const std::size_t total = context_len + query_len;
    if (attention.rows != total || attention.cols != total) {
        fail_validation("cumulative_scores: attention shape mismatch");
    }
    std::vector<double> s(context_len, 0.0);
    for (std::size_t i = total - q_obs; i < total; ++i) {
        for (std::size_t j = 0; j < context_len; ++j) s[j] += attention.at(i, j);
    }
    return s;
}

std::vector<std::vector<std::vector<double>>> cumulative_scores(const ChunkState& state,
                                                                std::size_t q_obs) {
    std::vector<std::vector<std::vector<double>>> out(state.attention.size());
    for (std::size_t l = 0; l < state.attention.size(); ++l) {
        out[l].reserve(state.attention[l].size());
        for (const auto& a : state.attention[l]) {
            out[l].push_back(cumulative_scores_row(a, state.context_len, state.query_len, q_obs));
        }
    }
    return out;
}

double self_information(const Matrix& logits, const TokenSequence& query,
                        std::size_t context_len) {
    if (context_len < 1) fail_validation("self_information: empty context");
    double total = 0.0;
    for (std::size_t t = 0; t < query.size(); ++t) {
        const std::size_t predictor = context_len - 1 + t;
        auto lp = log_softmax_row(logits.row(predictor));
        total -= lp[static_cast<std::size_t>(query[t])];
    }
    return total;
}

ChunkState encode_chunk(const ModelWeights& weights, const RoPETable& rope, const ChunkPlan& plan,
                        std::size_t c, std::size_t q_obs, Counters* counters) {
    auto [tokens, positions] = assemble_chunk_input(plan, c);
    LocalForward fwd = forward_local(weights, rope, tokens, positions, counters);

    ChunkState state;
    state.chunk_index = c;
    state.context_len = plan.chunk_len(c);
    state.query_len = plan.query_len;
    state.kv = std::move(fwd.kv);
    state.attention = std::move(fwd.attention.att);
    state.logits = std::move(fwd.logits);

    const std::size_t eff_q_obs = std::min(q_obs, state.query_len);
    state.scores = cumulative_scores(state, eff_q_obs);
    state.self_information = self_information(state.logits, plan.query, state.context_len);
    auto row = state.logits.row(state.context_len - 1);
    state.last_context_logits.assign(row.begin(), row.end());
    return state;
}

} // namespace pcomp
