#pragma once

#include "chunker.hpp"
#include "model.hpp"

#include <vector>

namespace pcomp {

// Result of locally encoding one chunk (chunk ++ query, positions from 0).
struct ChunkState {
    std::size_t chunk_index = 0;
    std::size_t context_len = 0; // w_c
    std::size_t query_len = 0;   // w_q
    KVCache kv;
    std::vector<std::vector<Matrix>> attention; // [layer][head], (w_c+w_q)^2 causal
    Matrix logits;                              // (w_c+w_q) x vocab
    std::vector<std::vector<std::vector<double>>> scores; // [layer][head][w_c]
    double self_information = 0.0;              // nats
    std::vector<double> last_context_logits;    // predictor row for the first query token
};

// Sum of the last q_obs post-softmax query rows over the w_c context columns.
std::vector<double> cumulative_scores_row(const Matrix& attention, std::size_t context_len,
                                          std::size_t query_len, std::size_t q_obs);

std::vector<std::vector<std::vector<double>>> cumulative_scores(const ChunkState& state,
                                                                std::size_t q_obs);

// I_c = -sum_t log P(q_t | chunk, q_<t), in nats.
double self_information(const Matrix& logits, const TokenSequence& query, std::size_t context_len);

ChunkState encode_chunk(const ModelWeights& weights, const RoPETable& rope, const ChunkPlan& plan,
                        std::size_t c, std::size_t q_obs, Counters* counters = nullptr);

} // namespace pcomp
