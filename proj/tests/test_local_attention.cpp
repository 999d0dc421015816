#include "error.hpp"
#include "local_attention.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace pcomp;

namespace {

ModelConfig tiny_config(std::size_t vocab = 16) {
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_head = 8;
    cfg.vocab_size = vocab;
    cfg.max_train_positions = 32;
    cfg.ff_mult = 2;
    return cfg;
}

ModelWeights zero_weights(const ModelConfig& cfg) {
    ModelWeights w = init_from_seed(cfg, 0);
    for (auto& l : w.layers) {
        for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2}) {
            std::fill(m->data.begin(), m->data.end(), 0.0);
        }
    }
    std::fill(w.lm_head.data.begin(), w.lm_head.data.end(), 0.0); // uniform logits
    return w;
}

TokenSequence random_tokens(std::size_t n, std::size_t vocab, std::mt19937_64& gen) {
    std::uniform_int_distribution<std::int32_t> tok(0, static_cast<std::int32_t>(vocab) - 1);
    TokenSequence t(n);
    for (auto& x : t) x = tok(gen);
    return t;
}

// Copy-style model: uniform attention aggregates embeddings, lm_head reads
// them back. A chunk made of the query's token scores far lower I_c than an
// unrelated chunk.
ModelWeights aggregation_model(const ModelConfig& cfg, double readout_gain) {
    ModelWeights w = init_from_seed(cfg, 6);
    const std::size_t d = cfg.d_model();
    for (auto& l : w.layers) {
        std::fill(l.wq.data.begin(), l.wq.data.end(), 0.0);
        std::fill(l.wk.data.begin(), l.wk.data.end(), 0.0);
        std::fill(l.w1.data.begin(), l.w1.data.end(), 0.0);
        std::fill(l.w2.data.begin(), l.w2.data.end(), 0.0);
        l.wv = Matrix::identity(d);
        l.wo = Matrix::identity(d);
    }
    w.lm_head = Matrix(d, cfg.vocab_size);
    for (std::size_t v = 0; v < cfg.vocab_size; ++v) {
        for (std::size_t j = 0; j < d; ++j) {
            w.lm_head.at(j, v) = readout_gain * w.token_embedding.at(v, j);
        }
    }
    return w;
}

} // namespace

TEST_CASE("encode_chunk: shapes, purity, zero-weight uniform attention") {
    const ModelConfig cfg = tiny_config();
    ModelWeights w = zero_weights(cfg);
    RoPETable rope(cfg.d_head, cfg.max_train_positions);
    ChunkPlan plan = split_chunks({1, 2, 3, 4, 5}, {6, 7}, 3, cfg.max_train_positions);

    ChunkState st = encode_chunk(w, rope, plan, 0, 2);
    CHECK(st.context_len == 3);
    CHECK(st.query_len == 2);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            CHECK(st.kv.k[l][h].rows == 5);
            CHECK(st.kv.k[l][h].cols == cfg.d_head);
            CHECK(st.kv.v[l][h].rows == 5);
            const Matrix& a = st.attention[l][h];
            for (std::size_t i = 0; i < a.rows; ++i) {
                for (std::size_t j = 0; j <= i; ++j) {
                    CHECK(a.at(i, j) == doctest::Approx(1.0 / static_cast<double>(i + 1)));
                }
            }
        }
    }

    ChunkState st2 = encode_chunk(w, rope, plan, 0, 2);
    CHECK(st.logits.data == st2.logits.data);
    CHECK(st.self_information == st2.self_information);
}

TEST_CASE("cumulative_scores: hand cases on a constructed attention matrix") {
    // w_c = 2, w_q = 2; query rows over context are [0.5, 0.5] and [0.25, 0.75]
    Matrix a(4, 4);
    a.data = {1.0, 0, 0, 0, //
              0.5, 0.5, 0, 0, //
              0.5, 0.5, 0.0, 0, //
              0.25, 0.75, 0.0, 0.0};
    auto s = cumulative_scores_row(a, 2, 2, 2);
    CHECK(s[0] == doctest::Approx(0.75));
    CHECK(s[1] == doctest::Approx(1.25));

    // one-hot attention to token 0 from both query rows
    Matrix b(4, 4);
    b.data = {1, 0, 0, 0, //
              1, 0, 0, 0, //
              1, 0, 0, 0, //
              1, 0, 0, 0};
    auto s2 = cumulative_scores_row(b, 2, 2, 2);
    CHECK(s2[0] == doctest::Approx(2.0));
    CHECK(s2[1] == doctest::Approx(0.0));

    CHECK_THROWS_AS(cumulative_scores_row(a, 2, 2, 0), Error);
    CHECK_THROWS_AS(cumulative_scores_row(a, 2, 2, 3), Error);
}

TEST_CASE("cumulative_scores match a re-summation oracle on a random model") {
    const ModelConfig cfg = tiny_config();
    ModelWeights w = init_from_seed(cfg, 31);
    RoPETable rope(cfg.d_head, cfg.max_train_positions);
    std::mt19937_64 gen(8);
    ChunkPlan plan = split_chunks(random_tokens(14, cfg.vocab_size, gen),
                                  random_tokens(4, cfg.vocab_size, gen), 7,
                                  cfg.max_train_positions);
    const std::size_t q_obs = 3;
    ChunkState st = encode_chunk(w, rope, plan, 1, q_obs);
    const std::size_t total = st.context_len + st.query_len;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            for (std::size_t j = 0; j < st.context_len; ++j) {
                double want = 0.0;
                for (std::size_t i = total - q_obs; i < total; ++i) {
                    want += st.attention[l][h].at(i, j);
                }
                CHECK(std::abs(st.scores[l][h][j] - want) < 1e-10);
                CHECK(st.scores[l][h][j] >= 0.0);
            }
        }
    }
}

TEST_CASE("last q_obs rows conserve mass: context scores + query-query = q_obs") {
    const ModelConfig cfg = tiny_config();
    ModelWeights w = init_from_seed(cfg, 17);
    RoPETable rope(cfg.d_head, cfg.max_train_positions);
    std::mt19937_64 gen(15);
    ChunkPlan plan = split_chunks(random_tokens(9, cfg.vocab_size, gen),
                                  random_tokens(5, cfg.vocab_size, gen), 9,
                                  cfg.max_train_positions);
    const std::size_t q_obs = 4;
    ChunkState st = encode_chunk(w, rope, plan, 0, q_obs);
    const std::size_t total = st.context_len + st.query_len;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            double ctx_mass =
                std::accumulate(st.scores[l][h].begin(), st.scores[l][h].end(), 0.0);
            CHECK(ctx_mass <= static_cast<double>(q_obs) + 1e-8);
            double qq_mass = 0.0;
            for (std::size_t i = total - q_obs; i < total; ++i) {
                for (std::size_t j = st.context_len; j < total; ++j) {
                    qq_mass += st.attention[l][h].at(i, j);
                }
            }
            CHECK(ctx_mass + qq_mass == doctest::Approx(static_cast<double>(q_obs)).epsilon(1e-8));
        }
    }
}

TEST_CASE("self_information: uniform logits give w_q * ln(vocab)") {
    const ModelConfig cfg = tiny_config(4);
    ModelWeights w = zero_weights(cfg); // zero weights -> logits all zero -> uniform
    RoPETable rope(cfg.d_head, cfg.max_train_positions);
    ChunkPlan plan = split_chunks({0, 1, 2}, {1, 2}, 3, cfg.max_train_positions);
    ChunkState st = encode_chunk(w, rope, plan, 0, 2);
    CHECK(st.self_information == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("self_information: near-one-hot correct logits give I_c near 0") {
    Matrix logits(4, 4); // w_c=2, w_q=2, vocab=4
    TokenSequence query{2, 3};
    // predictor rows 1 and 2 strongly favor the true next token
    for (std::size_t j = 0; j < 4; ++j) {
        logits.at(1, j) = j == 2 ? 50.0 : 0.0;
        logits.at(2, j) = j == 3 ? 50.0 : 0.0;
    }
    CHECK(self_information(logits, query, 2) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("self_information matches a token-loop oracle on a random model") {
    const ModelConfig cfg = tiny_config();
    ModelWeights w = init_from_seed(cfg, 51);
    RoPETable rope(cfg.d_head, cfg.max_train_positions);
    std::mt19937_64 gen(3);
    ChunkPlan plan = split_chunks(random_tokens(10, cfg.vocab_size, gen),
                                  random_tokens(3, cfg.vocab_size, gen), 10,
                                  cfg.max_train_positions);
    ChunkState st = encode_chunk(w, rope, plan, 0, 3);
    double want = 0.0;
    for (std::size_t t = 0; t < plan.query_len; ++t) {
        auto lp = log_softmax_row(st.logits.row(st.context_len - 1 + t));
        want -= lp[static_cast<std::size_t>(plan.query[t])];
    }
    CHECK(std::abs(st.self_information - want) < 1e-9);
    CHECK(st.self_information >= 0.0);
}

TEST_CASE("chunk containing the query scores lower I_c than a random chunk") {
    ModelConfig cfg = tiny_config(12);
    ModelWeights w = aggregation_model(cfg, 8.0);
    RoPETable rope(cfg.d_head, cfg.max_train_positions);
    // chunk 0 repeats the query token, chunk 1 is unrelated
    TokenSequence context{5, 5, 5, 5, 1, 2, 3, 4};
    TokenSequence query{5, 5};
    ChunkPlan plan = split_chunks(context, query, 4, cfg.max_train_positions);
    ChunkState match = encode_chunk(w, rope, plan, 0, 2);
    ChunkState other = encode_chunk(w, rope, plan, 1, 2);
    CHECK(match.self_information < other.self_information);
}

TEST_CASE("encode order does not matter (chunks are independent)") {
    const ModelConfig cfg = tiny_config();
    ModelWeights w = init_from_seed(cfg, 61);
    RoPETable rope(cfg.d_head, cfg.max_train_positions);
    std::mt19937_64 gen(44);
    ChunkPlan plan = split_chunks(random_tokens(12, cfg.vocab_size, gen),
                                  random_tokens(2, cfg.vocab_size, gen), 4,
                                  cfg.max_train_positions);
    ChunkState a2 = encode_chunk(w, rope, plan, 2, 2);
    ChunkState a0 = encode_chunk(w, rope, plan, 0, 2);
    ChunkState b0 = encode_chunk(w, rope, plan, 0, 2);
    ChunkState b2 = encode_chunk(w, rope, plan, 2, 2);
    CHECK(a0.logits.data == b0.logits.data);
    CHECK(a2.logits.data == b2.logits.data);
}
