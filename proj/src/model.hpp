#pragma once

#include "counters.hpp"
#include "tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pcomp {

struct ModelConfig {
    std::size_t n_layers = 8;
    std::size_t n_heads = 4;
    std::size_t d_head = 16;
    std::size_t vocab_size = 256;
    std::size_t max_train_positions = 128; // reusable position budget
    std::size_t ff_mult = 4;

    std::size_t d_model() const { return n_heads * d_head; }
    void validate() const;
};

struct LayerWeights {
    Matrix wq, wk, wv, wo; // d_model x d_model
    Matrix w1;             // d_model x (ff_mult*d_model)
    Matrix w2;             // (ff_mult*d_model) x d_model
};

struct ModelWeights {
    ModelConfig cfg;
    Matrix token_embedding; // vocab x d_model
    std::vector<LayerWeights> layers;
    Matrix lm_head; // d_model x vocab
};

// Precomputed cos/sin per (position, frequency), theta_i = base^(-2i/d_head).
struct RoPETable {
    std::size_t d_head = 0;
    std::size_t max_positions = 0;
    std::vector<double> cos_tab; // [pos][d_head/2]
    std::vector<double> sin_tab;

    RoPETable() = default;
    RoPETable(std::size_t d_head, std::size_t max_positions, double base = 10000.0);
};

// Deterministic weights: every entry from a seeded Box-Muller gaussian,
// scaled by 1/sqrt(d_model). Same (cfg, seed) is bit-identical.
ModelWeights init_from_seed(const ModelConfig& cfg, std::uint64_t seed);

// Rotates each d_head row by its position. Throws past the position budget.
Matrix apply_rope(const Matrix& x, std::span<const std::size_t> positions, const RoPETable& rope,
                  Counters* counters = nullptr);

// Per-layer per-head KV rows, grown as tokens are forwarded.
struct KVCache {
    std::vector<std::vector<Matrix>> k; // [layer][head]
    std::vector<std::vector<Matrix>> v;

    explicit KVCache(const ModelConfig& cfg)
        : k(cfg.n_layers, std::vector<Matrix>(cfg.n_heads)),
          v(cfg.n_layers, std::vector<Matrix>(cfg.n_heads)) {}
    KVCache() = default;

    std::uint64_t total_rows() const;
};

struct AttentionCapture {
    // [layer][head], rows = tokens of this pass, cols = prior cache rows + pass rows.
    std::vector<std::vector<Matrix>> att;
};

// One causal forward pass over `tokens` at `positions`, attending to everything
// already in `cache` plus the causal prefix of this pass. Appends this pass's
// K/V to the cache and returns logits (tokens x vocab).
Matrix forward(const ModelWeights& w, const RoPETable& rope, std::span<const std::int32_t> tokens,
               std::span<const std::size_t> positions, KVCache& cache,
               AttentionCapture* capture = nullptr, Counters* counters = nullptr);

struct LocalForward {
    KVCache kv;
    AttentionCapture attention;
    Matrix logits;
};

// Fresh-cache forward of a whole chunk with attention capture on.
LocalForward forward_local(const ModelWeights& w, const RoPETable& rope,
                           std::span<const std::int32_t> tokens,
                           std::span<const std::size_t> positions, Counters* counters = nullptr);

// Self-describing binary weight container (magic, LE u32 config, f64 matrices).
void save_weights(const ModelWeights& w, const std::string& path);
ModelWeights load_weights(const std::string& path);

} // namespace pcomp
