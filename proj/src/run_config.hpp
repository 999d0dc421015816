#pragma once

#include "analysis.hpp"
#include "pipeline.hpp"

#include <string>
#include <vector>

namespace pcomp {

enum class TokenFormat { text, binary };

// Flat key=value run configuration; every key mirrors a field name.
struct RunConfig {
    // model
    std::size_t n_layers = 8;
    std::size_t n_heads = 4;
    std::size_t d_head = 16;
    std::size_t vocab_size = 256;
    std::size_t max_train_positions = 128;
    std::size_t ff_mult = 4;
    std::uint64_t seed = 1;
    std::string weights_path;     // load instead of init_from_seed when set
    std::string weights_out;      // optionally save the weights used
    // data
    std::string context_path;
    std::string query_path;
    TokenFormat token_format = TokenFormat::text;
    // pipeline
    std::size_t chunk_width = 96;
    std::size_t q_obs = 8;
    std::size_t kv_budget = 32;
    std::size_t queue_capacity = 3;
    double epsilon = std::numeric_limits<double>::infinity();
    double lambda_mult = 5.0;
    EvictionMode mode = EvictionMode::both;
    std::string layer_schedule = "auto"; // or "LO-HI:regions;..." with '+' between regions
    std::size_t sink_len = 0;
    std::size_t recency_len = 0;
    std::size_t max_new = 16;
    bool parallel_chunks = true;
    // bench
    std::uint64_t memory_budget_bytes = 64ull << 20;
    std::vector<std::size_t> bench_budgets = {64, 32};
    // analysis
    std::vector<std::size_t> widths = {64, 128, 256, 512};
    double sparsity_epsilon = 0.01;
    std::size_t trials = 20;
    SparsityMode sparsity_mode = SparsityMode::synthetic_decay;
    double decay_alpha = 0.3;
    double head_frac = 0.1;
    double tail_frac = 0.1;
    // output
    std::string out_dir = "out";

    void set(const std::string& key, const std::string& value);
    void validate() const;

    ModelConfig model_config() const;
    RunSettings run_settings() const;
    std::vector<std::set<Region>> parsed_schedule() const;
};

RunConfig load_config_file(const std::string& path);

TokenSequence load_token_file(const std::string& path, TokenFormat format,
                              std::size_t vocab_size);
void save_token_file(const TokenSequence& tokens, const std::string& path, TokenFormat format);

} // namespace pcomp
