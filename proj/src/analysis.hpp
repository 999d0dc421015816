#pragma once

#include "model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pcomp {

enum class PatternLabel { u_shape, mountain_shape, uniform_shape };

std::string pattern_label_name(PatternLabel label);

struct PatternResult {
    PatternLabel label;
    double head_mass;
    double middle_mass;
    double tail_mass;
};

// Mean attention mass per key position over the selected rows, renormalized.
std::vector<double> attention_profile(const Matrix& a, const std::vector<std::size_t>& rows);

// Deterministic taxonomy: head/tail over-represented 2x -> U-shape; middle
// over-represented with a middle argmax -> Mountain; within 50% of uniform
// everywhere -> Uniform; otherwise the most over-represented band wins.
PatternResult classify_pattern(const std::vector<double>& profile, double head_frac,
                               double tail_frac);

std::size_t effective_entries(const std::vector<double>& a_row, double epsilon);

struct SparsityRecord {
    std::size_t w;
    double epsilon;
    double effective_mean;
    double effective_std;
};

using SparsityCurve = std::vector<SparsityRecord>;

enum class SparsityMode { toy_model, synthetic_decay };

// One softmax attention row whose logits decay linearly with distance from
// the row's own position (the modeling assumption behind the decay check),
// plus optional gaussian logit noise.
std::vector<double> synthetic_decay_row(std::size_t w, double alpha, double noise_sigma,
                                        std::uint64_t seed);

// Per-trial effective-entry counts, [width][trial]. Toy-model mode measures
// the last rows of real local attention, synthetic mode uses decay rows of
// any width.
std::vector<std::vector<double>> sparsity_trial_counts(const ModelWeights* weights,
                                                       const RoPETable* rope,
                                                       const std::vector<std::size_t>& widths,
                                                       double epsilon, std::size_t trials,
                                                       SparsityMode mode, double alpha,
                                                       std::uint64_t seed);

SparsityCurve sparsity_sweep(const ModelWeights* weights, const RoPETable* rope,
                             const std::vector<std::size_t>& widths, double epsilon,
                             std::size_t trials, SparsityMode mode, double alpha,
                             std::uint64_t seed);

struct DecayFit {
    double rate;      // |slope| of log(attention) vs distance
    double r_squared; // fit quality
};

DecayFit decay_fit(const std::vector<std::pair<double, double>>& pairs);

} // namespace pcomp
