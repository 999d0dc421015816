#include "analysis.hpp"

#include "error.hpp"
#include "tensor.hpp"
#include "chunker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pcomp {

std::string pattern_label_name(PatternLabel label) {
    switch (label) {
    case PatternLabel::u_shape: return "U-shape";
    case PatternLabel::mountain_shape: return "Mountain-shape";
    case PatternLabel::uniform_shape: return "Uniform-shape";
    }
    return "?";
}

std::vector<double> attention_profile(const Matrix& a, const std::vector<std::size_t>& rows) {
    if (rows.empty()) fail_validation("attention_profile: empty row set");
    std::vector<double> profile(a.cols, 0.0);
    for (std::size_t i : rows) {
        if (i >= a.rows) fail_validation("attention_profile: row index out of range");
        for (std::size_t j = 0; j < a.cols; ++j) profile[j] += a.at(i, j);
    }
    const double sum = std::accumulate(profile.begin(), profile.end(), 0.0);
    if (sum <= 0.0) fail_validation("attention_profile: zero total mass");
    for (double& x : profile) x /= sum;
    return profile;
}

PatternResult classify_pattern(const std::vector<double>& profile, double head_frac,
                               double tail_frac) {
    const std::size_t n = profile.size();
    if (n == 0) fail_validation("classify_pattern: empty profile");
    const std::size_t n_h = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                         std::llround(head_frac * static_cast<double>(n))));
    const std::size_t n_t = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                         std::llround(tail_frac * static_cast<double>(n))));
    const std::size_t n_m = n > n_h + n_t ? n - n_h - n_t : 0;

    double h = 0.0, t = 0.0;
    for (std::size_t j = 0; j < std::min(n_h, n); ++j) h += profile[j];
    for (std::size_t j = n - std::min(n_t, n); j < n; ++j) t += profile[j];
    const double m = std::max(0.0, 1.0 - h - t);
    const double u_h = static_cast<double>(n_h) / static_cast<double>(n);
    const double u_t = static_cast<double>(n_t) / static_cast<double>(n);
    const double u_m = static_cast<double>(n_m) / static_cast<double>(n);

    PatternResult res{PatternLabel::uniform_shape, h, m, t};

    const std::size_t arg_max =
        static_cast<std::size_t>(std::max_element(profile.begin(), profile.end()) -
                                 profile.begin());
    const bool argmax_middle = arg_max >= n_h && arg_max < n - n_t;

    if (h > 2.0 * u_h && t > 2.0 * u_t) {
        res.label = PatternLabel::u_shape;
        return res;
    }
    if (n_m > 0 && m > 2.0 * u_m && argmax_middle) {
        res.label = PatternLabel::mountain_shape;
        return res;
    }
    const double uniform = 1.0 / static_cast<double>(n);
    double max_dev = 0.0;
    for (double x : profile) max_dev = std::max(max_dev, std::abs(x - uniform));
    if (max_dev < 0.5 * uniform) {
        res.label = PatternLabel::uniform_shape;
        return res;
    }
    // fallback: most over-represented band
    const double r_h = u_h > 0 ? h / u_h : 0.0;
    const double r_m = u_m > 0 ? m / u_m : 0.0;
    const double r_t = u_t > 0 ? t / u_t : 0.0;
    if (r_m >= r_h && r_m >= r_t) {
        res.label = PatternLabel::mountain_shape;
    } else {
        res.label = PatternLabel::u_shape;
    }
    return res;
}

std::size_t effective_entries(const std::vector<double>& a_row, double epsilon) {
    std::size_t n = 0;
    for (double x : a_row) {
        if (x > epsilon) ++n;
    }
    return n;
}

std::vector<double> synthetic_decay_row(std::size_t w, double alpha, double noise_sigma,
                                        std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    Matrix logits(1, w);
    for (std::size_t j = 0; j < w; ++j) {
        const double dist = static_cast<double>(w - 1 - j);
        logits.at(0, j) = -alpha * dist + (noise_sigma > 0.0 ? noise(gen) : 0.0);
    }
    Matrix sm = softmax_rows(logits, 1.0);
    return {sm.data.begin(), sm.data.end()};
}

std::vector<std::vector<double>> sparsity_trial_counts(const ModelWeights* weights,
                                                       const RoPETable* rope,
                                                       const std::vector<std::size_t>& widths,
                                                       double epsilon, std::size_t trials,
                                                       SparsityMode mode, double alpha,
                                                       std::uint64_t seed) {
    if (trials < 1) fail_validation("sparsity_sweep: trials must be >= 1");
    std::vector<std::vector<double>> all;
    std::mt19937_64 gen(seed);
    for (std::size_t w : widths) {
        std::vector<double> counts;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            if (mode == SparsityMode::synthetic_decay) {
                auto row = synthetic_decay_row(w, alpha, 0.5, gen());
                counts.push_back(static_cast<double>(effective_entries(row, epsilon)));
            } else {
                if (!weights || !rope) {
                    fail_validation("sparsity_sweep: toy-model mode needs weights");
                }
                if (w > weights->cfg.max_train_positions) {
                    fail_validation("sparsity_sweep: width exceeds position budget; "
                                    "use synthetic-decay mode");
                }
                std::uniform_int_distribution<std::int32_t> tok(
                    0, static_cast<std::int32_t>(weights->cfg.vocab_size) - 1);
                TokenSequence tokens(w);
                for (auto& t : tokens) t = tok(gen);
                std::vector<std::size_t> positions(w);
                std::iota(positions.begin(), positions.end(), std::size_t{0});
                LocalForward fwd = forward_local(*weights, *rope, tokens, positions);
                double mean_count = 0.0;
                std::size_t heads = 0;
                for (const auto& layer : fwd.attention.att) {
                    for (const auto& a : layer) {
                        auto last = a.row(a.rows - 1);
                        std::vector<double> row(last.begin(), last.end());
                        mean_count += static_cast<double>(effective_entries(row, epsilon));
                        ++heads;
                    }
                }
                counts.push_back(mean_count / static_cast<double>(heads));
            }
        }
        all.push_back(std::move(counts));
    }
    return all;
}

SparsityCurve sparsity_sweep(const ModelWeights* weights, const RoPETable* rope,
                             const std::vector<std::size_t>& widths, double epsilon,
                             std::size_t trials, SparsityMode mode, double alpha,
                             std::uint64_t seed) {
    const auto all = sparsity_trial_counts(weights, rope, widths, epsilon, trials, mode, alpha, seed);
    SparsityCurve curve;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const auto& counts = all[i];
        const double mean =
            std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
        double var = 0.0;
        for (double c : counts) var += (c - mean) * (c - mean);
        var /= static_cast<double>(counts.size());
        curve.push_back({widths[i], epsilon, mean, std::sqrt(var)});
    }
    return curve;
}

DecayFit decay_fit(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 8) fail_validation("decay_fit: need at least 8 points");
    double sx = 0.0, sy = 0.0;
    for (const auto& [d, a] : pairs) {
        if (!(a > 0.0)) fail_validation("decay_fit: attention values must be > 0");
        sx += d;
        sy += std::log(a);
    }
    const double n = static_cast<double>(pairs.size());
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [d, a] : pairs) {
        const double dx = d - mx;
        const double dy = std::log(a) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) fail_validation("decay_fit: degenerate distances (zero variance)");
    const double slope = sxy / sxx;
    const double r2 = syy == 0.0 ? 0.0 : (sxy * sxy) / (sxx * syy);
    return {std::abs(slope), r2};
}

} // namespace pcomp
