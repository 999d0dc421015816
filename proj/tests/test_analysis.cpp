#include "analysis.hpp"
#include "error.hpp"
#include "eviction.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace pcomp;

namespace {

std::vector<double> normalized(std::vector<double> v) {
    double s = std::accumulate(v.begin(), v.end(), 0.0);
    for (double& x : v) x /= s;
    return v;
}

} // namespace

TEST_CASE("attention_profile: one row passes through, two rows average") {
    Matrix a(3, 4);
    a.data = {0.1, 0.2, 0.3, 0.4, //
              0.4, 0.3, 0.2, 0.1, //
              0.25, 0.25, 0.25, 0.25};
    auto p0 = attention_profile(a, {0});
    CHECK(p0[0] == doctest::Approx(0.1));
    CHECK(p0[3] == doctest::Approx(0.4));

    auto p01 = attention_profile(a, {0, 1});
    for (std::size_t j = 0; j < 4; ++j) CHECK(p01[j] == doctest::Approx(0.25));

    CHECK(std::accumulate(p01.begin(), p01.end(), 0.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(attention_profile(a, {}), Error);
    CHECK_THROWS_AS(attention_profile(a, {5}), Error);
}

TEST_CASE("attention_profile renormalizes rows that do not sum to one") {
    Matrix a(1, 2);
    a.data = {1.0, 3.0};
    auto p = attention_profile(a, {0});
    CHECK(p[0] == doctest::Approx(0.25));
    CHECK(p[1] == doctest::Approx(0.75));
}

TEST_CASE("classify_pattern: declared cases") {
    // 40/20/40 over 10 bins with head/tail fracs 0.2 -> U-shape
    std::vector<double> u{0.22, 0.22, 0.03, 0.03, 0.02, 0.02, 0.03, 0.03, 0.21, 0.21};
    PatternResult ru = classify_pattern(u, 0.2, 0.2);
    CHECK(ru.label == PatternLabel::u_shape);
    CHECK(ru.head_mass == doctest::Approx(0.44));
    CHECK(ru.tail_mass == doctest::Approx(0.42));

    std::vector<double> flat(10, 0.1);
    CHECK(classify_pattern(flat, 0.2, 0.2).label == PatternLabel::uniform_shape);

    // central spike
    std::vector<double> mountain(11, 0.01);
    mountain[5] = 0.9;
    CHECK(classify_pattern(normalized(mountain), 0.2, 0.2).label ==
          PatternLabel::mountain_shape);
}

TEST_CASE("classify_pattern is scale-invariant after renormalization") {
    std::vector<double> u{0.22, 0.22, 0.03, 0.03, 0.02, 0.02, 0.03, 0.03, 0.21, 0.21};
    std::vector<double> scaled = u;
    for (double& x : scaled) x *= 7.5;
    CHECK(classify_pattern(normalized(scaled), 0.2, 0.2).label ==
          classify_pattern(u, 0.2, 0.2).label);
}

TEST_CASE("classify_pattern: near-uniform deviations below half the uniform stay Uniform") {
    std::vector<double> p(20, 0.05);
    p[3] = 0.05 * 1.4;
    p[17] = 0.05 * 0.6;
    CHECK(classify_pattern(normalized(p), 0.2, 0.2).label == PatternLabel::uniform_shape);
}

TEST_CASE("classify_pattern input validation") {
    CHECK_THROWS_AS(classify_pattern({}, 0.2, 0.2), Error);
}

TEST_CASE("effective_entries counts strict exceedances") {
    std::vector<double> row{0.5, 0.2, 0.05, 0.25};
    CHECK(effective_entries(row, 0.1) == 3);
    CHECK(effective_entries(row, 0.5) == 0);  // boundary is strict
    CHECK(effective_entries(row, 0.0) == 4);
    CHECK(effective_entries(row, -1.0) == 4);
    CHECK(effective_entries({}, 0.1) == 0);
}

TEST_CASE("outlier counting shares the eviction threshold rule") {
    std::vector<double> s{10.0, 1.0, 1.0, 1.0};
    CHECK(outlier_indices(s, 2.0).size() == 1);
    CHECK(calibration_threshold(s, 2.0) == doctest::Approx(6.5));
    // after masking the spike nothing exceeds the recomputed threshold
    std::vector<double> rest{1.0, 1.0, 1.0};
    CHECK(outlier_indices(rest, 2.0).empty());
}

TEST_CASE("synthetic decay row: noiseless values match the closed form") {
    const std::size_t w = 16;
    const double alpha = 0.3;
    auto row = synthetic_decay_row(w, alpha, 0.0, 1);
    REQUIRE(row.size() == w);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
    // logits -alpha * (w-1-j): adjacent ratio is exp(alpha)
    for (std::size_t j = 0; j + 1 < w; ++j) {
        CHECK(row[j + 1] / row[j] == doctest::Approx(std::exp(alpha)).epsilon(1e-10));
    }
    CHECK(std::is_sorted(row.begin(), row.end()));
}

TEST_CASE("sparsity curve: effective fraction is non-increasing in width (synthetic)") {
    const std::vector<std::size_t> widths{32, 64, 128, 256};
    SparsityCurve curve =
        sparsity_sweep(nullptr, nullptr, widths, 1e-3, 24, SparsityMode::synthetic_decay, 0.25, 5);
    REQUIRE(curve.size() == widths.size());
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const double f0 = curve[i].effective_mean / static_cast<double>(curve[i].w);
        const double f1 = curve[i + 1].effective_mean / static_cast<double>(curve[i + 1].w);
        CHECK(f1 <= f0 + 1e-12);
        CHECK(curve[i].effective_std >= 0.0);
    }
    // absolute counts saturate: the decay bounds mass far from the diagonal
    CHECK(curve.back().effective_mean < 2.0 * curve.front().effective_mean);
}

TEST_CASE("sparsity trial counts have the requested shape and are reproducible") {
    auto a = sparsity_trial_counts(nullptr, nullptr, {16, 32}, 1e-3, 7,
                                   SparsityMode::synthetic_decay, 0.3, 11);
    auto b = sparsity_trial_counts(nullptr, nullptr, {16, 32}, 1e-3, 7,
                                   SparsityMode::synthetic_decay, 0.3, 11);
    REQUIRE(a.size() == 2);
    REQUIRE(a[0].size() == 7);
    CHECK(a == b);
}

TEST_CASE("toy-model sparsity mode guards its inputs") {
    CHECK_THROWS_AS(sparsity_trial_counts(nullptr, nullptr, {8}, 1e-3, 2,
                                          SparsityMode::toy_model, 0.3, 1),
                    Error);
    ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 1;
    cfg.d_head = 8;
    cfg.vocab_size = 16;
    cfg.max_train_positions = 16;
    cfg.ff_mult = 2;
    ModelWeights w = init_from_seed(cfg, 1);
    RoPETable rope(cfg.d_head, cfg.max_train_positions);
    CHECK_THROWS_AS(
        sparsity_trial_counts(&w, &rope, {32}, 1e-3, 2, SparsityMode::toy_model, 0.3, 1), Error);
    auto counts =
        sparsity_trial_counts(&w, &rope, {8, 16}, 1e-3, 3, SparsityMode::toy_model, 0.3, 1);
    REQUIRE(counts.size() == 2);
    for (const auto& per_width : counts) {
        for (double c : per_width) CHECK(c >= 1.0); // the diagonal always survives
    }
}

TEST_CASE("decay_fit recovers a planted rate from noiseless data") {
    const double alpha = 0.3;
    auto row = synthetic_decay_row(64, alpha, 0.0, 3);
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t j = 0; j < row.size(); ++j) {
        pairs.emplace_back(static_cast<double>(row.size() - 1 - j), row[j]);
    }
    DecayFit fit = decay_fit(pairs);
    CHECK(fit.rate == doctest::Approx(alpha).epsilon(0.05));
    CHECK(fit.r_squared > 0.99);
}

TEST_CASE("decay_fit survives moderate multiplicative noise") {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> noise(0.0, 0.05);
    const double alpha = 0.2;
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t d = 0; d < 80; ++d) {
        const double a = std::exp(-alpha * static_cast<double>(d) + noise(gen));
        pairs.emplace_back(static_cast<double>(d), a);
    }
    DecayFit fit = decay_fit(pairs);
    CHECK(fit.rate == doctest::Approx(alpha).epsilon(0.1));
    CHECK(fit.r_squared > 0.9);
}

TEST_CASE("decay_fit on distance-independent data reports a near-zero rate") {
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t d = 0; d < 16; ++d) {
        pairs.emplace_back(static_cast<double>(d), 0.0625);
    }
    DecayFit fit = decay_fit(pairs);
    CHECK(fit.rate == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("decay_fit input validation") {
    std::vector<std::pair<double, double>> few{{0, 1}, {1, 0.5}};
    CHECK_THROWS_AS(decay_fit(few), Error);
    std::vector<std::pair<double, double>> bad;
    for (std::size_t d = 0; d < 10; ++d) bad.emplace_back(static_cast<double>(d), 0.0);
    CHECK_THROWS_AS(decay_fit(bad), Error);
    std::vector<std::pair<double, double>> same_x;
    for (std::size_t i = 0; i < 10; ++i) same_x.emplace_back(2.0, 0.5);
    CHECK_THROWS_AS(decay_fit(same_x), Error);
}
