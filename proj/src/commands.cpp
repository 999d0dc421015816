#include "commands.hpp"

#include "error.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pcomp {

namespace {

namespace fs = std::filesystem;

ModelWeights resolve_weights(const RunConfig& cfg) {
    ModelWeights w = cfg.weights_path.empty() ? init_from_seed(cfg.model_config(), cfg.seed)
                                              : load_weights(cfg.weights_path);
    if (!cfg.weights_out.empty()) save_weights(w, cfg.weights_out);
    return w;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_io("cannot open output file: " + path);
    os << content;
    if (!os) fail_io("write failure: " + path);
}

std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

CostReport make_cost_report(const RunConfig& cfg, const PipelineResult& r) {
    const ModelConfig mc = cfg.model_config();
    CostReport cost;
    cost.score_pairs_prefill = r.score_pairs_prefill;
    cost.cache_rows_peak = r.cache_rows_peak;
    cost.simulated_memory_bytes_peak = cache_rows_to_bytes(mc, r.cache_rows_peak);
    cost.per_chunk_bytes =
        per_chunk_peak_bytes(mc, cfg.chunk_width, cfg.kv_budget, r.query_logits.rows);
    cost.max_parallel_chunks = max_parallel_chunks(cfg.memory_budget_bytes, cost.per_chunk_bytes);
    cost.wall_prefill_ms = r.wall_prefill_ms;
    cost.wall_per_token_ms = r.wall_per_token_ms;
    return cost;
}

std::string cost_csv(const std::vector<std::pair<std::size_t, CostReport>>& rows) {
    std::ostringstream os;
    os << "kv_budget,score_pairs_prefill,cache_rows_peak,simulated_memory_bytes_peak,"
          "per_chunk_bytes,max_parallel_chunks\n";
    for (const auto& [budget, c] : rows) {
        os << budget << "," << c.score_pairs_prefill << "," << c.cache_rows_peak << ","
           << c.simulated_memory_bytes_peak << "," << c.per_chunk_bytes << ","
           << c.max_parallel_chunks << "\n";
    }
    return os.str();
}

std::string timings_text(const std::vector<std::pair<std::size_t, CostReport>>& rows) {
    std::ostringstream os;
    os << "# wall-clock timings, machine-dependent; never asserted\n";
    for (const auto& [budget, c] : rows) {
        os << "kv_budget=" << budget << " wall_prefill_ms=" << fmt_real(c.wall_prefill_ms)
           << " wall_per_token_ms=" << fmt_real(c.wall_per_token_ms) << "\n";
    }
    return os.str();
}

struct LoadedRun {
    ModelWeights weights;
    RoPETable rope;
    TokenSequence context;
    TokenSequence query;
};

LoadedRun load_run_inputs(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.context_path.empty()) fail_validation("context_path is required");
    if (cfg.query_path.empty()) fail_validation("query_path is required");
    LoadedRun lr{resolve_weights(cfg), {}, {}, {}};
    lr.rope = RoPETable(lr.weights.cfg.d_head, lr.weights.cfg.max_train_positions);
    lr.context = load_token_file(cfg.context_path, cfg.token_format, lr.weights.cfg.vocab_size);
    lr.query = load_token_file(cfg.query_path, cfg.token_format, lr.weights.cfg.vocab_size);
    return lr;
}

std::string run_record(const PipelineResult& r) {
    std::ostringstream os;
    os << "generated=";
    for (std::size_t i = 0; i < r.generated.size(); ++i) {
        if (i) os << " ";
        os << r.generated[i];
    }
    os << "\n";
    os << "truncated=" << (r.truncated ? 1 : 0) << "\n";
    os << "ppl=" << fmt_real(r.ppl) << "\n";
    os << "retained_chunks=";
    for (std::size_t i = 0; i < r.retained_chunks.size(); ++i) {
        if (i) os << " ";
        os << r.retained_chunks[i];
    }
    os << "\n";
    os << "rows_encoded=" << r.rows_encoded << "\n";
    os << "rows_retained=" << r.rows_retained << "\n";
    os << "rows_global=" << r.rows_global << "\n";
    os << "max_position_seen=" << r.max_position_seen << "\n";
    return os.str();
}

} // namespace

RunOutput cmd_run(const RunConfig& cfg) {
    LoadedRun lr = load_run_inputs(cfg);
    PipelineResult result =
        run_pipeline(lr.weights, lr.rope, lr.context, lr.query, cfg.run_settings());

    // Cost-model exactness: analytic tally vs the counter embedded in the
    // attention path.
    ChunkPlan plan = split_chunks(lr.context, lr.query, cfg.chunk_width,
                                  lr.weights.cfg.max_train_positions);
    const ModelConfig mc = lr.weights.cfg;
    const std::uint64_t lh = static_cast<std::uint64_t>(mc.n_layers) * mc.n_heads;
    std::uint64_t expected = 0;
    for (std::size_t c = 0; c < plan.chunk_count; ++c) {
        const std::uint64_t len = plan.chunk_len(c) + plan.query_len;
        expected += lh * len * len;
    }
    const std::uint64_t retained_ctx =
        result.rows_retained -
        static_cast<std::uint64_t>(result.retained_chunks.size()) * lh * plan.query_len;
    expected += static_cast<std::uint64_t>(plan.query_len) * retained_ctx +
                lh * plan.query_len * plan.query_len;
    if (expected != result.score_pairs_prefill) {
        fail_validation("cost model mismatch: analytic score pairs " + std::to_string(expected) +
                        " != instrumented " + std::to_string(result.score_pairs_prefill));
    }

    RunOutput out{std::move(result), {}};
    out.cost = make_cost_report(cfg, out.result);

    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/run.txt", run_record(out.result));
    write_text(cfg.out_dir + "/cost.csv", cost_csv({{cfg.kv_budget, out.cost}}));
    write_text(cfg.out_dir + "/timings.txt", timings_text({{cfg.kv_budget, out.cost}}));
    return out;
}

std::vector<CostReport> cmd_bench(const RunConfig& cfg) {
    if (cfg.bench_budgets.empty()) fail_validation("bench: need at least one kv_budget");
    if (cfg.memory_budget_bytes == 0) fail_validation("bench: zero memory budget");
    LoadedRun lr = load_run_inputs(cfg);

    std::vector<CostReport> reports;
    std::vector<std::pair<std::size_t, CostReport>> rows;
    for (std::size_t budget : cfg.bench_budgets) {
        RunConfig c = cfg;
        c.kv_budget = budget;
        PipelineResult r = run_pipeline(lr.weights, lr.rope, lr.context, lr.query,
                                        c.run_settings());
        CostReport cost = make_cost_report(c, r);
        reports.push_back(cost);
        rows.emplace_back(budget, cost);
    }
    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/bench.csv", cost_csv(rows));
    write_text(cfg.out_dir + "/timings.txt", timings_text(rows));
    return reports;
}

AnalyzeOutput cmd_analyze(const RunConfig& cfg) {
    LoadedRun lr = load_run_inputs(cfg);
    RunSettings settings = cfg.run_settings();
    settings.capture = true;
    PipelineResult r = run_pipeline(lr.weights, lr.rope, lr.context, lr.query, settings);
    const ModelConfig mc = lr.weights.cfg;

    // profile + patterns over the global attention of each layer/head
    std::ostringstream profile_csv, patterns_csv;
    profile_csv << "layer,head,position,mass\n";
    patterns_csv << "layer,head,label,h,m,t\n";
    AnalyzeOutput out;
    std::vector<std::size_t> all_rows(r.query_logits.rows);
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    for (std::size_t l = 0; l < mc.n_layers; ++l) {
        for (std::size_t h = 0; h < mc.n_heads; ++h) {
            auto profile = attention_profile(r.global_attention.att[l][h], all_rows);
            for (std::size_t p = 0; p < profile.size(); ++p) {
                profile_csv << l << "," << h << "," << p << "," << fmt_real(profile[p]) << "\n";
            }
            PatternResult pat = classify_pattern(profile, cfg.head_frac, cfg.tail_frac);
            patterns_csv << l << "," << h << "," << pattern_label_name(pat.label) << ","
                         << fmt_real(pat.head_mass) << "," << fmt_real(pat.middle_mass) << ","
                         << fmt_real(pat.tail_mass) << "\n";
            ++out.pattern_rows;
        }
    }

    // outlier totals over the per-head cumulative scores of every chunk
    for (const auto& state : r.chunk_states) {
        for (const auto& layer : state.scores) {
            for (const auto& s : layer) {
                out.outlier_total_context += outlier_indices(s, cfg.lambda_mult).size();
            }
        }
    }

    // decay pairs from the last local-attention row of chunk 0, averaged over
    // layers/heads by distance
    std::ostringstream decay_csv;
    decay_csv << "distance,attention\n";
    if (!r.chunk_states.empty()) {
        const ChunkState& st = r.chunk_states.front();
        const std::size_t len = st.context_len + st.query_len;
        std::vector<double> by_dist(len, 0.0);
        std::size_t heads = 0;
        for (const auto& layer : st.attention) {
            for (const auto& a : layer) {
                for (std::size_t j = 0; j < len; ++j) {
                    by_dist[len - 1 - j] += a.at(len - 1, j);
                }
                ++heads;
            }
        }
        for (std::size_t d = 0; d < len; ++d) {
            decay_csv << d << "," << fmt_real(by_dist[d] / static_cast<double>(heads)) << "\n";
        }
    }

    // sparsity curve per configured mode
    SparsityCurve curve =
        sparsity_sweep(&lr.weights, &lr.rope, cfg.widths, cfg.sparsity_epsilon, cfg.trials,
                       cfg.sparsity_mode, cfg.decay_alpha, cfg.seed);
    std::ostringstream sparsity_csv;
    sparsity_csv << "w,epsilon,effective_mean,effective_std\n";
    for (const auto& rec : curve) {
        sparsity_csv << rec.w << "," << fmt_real(rec.epsilon) << ","
                     << fmt_real(rec.effective_mean) << "," << fmt_real(rec.effective_std) << "\n";
    }

    std::ostringstream record;
    record << run_record(r);
    record << "outlier_total=" << out.outlier_total_context << "\n";

    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/profile.csv", profile_csv.str());
    write_text(cfg.out_dir + "/patterns.csv", patterns_csv.str());
    write_text(cfg.out_dir + "/sparsity.csv", sparsity_csv.str());
    write_text(cfg.out_dir + "/decay.csv", decay_csv.str());
    write_text(cfg.out_dir + "/analyze.txt", record.str());
    return out;
}

SparsityVerdict cmd_verify_sparsity(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.widths.empty()) fail_validation("verify-sparsity: need at least one width");
    for (std::size_t i = 1; i < cfg.widths.size(); ++i) {
        if (cfg.widths[i] <= cfg.widths[i - 1]) {
            fail_validation("verify-sparsity: widths must be strictly ascending");
        }
    }
    const ModelWeights weights = (cfg.sparsity_mode == SparsityMode::toy_model)
                                     ? init_from_seed(cfg.model_config(), cfg.seed)
                                     : ModelWeights{};
    const RoPETable rope = (cfg.sparsity_mode == SparsityMode::toy_model)
                               ? RoPETable(cfg.d_head, cfg.max_train_positions)
                               : RoPETable{};
    const ModelWeights* wp = cfg.sparsity_mode == SparsityMode::toy_model ? &weights : nullptr;
    const RoPETable* rp = cfg.sparsity_mode == SparsityMode::toy_model ? &rope : nullptr;

    SparsityVerdict verdict;
    const auto counts = sparsity_trial_counts(wp, rp, cfg.widths, cfg.sparsity_epsilon, cfg.trials,
                                              cfg.sparsity_mode, cfg.decay_alpha, cfg.seed);
    verdict.curve = sparsity_sweep(wp, rp, cfg.widths, cfg.sparsity_epsilon, cfg.trials,
                                   cfg.sparsity_mode, cfg.decay_alpha, cfg.seed);
    verdict.single_width = cfg.widths.size() == 1;
    verdict.trend_pass = true;
    for (std::size_t i = 1; i < cfg.widths.size(); ++i) {
        std::size_t votes = 0;
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            const double f_prev = counts[i - 1][t] / static_cast<double>(cfg.widths[i - 1]);
            const double f_cur = counts[i][t] / static_cast<double>(cfg.widths[i]);
            if (f_cur <= f_prev + 1e-12) ++votes;
        }
        if (2 * votes <= cfg.trials) verdict.trend_pass = false;
    }

    // decay fit on a noiseless synthetic row at the largest width
    const std::size_t w = cfg.widths.back();
    auto row = synthetic_decay_row(w, cfg.decay_alpha, 0.0, cfg.seed);
    std::vector<std::pair<double, double>> pairs;
    std::ostringstream decay_csv;
    decay_csv << "distance,attention\n";
    for (std::size_t j = 0; j < w; ++j) {
        const double dist = static_cast<double>(w - 1 - j);
        pairs.emplace_back(dist, row[j]);
        decay_csv << fmt_real(dist) << "," << fmt_real(row[j]) << "\n";
    }
    verdict.fit = decay_fit(pairs);

    std::ostringstream sparsity_csv;
    sparsity_csv << "w,epsilon,effective_mean,effective_std\n";
    for (const auto& rec : verdict.curve) {
        sparsity_csv << rec.w << "," << fmt_real(rec.epsilon) << ","
                     << fmt_real(rec.effective_mean) << "," << fmt_real(rec.effective_std) << "\n";
    }
    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/sparsity.csv", sparsity_csv.str());
    write_text(cfg.out_dir + "/decay.csv", decay_csv.str());
    return verdict;
}

} // namespace pcomp
