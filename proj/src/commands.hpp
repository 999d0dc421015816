#pragma once

#include "cost_model.hpp"
#include "run_config.hpp"

#include <string>

namespace pcomp {

struct RunOutput {
    PipelineResult result;
    CostReport cost;
};

// run: chunker -> local attention -> eviction -> queue -> global pipeline.
// Writes run.txt, cost.csv and timings.txt under out_dir.
RunOutput cmd_run(const RunConfig& cfg);

// bench: one row per kv_budget; writes bench.csv (deterministic columns) and
// timings.txt under out_dir.
std::vector<CostReport> cmd_bench(const RunConfig& cfg);

struct AnalyzeOutput {
    std::size_t outlier_total_context = 0; // outliers in per-head cumulative scores
    std::size_t pattern_rows = 0;
};

// analyze: pipeline with attention capture; writes profile.csv, patterns.csv,
// sparsity.csv, decay.csv and analyze.txt under out_dir.
AnalyzeOutput cmd_analyze(const RunConfig& cfg);

struct SparsityVerdict {
    SparsityCurve curve;
    DecayFit fit;
    bool trend_pass = false;
    bool single_width = false;
};

// verify-sparsity: sweep + decay fit; writes sparsity.csv and decay.csv.
SparsityVerdict cmd_verify_sparsity(const RunConfig& cfg);

} // namespace pcomp
