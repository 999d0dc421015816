#pragma once

#include "chunk_queue.hpp"

#include <limits>
#include <optional>

namespace pcomp {

enum class SegmentKind { chunk, query, generated };

struct SegmentEntry {
    SegmentKind kind;
    std::size_t chunk_index; // valid for kind == chunk
    std::size_t position;    // original (chunk-local resp. query-frame) position
};

// Concatenated retained KV in document order, query segment appended by the
// global pass, generated rows appended during decoding. Row maps are kept per
// layer/head because calibration can retain different counts per head.
struct GlobalCache {
    KVCache kv;
    std::vector<std::vector<std::vector<SegmentEntry>>> rowmap; // [layer][head]
    std::size_t query_len = 0;

    bool consistent() const;
};

// Context rows of the survivors in document order; if query_kv is given its
// rows are appended last as the query segment.
GlobalCache concat_kv(const ModelConfig& cfg, const std::vector<CompressedKV>& survivors,
                      const KVCache* query_kv = nullptr, std::size_t query_start_pos = 0);

struct GlobalForward {
    Matrix logits; // w_q x vocab
    AttentionCapture attention;
};

// One pass of the query over the frozen cache (causal within
// the query, full visibility of retained rows). Appends query KV to the cache.
GlobalForward global_attention(const ModelWeights& weights, const RoPETable& rope,
                               GlobalCache& cache, const TokenSequence& query,
                               std::size_t query_start_pos, Counters* counters = nullptr,
                               bool capture = false);

struct DecodeResult {
    TokenSequence tokens;
    bool truncated = false; // position budget exhausted before max_new
};

DecodeResult decode(const ModelWeights& weights, const RoPETable& rope, GlobalCache& cache,
                    const Matrix& last_query_logits, std::size_t next_position,
                    std::size_t max_new, Counters* counters = nullptr);

// exp(mean over query tokens of -log P(q_t | cache, q_<t)). The first query
// token's predictor comes from the last retained chunk's final context row;
// with no survivors the t=1 term is skipped.
double query_perplexity(const Matrix& query_logits, const TokenSequence& query,
                        const std::vector<CompressedKV>& survivors);

struct RunSettings {
    std::size_t chunk_width = 96;
    std::size_t q_obs = 8;
    std::size_t queue_capacity = 3;
    double epsilon = std::numeric_limits<double>::infinity();
    EvictionMode mode = EvictionMode::both;
    EvictionPolicy policy;
    std::size_t max_new = 0;
    bool capture = false;
    bool parallel_chunks = true;
};

struct PipelineResult {
    TokenSequence generated;
    bool truncated = false;
    double ppl = 0.0;
    std::vector<std::size_t> retained_chunks;
    Matrix query_logits;
    // deterministic row accounting
    std::uint64_t rows_encoded = 0;   // KV rows produced by local encoding
    std::uint64_t rows_retained = 0;  // KV rows surviving eviction + queue
    std::uint64_t rows_global = 0;    // final global cache rows (incl. query/generated)
    std::uint64_t score_pairs_prefill = 0;
    std::uint64_t cache_rows_peak = 0;
    std::uint64_t max_position_seen = 0;
    double wall_prefill_ms = 0.0;
    double wall_per_token_ms = 0.0;
    // captures, populated when settings.capture is set
    std::vector<ChunkState> chunk_states;
    AttentionCapture global_attention;
    std::vector<std::vector<std::vector<SegmentEntry>>> global_rowmap;
};

PipelineResult run_pipeline(const ModelWeights& weights, const RoPETable& rope,
                            const TokenSequence& context, const TokenSequence& query,
                            const RunSettings& settings);

// Analytic score-pair tally for the prefill; must equal the instrumented
// counter (cost-model exactness contract).
std::uint64_t expected_prefill_score_pairs(const ModelConfig& cfg, const ChunkPlan& plan,
                                           const std::vector<CompressedKV>& survivors);

} // namespace pcomp
