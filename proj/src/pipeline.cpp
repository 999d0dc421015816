#include "pipeline.hpp"

#include "error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <thread>

namespace pcomp {

bool GlobalCache::consistent() const {
    for (std::size_t l = 0; l < kv.k.size(); ++l) {
        for (std::size_t h = 0; h < kv.k[l].size(); ++h) {
            if (rowmap[l][h].size() != kv.k[l][h].rows || kv.k[l][h].rows != kv.v[l][h].rows) {
                return false;
            }
        }
    }
    return true;
}

GlobalCache concat_kv(const ModelConfig& cfg, const std::vector<CompressedKV>& survivors,
                      const KVCache* query_kv, std::size_t query_start_pos) {
    GlobalCache cache;
    cache.kv = KVCache(cfg);
    cache.rowmap.assign(cfg.n_layers, std::vector<std::vector<SegmentEntry>>(cfg.n_heads));
    for (const auto& s : survivors) {
        if (s.k.size() != cfg.n_layers || (cfg.n_layers && s.k[0].size() != cfg.n_heads)) {
            fail_validation("concat_kv: survivor cache shape does not match model config");
        }
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            for (std::size_t h = 0; h < cfg.n_heads; ++h) {
                const std::size_t n_ctx = s.retained_context_count(l, h);
                Matrix& k = cache.kv.k[l][h];
                Matrix& v = cache.kv.v[l][h];
                for (std::size_t i = 0; i < n_ctx; ++i) {
                    k.data.insert(k.data.end(), s.k[l][h].row(i).begin(), s.k[l][h].row(i).end());
                    v.data.insert(v.data.end(), s.v[l][h].row(i).begin(), s.v[l][h].row(i).end());
                    cache.rowmap[l][h].push_back(
                        {SegmentKind::chunk, s.chunk_index, s.retained[l][h][i]});
                }
                k.cols = v.cols = cfg.d_head;
                k.rows += n_ctx;
                v.rows += n_ctx;
            }
        }
    }
    if (query_kv) {
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            for (std::size_t h = 0; h < cfg.n_heads; ++h) {
                const Matrix& qk = query_kv->k[l][h];
                Matrix& k = cache.kv.k[l][h];
                Matrix& v = cache.kv.v[l][h];
                k.data.insert(k.data.end(), qk.data.begin(), qk.data.end());
                v.data.insert(v.data.end(), query_kv->v[l][h].data.begin(),
                              query_kv->v[l][h].data.end());
                k.cols = v.cols = cfg.d_head;
                k.rows += qk.rows;
                v.rows += qk.rows;
                for (std::size_t i = 0; i < qk.rows; ++i) {
                    cache.rowmap[l][h].push_back({SegmentKind::query, 0, query_start_pos + i});
                }
                cache.query_len = qk.rows;
            }
        }
    }
    return cache;
}

GlobalForward global_attention(const ModelWeights& weights, const RoPETable& rope,
                               GlobalCache& cache, const TokenSequence& query,
                               std::size_t query_start_pos, Counters* counters, bool capture) {
    if (query.empty()) fail_validation("global_attention: empty query");
    std::vector<std::size_t> positions(query.size());
    for (std::size_t i = 0; i < query.size(); ++i) positions[i] = query_start_pos + i;
    GlobalForward out;
    out.logits = forward(weights, rope, query, positions, cache.kv,
                         capture ? &out.attention : nullptr, counters);
    for (std::size_t l = 0; l < weights.cfg.n_layers; ++l) {
        for (std::size_t h = 0; h < weights.cfg.n_heads; ++h) {
            for (std::size_t i = 0; i < query.size(); ++i) {
                cache.rowmap[l][h].push_back({SegmentKind::query, 0, query_start_pos + i});
            }
        }
    }
    cache.query_len = query.size();
    return out;
}

DecodeResult decode(const ModelWeights& weights, const RoPETable& rope, GlobalCache& cache,
                    const Matrix& last_query_logits, std::size_t next_position,
                    std::size_t max_new, Counters* counters) {
    DecodeResult out;
    if (max_new == 0) return out;
    auto argmax = [](std::span<const double> row) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j) {
            if (row[j] > row[best]) best = j;
        }
        return static_cast<std::int32_t>(best);
    };
    std::int32_t next = argmax(last_query_logits.row(last_query_logits.rows - 1));
    for (std::size_t i = 0; i < max_new; ++i) {
        if (next_position >= weights.cfg.max_train_positions) {
            out.truncated = true;
            return out;
        }
        out.tokens.push_back(next);
        const std::int32_t tok[1] = {next};
        const std::size_t pos[1] = {next_position};
        Matrix logits = forward(weights, rope, tok, pos, cache.kv, nullptr, counters);
        for (std::size_t l = 0; l < weights.cfg.n_layers; ++l) {
            for (std::size_t h = 0; h < weights.cfg.n_heads; ++h) {
                cache.rowmap[l][h].push_back({SegmentKind::generated, 0, next_position});
            }
        }
        next = argmax(logits.row(0));
        ++next_position;
    }
    return out;
}

double query_perplexity(const Matrix& query_logits, const TokenSequence& query,
                        const std::vector<CompressedKV>& survivors) {
    if (query.empty()) fail_validation("query_perplexity: empty query");
    double total = 0.0;
    std::size_t terms = 0;
    if (!survivors.empty()) {
        auto lp = log_softmax_row(survivors.back().last_context_logits);
        total -= lp[static_cast<std::size_t>(query[0])];
        ++terms;
    }
    for (std::size_t t = 1; t < query.size(); ++t) {
        auto lp = log_softmax_row(query_logits.row(t - 1));
        total -= lp[static_cast<std::size_t>(query[t])];
        ++terms;
    }
    if (terms == 0) return 1.0;
    return std::exp(total / static_cast<double>(terms));
}

std::uint64_t expected_prefill_score_pairs(const ModelConfig& cfg, const ChunkPlan& plan,
                                           const std::vector<CompressedKV>& survivors) {
    const std::uint64_t lh = static_cast<std::uint64_t>(cfg.n_layers) * cfg.n_heads;
    std::uint64_t pairs = 0;
    for (std::size_t c = 0; c < plan.chunk_count; ++c) {
        const std::uint64_t len = plan.chunk_len(c) + plan.query_len;
        pairs += lh * len * len;
    }
    // global pass: per layer/head, w_q rows over retained + query columns
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            std::uint64_t retained = 0;
            for (const auto& s : survivors) retained += s.retained_context_count(l, h);
            pairs += static_cast<std::uint64_t>(plan.query_len) * (retained + plan.query_len);
        }
    }
    return pairs;
}

PipelineResult run_pipeline(const ModelWeights& weights, const RoPETable& rope,
                            const TokenSequence& context, const TokenSequence& query,
                            const RunSettings& settings) {
    using clock = std::chrono::steady_clock;
    const ModelConfig& cfg = weights.cfg;
    ChunkPlan plan = split_chunks(context, query, settings.chunk_width, cfg.max_train_positions);

    Counters counters;
    PipelineResult result;
    const auto t_prefill0 = clock::now();

    // Encode chunks (embarrassingly parallel, results keyed by index).
    std::vector<CompressedKV> compressed(plan.chunk_count);
    std::vector<ChunkState> states(settings.capture ? plan.chunk_count : 0);
    auto encode_one = [&](std::size_t c) {
        ChunkState state = encode_chunk(weights, rope, plan, c, settings.q_obs, &counters);
        CompressedKV kv = apply_policy(state, settings.policy, settings.mode);
        if (settings.capture) states[c] = std::move(state);
        compressed[c] = std::move(kv);
    };
    const std::size_t workers =
        settings.parallel_chunks ? std::max<std::size_t>(1, std::thread::hardware_concurrency())
                                 : 1;
    if (workers > 1 && plan.chunk_count > 1) {
        std::vector<std::future<void>> futs;
        std::atomic<std::size_t> next{0};
        for (std::size_t t = 0; t < std::min(workers, plan.chunk_count); ++t) {
            futs.push_back(std::async(std::launch::async, [&] {
                for (std::size_t c = next.fetch_add(1); c < plan.chunk_count;
                     c = next.fetch_add(1)) {
                    encode_one(c);
                }
            }));
        }
        for (auto& f : futs) f.get();
    } else {
        for (std::size_t c = 0; c < plan.chunk_count; ++c) encode_one(c);
    }

    // Streamed queue; accounting replayed in chunk order for determinism.
    ChunkQueue queue(settings.queue_capacity);
    std::uint64_t queue_rows = 0;
    std::uint64_t rows_peak = 0;
    for (std::size_t c = 0; c < plan.chunk_count; ++c) {
        const std::uint64_t full_rows = static_cast<std::uint64_t>(cfg.n_layers) * cfg.n_heads *
                                        (plan.chunk_len(c) + plan.query_len);
        result.rows_encoded += full_rows;
        rows_peak = std::max(rows_peak, queue_rows + full_rows);
        if (compressed[c].self_information <= settings.epsilon) {
            queue.push_chunk(c, compressed[c].self_information, std::move(compressed[c]));
        }
        queue_rows = queue.total_rows();
        rows_peak = std::max(rows_peak, queue_rows);
    }

    std::vector<CompressedKV> survivors = queue.retained_chunks();
    for (const auto& s : survivors) {
        result.retained_chunks.push_back(s.chunk_index);
        result.rows_retained += s.total_rows();
    }

    // Global stage: query re-encoded over the concatenated context rows.
    const std::size_t q_start = std::min(settings.chunk_width, plan.context.size());
    GlobalCache cache = concat_kv(cfg, survivors);
    GlobalForward global =
        global_attention(weights, rope, cache, plan.query, q_start, &counters, settings.capture);
    result.query_logits = global.logits;
    result.ppl = query_perplexity(global.logits, plan.query, survivors);

    rows_peak = std::max(rows_peak, cache.kv.total_rows());
    result.score_pairs_prefill = counters.score_pairs.load();
    const auto t_prefill1 = clock::now();
    result.wall_prefill_ms =
        std::chrono::duration<double, std::milli>(t_prefill1 - t_prefill0).count();

    DecodeResult dec =
        decode(weights, rope, cache, global.logits, q_start + plan.query_len, settings.max_new,
               &counters);
    result.generated = std::move(dec.tokens);
    result.truncated = dec.truncated;
    const auto t_decode = clock::now();
    result.wall_per_token_ms =
        result.generated.empty()
            ? 0.0
            : std::chrono::duration<double, std::milli>(t_decode - t_prefill1).count() /
                  static_cast<double>(result.generated.size());

    rows_peak = std::max(rows_peak, cache.kv.total_rows());
    result.rows_global = cache.kv.total_rows();
    result.cache_rows_peak = rows_peak;
    result.max_position_seen = counters.max_position.load();

    if (settings.capture) {
        result.chunk_states = std::move(states);
        result.global_attention = std::move(global.attention);
        result.global_rowmap = cache.rowmap;
    }
    return result;
}

} // namespace pcomp
