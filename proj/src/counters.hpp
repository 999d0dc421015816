#pragma once

#include <atomic>
#include <cstdint>

namespace pcomp {

// Exact instrumentation counters, shared across chunk workers.
struct Counters {
    std::atomic<std::uint64_t> score_pairs{0};      // q*k dot products evaluated
    std::atomic<std::uint64_t> max_position{0};     // largest position id ever roped
    std::atomic<std::uint64_t> cache_rows_peak{0};  // peak live KV rows (all layers/heads)

    void add_score_pairs(std::uint64_t n) { score_pairs.fetch_add(n, std::memory_order_relaxed); }

    void note_position(std::uint64_t p) {
        std::uint64_t cur = max_position.load(std::memory_order_relaxed);
        while (p > cur && !max_position.compare_exchange_weak(cur, p, std::memory_order_relaxed)) {
        }
    }

    void note_cache_rows(std::uint64_t rows) {
        std::uint64_t cur = cache_rows_peak.load(std::memory_order_relaxed);
        while (rows > cur &&
               !cache_rows_peak.compare_exchange_weak(cur, rows, std::memory_order_relaxed)) {
        }
    }
};

} // namespace pcomp
