#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace pcomp {

using TokenSequence = std::vector<std::int32_t>;

// Disjoint ordered cover of the context; every assembled chunk is
// chunk ++ query with positions restarting at 0.
struct ChunkPlan {
    std::size_t chunk_width = 0;
    std::size_t query_len = 0;
    std::size_t chunk_count = 0;
    std::vector<std::pair<std::size_t, std::size_t>> ranges; // [begin, end) into context
    TokenSequence context;
    TokenSequence query;

    std::size_t chunk_len(std::size_t c) const { return ranges[c].second - ranges[c].first; }
};

ChunkPlan split_chunks(TokenSequence context, TokenSequence query, std::size_t w,
                       std::size_t max_train_positions);

std::pair<TokenSequence, std::vector<std::size_t>> assemble_chunk_input(const ChunkPlan& plan,
                                                                        std::size_t c);

} // namespace pcomp
