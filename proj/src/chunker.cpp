#include "chunker.hpp"

#include "error.hpp"

#include <numeric>
#include <string>

namespace pcomp {

ChunkPlan split_chunks(TokenSequence context, TokenSequence query, std::size_t w,
                       std::size_t max_train_positions) {
    if (w < 1) fail_validation("split_chunks: chunk width must be >= 1");
    if (query.empty()) fail_validation("split_chunks: empty query");
    if (context.empty()) fail_validation("split_chunks: empty context");
    if (w + query.size() > max_train_positions) {
        fail_validation("split_chunks: w + |query| = " + std::to_string(w + query.size()) +
                        " exceeds position budget " + std::to_string(max_train_positions));
    }
    ChunkPlan plan;
    plan.chunk_width = w;
    plan.query_len = query.size();
    plan.context = std::move(context);
    plan.query = std::move(query);
    const std::size_t n = plan.context.size();
    plan.chunk_count = (n + w - 1) / w;
    for (std::size_t c = 0; c < plan.chunk_count; ++c) {
        const std::size_t begin = c * w;
        const std::size_t end = std::min(begin + w, n);
        plan.ranges.emplace_back(begin, end);
    }
    return plan;
}

std::pair<TokenSequence, std::vector<std::size_t>> assemble_chunk_input(const ChunkPlan& plan,
                                                                        std::size_t c) {
    if (c >= plan.chunk_count) {
        fail_validation("assemble_chunk_input: chunk index " + std::to_string(c) +
                        " out of range (count " + std::to_string(plan.chunk_count) + ")");
    }
    const auto [begin, end] = plan.ranges[c];
    TokenSequence tokens(plan.context.begin() + static_cast<std::ptrdiff_t>(begin),
                         plan.context.begin() + static_cast<std::ptrdiff_t>(end));
    tokens.insert(tokens.end(), plan.query.begin(), plan.query.end());
    std::vector<std::size_t> positions(tokens.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    return {std::move(tokens), std::move(positions)};
}

} // namespace pcomp
