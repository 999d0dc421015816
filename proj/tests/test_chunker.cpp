#include "chunker.hpp"
#include "error.hpp"

#include <doctest.h>

#include <numeric>

using namespace pcomp;

namespace {

TokenSequence iota_tokens(std::size_t n, std::int32_t start = 0) {
    TokenSequence t(n);
    std::iota(t.begin(), t.end(), start);
    return t;
}

} // namespace

TEST_CASE("split_chunks: ceil cover with a short final chunk") {
    ChunkPlan plan = split_chunks(iota_tokens(10), {9, 9}, 4, 16);
    REQUIRE(plan.chunk_count == 3);
    CHECK(plan.chunk_len(0) == 4);
    CHECK(plan.chunk_len(1) == 4);
    CHECK(plan.chunk_len(2) == 2);
}

TEST_CASE("split_chunks: single chunk when w >= N") {
    ChunkPlan plan = split_chunks(iota_tokens(4), {1}, 4, 16);
    CHECK(plan.chunk_count == 1);
    CHECK(plan.chunk_len(0) == 4);
}

TEST_CASE("split_chunks: N=1000 w=96 w_q=32 keeps every position under 128") {
    TokenSequence context(1000, 1);
    TokenSequence query(32, 2);
    ChunkPlan plan = split_chunks(context, query, 96, 128);
    CHECK(plan.chunk_count == 11); // ceil(1000/96)
    std::size_t max_pos = 0;
    for (std::size_t c = 0; c < plan.chunk_count; ++c) {
        auto [tokens, positions] = assemble_chunk_input(plan, c);
        CHECK(tokens.size() == plan.chunk_len(c) + 32);
        max_pos = std::max(max_pos, positions.back());
    }
    CHECK(max_pos == 127);
}

TEST_CASE("split_chunks validation errors") {
    CHECK_THROWS_AS(split_chunks(iota_tokens(10), {}, 4, 16), Error);
    CHECK_THROWS_AS(split_chunks(iota_tokens(10), {1, 2}, 15, 16), Error);
    CHECK_THROWS_AS(split_chunks({}, {1}, 4, 16), Error);
    CHECK_THROWS_AS(split_chunks(iota_tokens(10), {1}, 0, 16), Error);
}

TEST_CASE("assemble_chunk_input: chunk then query, positions from 0") {
    ChunkPlan plan = split_chunks(iota_tokens(10, 100), {9, 9}, 4, 16);
    auto [tokens, positions] = assemble_chunk_input(plan, 0);
    CHECK(tokens == TokenSequence{100, 101, 102, 103, 9, 9});
    CHECK(positions == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});

    auto [last_tokens, last_positions] = assemble_chunk_input(plan, 2);
    CHECK(last_tokens.size() == 2 + 2);
    CHECK(last_tokens == TokenSequence{108, 109, 9, 9});

    CHECK_THROWS_AS(assemble_chunk_input(plan, 3), Error);
}

TEST_CASE("context slices are a disjoint ordered exhaustive cover") {
    for (std::size_t n : {1u, 5u, 12u, 97u}) {
        for (std::size_t w : {1u, 3u, 8u}) {
            ChunkPlan plan = split_chunks(iota_tokens(n), {0}, w, 64);
            TokenSequence reassembled;
            for (std::size_t c = 0; c < plan.chunk_count; ++c) {
                auto [tokens, positions] = assemble_chunk_input(plan, c);
                // query (one token 0 at the tail) is identical everywhere
                CHECK(tokens.back() == 0);
                reassembled.insert(reassembled.end(), tokens.begin(), tokens.end() - 1);
                CHECK(positions.front() == 0);
                CHECK(positions.back() == tokens.size() - 1);
            }
            CHECK(reassembled == iota_tokens(n));
        }
    }
}
