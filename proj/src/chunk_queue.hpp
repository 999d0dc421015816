#pragma once

#include "eviction.hpp"

#include <vector>

namespace pcomp {

// Fixed-capacity priority queue over chunks, keyed ascending by
// (self-information, chunk index). Streaming pushes end up equal to the
// offline top-capacity sort.
class ChunkQueue {
public:
    explicit ChunkQueue(std::size_t capacity);

    void push_chunk(std::size_t chunk_index, double self_information, CompressedKV kv);

    // Drops entries with I_c > epsilon. epsilon = +inf is the identity.
    void threshold_filter(double epsilon);

    // Survivors restored to document order (ascending chunk index).
    std::vector<CompressedKV> retained_chunks() const;

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t total_rows() const;

private:
    struct Entry {
        std::size_t chunk_index;
        double self_information;
        CompressedKV kv;
    };
    std::size_t capacity_;
    std::vector<Entry> entries_; // sorted ascending by (I_c, chunk_index)
};

} // namespace pcomp
