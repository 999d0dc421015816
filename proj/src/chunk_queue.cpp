#include "chunk_queue.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>

namespace pcomp {

ChunkQueue::ChunkQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 1) fail_validation("ChunkQueue: capacity must be >= 1");
}

void ChunkQueue::push_chunk(std::size_t chunk_index, double self_information, CompressedKV kv) {
    if (!std::isfinite(self_information)) {
        fail_validation("push_chunk: non-finite self-information score");
    }
    Entry e{chunk_index, self_information, std::move(kv)};
    auto pos = std::upper_bound(entries_.begin(), entries_.end(), e,
                                [](const Entry& a, const Entry& b) {
                                    if (a.self_information != b.self_information) {
                                        return a.self_information < b.self_information;
                                    }
                                    return a.chunk_index < b.chunk_index;
                                });
    entries_.insert(pos, std::move(e));
    if (entries_.size() > capacity_) entries_.pop_back();
}

void ChunkQueue::threshold_filter(double epsilon) {
    std::erase_if(entries_, [epsilon](const Entry& e) { return e.self_information > epsilon; });
}

std::uint64_t ChunkQueue::total_rows() const {
    std::uint64_t n = 0;
    for (const auto& e : entries_) n += e.kv.total_rows();
    return n;
}

std::vector<CompressedKV> ChunkQueue::retained_chunks() const {
    std::vector<const Entry*> ordered;
    ordered.reserve(entries_.size());
    for (const auto& e : entries_) ordered.push_back(&e);
    std::sort(ordered.begin(), ordered.end(),
              [](const Entry* a, const Entry* b) { return a->chunk_index < b->chunk_index; });
    std::vector<CompressedKV> out;
    out.reserve(ordered.size());
    for (const Entry* e : ordered) out.push_back(e->kv);
    return out;
}

} // namespace pcomp
