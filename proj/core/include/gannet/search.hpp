// Copyright 2025-present the gannet project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gannet/buffer_pool.hpp"
#include "gannet/distance.hpp"
#include "gannet/index_file.hpp"
#include "gannet/task.hpp"

namespace gannet {

struct SearchParams {
    uint32_t k = 10;
    uint32_t L = 64;              // candidate list capacity
    uint32_t beam_width = 0;      // W: look-ahead size for cache-aware pivoting
    uint32_t prefetch_depth = 0;  // N: stride prefetch of the nearest candidates
    bool record_trace = false;    // capture the exploration order for tests
};

struct QueryMetrics {
    uint64_t ios = 0;             // read requests issued on this query's behalf
    uint64_t hits = 0;            // record accesses answered from the pool
    uint64_t misses = 0;
    uint64_t pivots = 0;          // explorations redirected to a resident candidate
    uint64_t prefetch_issued = 0;
    uint64_t iterations = 0;
    uint64_t stall_ns = 0;        // time parked waiting on completions
    uint64_t latency_ns = 0;
    std::vector<uint32_t> visit_trace;
};

struct QueryOutcome {
    ResultSet result;
    QueryMetrics metrics;
    bool failed = false;
    std::string error;
};

/// Estimated-distance frontier, capacity L, distance-ascending with ties
/// toward the smaller vid. Duplicate suppression is the caller's seen-bitmap;
/// trimming drops the worst tail entry regardless of its explored flag.
class CandidateList {
public:
    struct Entry {
        float dist;
        uint32_t vid;
        bool explored;
    };

    explicit CandidateList(uint32_t capacity);

    void insert(uint32_t vid, float dist);
    /// Index of the nearest unexplored entry, or -1 when all are explored.
    int nearest_unexplored() const;
    void mark_explored(uint32_t vid);

    const Entry& operator[](size_t i) const { return entries_[i]; }
    size_t size() const { return entries_.size(); }
    uint32_t capacity() const { return capacity_; }

private:
    uint32_t capacity_;
    std::vector<Entry> entries_;
};

/// Record access used by the searches. The scheduler binds one per task; the
/// synchronous implementation below backs tests and the baseline search.
class FetchService {
public:
    virtual ~FetchService() = default;

    enum class Step { got, wait, yield };

    /// One attempt to materialize vid's record. got: copied into out.
    /// wait: a read was issued or joined, co_await SuspendForIo. yield:
    /// transient contention, co_await SuspendYield and retry.
    /// first_attempt gates the hit/miss accounting.
    virtual Step prepare_fetch(uint32_t vid, DecodedRecord& out, bool first_attempt) = 0;

    /// Fire-and-forget load; true when a read was actually issued.
    virtual bool prefetch(uint32_t vid) = 0;

    virtual bool is_resident(uint32_t vid) const = 0;

    /// True when the completion this task last awaited reported failure.
    virtual bool io_failed() const = 0;
};

/// Blocking implementation over (reader, pool): misses read the page on the
/// calling thread. prepare_fetch never returns wait; prefetch loads inline.
class SyncFetchService final : public FetchService {
public:
    SyncFetchService(const IndexReader& reader, BufferPool& pool, QueryMetrics* metrics)
        : reader_(reader), pool_(pool), metrics_(metrics) {}

    Step prepare_fetch(uint32_t vid, DecodedRecord& out, bool first_attempt) override;
    bool prefetch(uint32_t vid) override;
    bool is_resident(uint32_t vid) const override { return pool_.peek(vid).resident; }
    bool io_failed() const override { return false; }

private:
    const IndexReader& reader_;
    BufferPool& pool_;
    QueryMetrics* metrics_;
    std::vector<uint8_t> page_buf_;
};

/// Plain best-first refinement loop: expand the nearest unexplored candidate,
/// rank neighbors by resident 1-bit estimates, score expanded vertices by
/// their fetched 4-bit code, stop when the frontier is exhausted.
ResultSet best_first_search(const IndexReader& index, BufferPool& pool,
                            std::span<const float> q, uint32_t L, uint32_t k,
                            QueryMetrics* metrics = nullptr);

/// Cache-aware variant, runs as a coroutine under a worker. With W > 0, when
/// the nearest unexplored candidate is on disk the top-W look-ahead is
/// scanned for a resident candidate to explore instead, prefetching the
/// on-disk ones passed over. W = 0 reduces exactly to best_first_search.
/// prefetch_depth adds stride prefetching of the nearest unexplored
/// candidates each iteration.
SearchTask cache_aware_search(const IndexReader& index, FetchService& io,
                              std::span<const float> q, SearchParams params,
                              QueryMetrics& metrics);

/// Issues loads for the on-disk members of the N nearest unexplored
/// candidates. Returns how many reads were issued.
uint32_t prefetch_top(FetchService& io, const CandidateList& candidates, uint32_t n);

}  // namespace gannet
