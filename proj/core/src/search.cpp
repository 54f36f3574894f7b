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

#include "gannet/search.hpp"

#include <algorithm>
#include <thread>

#include "gannet/error.hpp"

namespace gannet {

CandidateList::CandidateList(uint32_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw_invalid_argument("CandidateList: capacity must be positive");
    }
    entries_.reserve(capacity + 1);
}

void CandidateList::insert(uint32_t vid, float dist) {
    Entry e{dist, vid, false};
    auto pos = std::lower_bound(entries_.begin(), entries_.end(), e,
                                [](const Entry& a, const Entry& b) {
                                    if (a.dist != b.dist) {
                                        return a.dist < b.dist;
                                    }
                                    return a.vid < b.vid;
                                });
    if (entries_.size() >= capacity_ && pos == entries_.end()) {
        return;
    }
    entries_.insert(pos, e);
    if (entries_.size() > capacity_) {
        entries_.pop_back();
    }
}

int CandidateList::nearest_unexplored() const {
    for (size_t i = 0; i < entries_.size(); ++i) {
        if (!entries_[i].explored) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

void CandidateList::mark_explored(uint32_t vid) {
    for (auto& e : entries_) {
        if (e.vid == vid) {
            e.explored = true;
            return;
        }
    }
}

FetchService::Step SyncFetchService::prepare_fetch(uint32_t vid, DecodedRecord& out,
                                                   bool first_attempt) {
    for (;;) {
        RecordLocation loc = first_attempt ? pool_.lookup(vid) : pool_.peek(vid);
        if (first_attempt && metrics_ != nullptr) {
            (loc.resident ? metrics_->hits : metrics_->misses)++;
        }
        first_attempt = false;
        if (loc.resident) {
            if (pool_.try_read(vid, loc.value, out)) {
                return Step::got;
            }
            continue;  // evicted or reused underneath us
        }
        auto res = pool_.begin_load(vid, loc.value, /*allow_evict=*/true);
        switch (res.status) {
            case BufferPool::BeginLoad::resident:
                continue;
            case BufferPool::BeginLoad::already_loading:
            case BufferPool::BeginLoad::retry_later:
                std::this_thread::yield();
                continue;
            case BufferPool::BeginLoad::reserved:
                if (page_buf_.size() != reader_.page_size()) {
                    page_buf_.resize(reader_.page_size());
                }
                try {
                    reader_.read_page(res.reservation.page_id, page_buf_);
                } catch (...) {
                    pool_.abort_load(res.reservation);
                    throw;
                }
                pool_.complete_load(res.reservation, page_buf_);
                if (metrics_ != nullptr) {
                    metrics_->ios++;
                }
                continue;
        }
    }
}

bool SyncFetchService::prefetch(uint32_t vid) {
    RecordLocation loc = pool_.peek(vid);
    if (loc.resident) {
        return false;
    }
    auto res = pool_.begin_load(vid, loc.value, /*allow_evict=*/false);
    if (res.status != BufferPool::BeginLoad::reserved) {
        return false;
    }
    if (page_buf_.size() != reader_.page_size()) {
        page_buf_.resize(reader_.page_size());
    }
    try {
        reader_.read_page(res.reservation.page_id, page_buf_);
    } catch (...) {
        pool_.abort_load(res.reservation);
        throw;
    }
    pool_.complete_load(res.reservation, page_buf_);
    if (metrics_ != nullptr) {
        metrics_->ios++;
    }
    return true;
}

uint32_t prefetch_top(FetchService& io, const CandidateList& candidates, uint32_t n) {
    uint32_t issued = 0;
    uint32_t considered = 0;
    for (size_t i = 0; i < candidates.size() && considered < n; ++i) {
        if (candidates[i].explored) {
            continue;
        }
        considered++;
        if (!io.is_resident(candidates[i].vid) && io.prefetch(candidates[i].vid)) {
            issued++;
        }
    }
    return issued;
}

namespace {

void validate_query(const IndexReader& index, std::span<const float> q, uint32_t L, uint32_t k,
                    uint32_t W) {
    if (q.size() != index.dim()) {
        throw_invalid_argument("search: query dimension mismatch");
    }
    if (k == 0 || L == 0 || k > L) {
        throw_invalid_argument("search: need 1 <= k <= L");
    }
    if (W > L) {
        throw_invalid_argument("search: beam width exceeds candidate list size");
    }
}

ResultSet finish(std::vector<std::pair<float, uint32_t>>& refined, uint32_t k) {
    std::sort(refined.begin(), refined.end());
    ResultSet out;
    size_t take = std::min<size_t>(k, refined.size());
    out.ids.reserve(take);
    out.distances.reserve(take);
    for (size_t i = 0; i < take; ++i) {
        out.distances.push_back(refined[i].first);
        out.ids.push_back(refined[i].second);
    }
    return out;
}

}  // namespace

ResultSet best_first_search(const IndexReader& index, BufferPool& pool,
                            std::span<const float> q, uint32_t L, uint32_t k,
                            QueryMetrics* metrics) {
    validate_query(index, q, L, k, 0);
    QueryMetrics local;
    QueryMetrics& m = metrics != nullptr ? *metrics : local;
    SyncFetchService io(index, pool, &m);
    const ScalarQuantizer& quant = index.quantizer();

    CandidateList P(L);
    std::vector<uint8_t> seen(index.n(), 0);
    uint32_t entry = index.entry_point();
    seen[entry] = 1;
    P.insert(entry, quant.estimate_distance_binary(q, index.binary_code(entry)));

    std::vector<std::pair<float, uint32_t>> refined;
    DecodedRecord rec;
    for (;;) {
        int vi = P.nearest_unexplored();
        if (vi < 0) {
            break;
        }
        uint32_t v = P[static_cast<size_t>(vi)].vid;
        io.prepare_fetch(v, rec, true);
        refined.emplace_back(quant.estimate_distance_extended(q, rec.extended.data()), v);
        P.mark_explored(v);
        m.iterations++;
        m.visit_trace.push_back(v);
        for (uint32_t nb : rec.adjacency) {
            if (seen[nb]) {
                continue;
            }
            seen[nb] = 1;
            P.insert(nb, quant.estimate_distance_binary(q, index.binary_code(nb)));
        }
    }
    return finish(refined, k);
}

SearchTask cache_aware_search(const IndexReader& index, FetchService& io,
                              std::span<const float> q, SearchParams params,
                              QueryMetrics& metrics) {
    validate_query(index, q, params.L, params.k, params.beam_width);
    const ScalarQuantizer& quant = index.quantizer();

    CandidateList P(params.L);
    std::vector<uint8_t> seen(index.n(), 0);
    uint32_t entry = index.entry_point();
    seen[entry] = 1;
    P.insert(entry, quant.estimate_distance_binary(q, index.binary_code(entry)));

    std::vector<std::pair<float, uint32_t>> refined;
    DecodedRecord rec;
    for (;;) {
        int vi = P.nearest_unexplored();
        if (vi < 0) {
            break;
        }
        uint32_t v = P[static_cast<size_t>(vi)].vid;

        if (params.prefetch_depth > 0) {
            metrics.prefetch_issued += prefetch_top(io, P, params.prefetch_depth);
        }

        // Opportunistic pivot: while the nearest candidate waits on disk,
        // explore the first resident one in the top-W look-ahead instead,
        // prefetching the on-disk candidates scanned past.
        if (params.beam_width > 0 && !io.is_resident(v)) {
            uint32_t scanned = 0;
            for (size_t i = 0; i < P.size() && scanned < params.beam_width; ++i) {
                if (P[i].explored) {
                    continue;
                }
                scanned++;
                if (io.is_resident(P[i].vid)) {
                    if (P[i].vid != v) {
                        v = P[i].vid;
                        metrics.pivots++;
                    }
                    break;
                }
                if (io.prefetch(P[i].vid)) {
                    metrics.prefetch_issued++;
                }
            }
        }

        bool first = true;
        for (;;) {
            auto step = io.prepare_fetch(v, rec, first);
            first = false;
            if (step == FetchService::Step::got) {
                break;
            }
            if (step == FetchService::Step::wait) {
                co_await SuspendForIo{};
                if (io.io_failed()) {
                    throw Error(ErrorCode::io_error, "search: page read failed");
                }
            } else {
                co_await SuspendYield{};
            }
        }

        refined.emplace_back(quant.estimate_distance_extended(q, rec.extended.data()), v);
        P.mark_explored(v);
        metrics.iterations++;
        if (params.record_trace) {
            metrics.visit_trace.push_back(v);
        }
        for (uint32_t nb : rec.adjacency) {
            if (seen[nb]) {
                continue;
            }
            seen[nb] = 1;
            P.insert(nb, quant.estimate_distance_binary(q, index.binary_code(nb)));
        }
    }
    co_return finish(refined, params.k);
}

}  // namespace gannet
