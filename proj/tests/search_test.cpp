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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "gannet/error.hpp"
#include "gannet/search.hpp"
#include "support/index_fixture.hpp"

using namespace gannet;

namespace {

const testsupport::DiskIndex& fixture() {
    static testsupport::DiskIndex ix({.n = 2000, .dim = 32, .clusters = 200, .seed = 7}, 100);
    return ix;
}

// Runs the coroutine to completion under a blocking fetch service, rethrowing
// anything it captured. A sync service never parks, so one resume suffices.
ResultSet run_sync(const IndexReader& reader, BufferPool& pool, std::span<const float> q,
                   SearchParams params, QueryMetrics& m) {
    SyncFetchService io(reader, pool, &m);
    SearchTask task = cache_aware_search(reader, io, q, params, m);
    task.resume();
    REQUIRE(task.done());
    if (task.error()) {
        std::rethrow_exception(task.error());
    }
    return task.take_result();
}

}  // namespace

TEST_CASE("candidate list keeps distance order with vid tiebreaks") {
    CandidateList c(5);
    c.insert(4, 2.0F);
    c.insert(9, 1.0F);
    c.insert(2, 2.0F);
    c.insert(7, 1.0F);
    REQUIRE(c.size() == 4);
    CHECK(c[0].vid == 7);  // dist 1.0, smaller vid first
    CHECK(c[1].vid == 9);
    CHECK(c[2].vid == 2);  // dist 2.0
    CHECK(c[3].vid == 4);
    for (size_t i = 1; i < c.size(); ++i) {
        const bool ordered = c[i - 1].dist < c[i].dist ||
                             (c[i - 1].dist == c[i].dist && c[i - 1].vid < c[i].vid);
        CHECK(ordered);
    }

    SUBCASE("a full list drops the worst entry to admit a better one") {
        c.insert(11, 0.5F);
        REQUIRE(c.size() == 5);
        c.insert(13, 0.1F);
        REQUIRE(c.size() == 5);
        CHECK(c[0].vid == 13);
        CHECK(c[4].vid == 2);  // old worst (vid 4, dist 2.0) fell off
    }

    SUBCASE("a full list ignores an entry worse than its tail") {
        c.insert(11, 0.5F);
        c.insert(99, 100.0F);
        REQUIRE(c.size() == 5);
        for (size_t i = 0; i < c.size(); ++i) {
            CHECK(c[i].vid != 99);
        }
    }

    SUBCASE("exploration flags drive nearest_unexplored") {
        CHECK(c.nearest_unexplored() == 0);
        c.mark_explored(7);
        CHECK(c.nearest_unexplored() == 1);
        c.mark_explored(9);
        c.mark_explored(2);
        c.mark_explored(4);
        CHECK(c.nearest_unexplored() == -1);
        c.insert(1, 10.0F);  // new entries arrive unexplored
        CHECK(c.nearest_unexplored() == 4);
    }

    SUBCASE("trimming evicts the tail even when it was already explored") {
        c.insert(11, 0.5F);
        c.mark_explored(4);  // vid 4 now sits at the tail, explored
        c.insert(13, 0.1F);
        for (size_t i = 0; i < c.size(); ++i) {
            CHECK(c[i].vid != 4);
        }
    }

    CHECK_THROWS_AS(CandidateList(0), Error);
}

TEST_CASE("sync fetch service counts each record's first touch") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    BufferPool pool(testsupport::pool_config(*reader, 50), reader->directory());
    QueryMetrics m;
    SyncFetchService io(*reader, pool, &m);

    const uint32_t v = reader->entry_point();
    CHECK(!io.is_resident(v));
    DecodedRecord rec;
    CHECK(io.prepare_fetch(v, rec, true) == FetchService::Step::got);
    CHECK(m.misses == 1);
    CHECK(m.hits == 0);
    CHECK(m.ios == 1);
    CHECK(io.is_resident(v));

    // The record matches an independent decode through a second pool.
    const auto& quant = reader->quantizer();
    std::vector<uint8_t> fresh(quant.extended_code_size());
    quant.encode_extended(ix.data.base[v], fresh.data());
    CHECK(rec.extended == fresh);
    CHECK(std::is_sorted(rec.adjacency.begin(), rec.adjacency.end()));
    CHECK(!rec.adjacency.empty());
    for (uint32_t nb : rec.adjacency) {
        CHECK(nb < reader->n());
        CHECK(nb != v);
    }
    {
        BufferPool other(testsupport::pool_config(*reader, 8), reader->directory());
        QueryMetrics m2;
        SyncFetchService io2(*reader, other, &m2);
        DecodedRecord rec2;
        io2.prepare_fetch(v, rec2, true);
        CHECK(rec2.extended == rec.extended);
        CHECK(rec2.adjacency == rec.adjacency);
    }

    SUBCASE("a repeat fetch is a hit and reads nothing") {
        DecodedRecord again;
        CHECK(io.prepare_fetch(v, again, true) == FetchService::Step::got);
        CHECK(m.hits == 1);
        CHECK(m.misses == 1);
        CHECK(m.ios == 1);
        CHECK(again.extended == rec.extended);
        CHECK(again.adjacency == rec.adjacency);
    }

    auto first_on_disk = [&]() {
        uint32_t w = 0;
        while (io.is_resident(w)) {
            ++w;  // skip anything co-fetch already installed
        }
        return w;
    };

    SUBCASE("a non-first attempt skips the hit and miss tally") {
        DecodedRecord rec2;
        const uint64_t before = m.ios;
        io.prepare_fetch(first_on_disk(), rec2, false);
        CHECK(m.hits == 0);
        CHECK(m.misses == 1);      // unchanged from the first fetch
        CHECK(m.ios == before + 1);  // the read itself still counts
    }

    SUBCASE("prefetch loads quietly and reports only real reads") {
        const uint32_t target = first_on_disk();
        const uint64_t before = m.ios;
        CHECK(io.prefetch(target));
        CHECK(io.is_resident(target));
        CHECK(m.ios == before + 1);
        CHECK(m.hits == 0);
        CHECK(m.misses == 1);
        CHECK(!io.prefetch(target));  // already resident
        CHECK(m.ios == before + 1);
    }
}

TEST_CASE("prefetch declines rather than evict from a full pool") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    BufferPool pool(testsupport::pool_config(*reader, 1, /*co_fetch=*/false),
                    reader->directory());
    QueryMetrics m;
    SyncFetchService io(*reader, pool, &m);
    DecodedRecord rec;
    io.prepare_fetch(0, rec, true);
    REQUIRE(io.is_resident(0));
    CHECK(!io.prefetch(1));
    CHECK(io.is_resident(0));
    CHECK(!io.is_resident(1));
    CHECK(pool.stats().evictions == 0);
}

TEST_CASE("the two search routines explore identically when the beam is off") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    SearchParams params;
    params.record_trace = true;

    BufferPool pool_a(testsupport::pool_config(*reader, 100), reader->directory());
    BufferPool pool_b(testsupport::pool_config(*reader, 100), reader->directory());
    for (uint32_t i = 0; i < 25; ++i) {
        auto q = ix.data.queries[i];
        QueryMetrics ma;
        ResultSet a = best_first_search(*reader, pool_a, q, params.L, params.k, &ma);
        QueryMetrics mb;
        ResultSet b = run_sync(*reader, pool_b, q, params, mb);
        CHECK(a == b);
        CHECK(ma.visit_trace == mb.visit_trace);
        CHECK(ma.iterations == mb.iterations);
        CHECK(ma.hits == mb.hits);
        CHECK(ma.misses == mb.misses);
        CHECK(ma.ios == mb.ios);
        CHECK(mb.pivots == 0);
        CHECK(mb.prefetch_issued == 0);
    }
}

TEST_CASE("stride prefetching warms the pool without changing the walk") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    SearchParams plain;
    plain.record_trace = true;
    SearchParams striding = plain;
    striding.prefetch_depth = 4;

    // Ample slots so no eviction ever runs. The strided pool then holds a
    // superset of the plain pool at every step of the walk: every page the
    // plain side loads, the strided side has loaded or prefetched already.
    // On a capacity-bound pool prefetching reshapes eviction instead, and
    // per-query hit counts can swing either way.
    const uint32_t slots = 2 * ix.data.base.size();

    uint64_t issued = 0;
    for (uint32_t i = 0; i < 15; ++i) {
        auto q = ix.data.queries[i];
        BufferPool pool_a(testsupport::pool_config(*reader, slots), reader->directory());
        BufferPool pool_b(testsupport::pool_config(*reader, slots), reader->directory());
        QueryMetrics ma;
        ResultSet a = run_sync(*reader, pool_a, q, plain, ma);
        QueryMetrics mb;
        ResultSet b = run_sync(*reader, pool_b, q, striding, mb);
        // Residency only affects what is warmed, not which candidate is next.
        CHECK(a == b);
        CHECK(ma.visit_trace == mb.visit_trace);
        issued += mb.prefetch_issued;
        CHECK(mb.hits > ma.hits);  // warmed records turn misses into hits
        CHECK(mb.misses < ma.misses);
        CHECK(mb.hits + mb.misses == ma.hits + ma.misses);
        CHECK(ma.ios == ma.misses);
        CHECK(mb.ios == mb.misses + mb.prefetch_issued);
    }
    CHECK(issued > 0);
}

TEST_CASE("beamed search pivots to resident work and keeps recall") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    SearchParams params;
    params.beam_width = 8;

    uint64_t pivots = 0;
    double recall_sum = 0.0;
    const uint32_t nq = 25;
    BufferPool pool(testsupport::pool_config(*reader, 100), reader->directory());
    for (uint32_t i = 0; i < nq; ++i) {
        auto q = ix.data.queries[i];
        QueryMetrics m;
        ResultSet got = run_sync(*reader, pool, q, params, m);
        REQUIRE(got.ids.size() == params.k);
        pivots += m.pivots;
        ResultSet truth = brute_force_topk(ix.data.base, q, params.k);
        recall_sum += recall_at_k(got, truth, params.k);

        std::set<uint32_t> uniq(got.ids.begin(), got.ids.end());
        CHECK(uniq.size() == got.ids.size());
        CHECK(std::is_sorted(got.distances.begin(), got.distances.end()));
    }
    CHECK(pivots > 0);
    CHECK(recall_sum / nq >= 0.9);
}

TEST_CASE("result distances are the refined estimates in rank order") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    BufferPool pool(testsupport::pool_config(*reader, 200), reader->directory());
    const auto& quant = reader->quantizer();
    std::vector<uint8_t> code(quant.extended_code_size());

    for (uint32_t i = 0; i < 10; ++i) {
        auto q = ix.data.queries[i];
        ResultSet got = best_first_search(*reader, pool, q, 64, 10);
        REQUIRE(got.ids.size() == 10);
        for (size_t r = 0; r < got.ids.size(); ++r) {
            quant.encode_extended(ix.data.base[got.ids[r]], code.data());
            CHECK(got.distances[r] == doctest::Approx(
                quant.estimate_distance_extended(q, code.data())).epsilon(1e-6));
        }
    }
}

TEST_CASE("prefetch_top considers only the nearest unexplored candidates") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    BufferPool pool(testsupport::pool_config(*reader, 50, /*co_fetch=*/false),
                    reader->directory());
    QueryMetrics m;
    SyncFetchService io(*reader, pool, &m);

    DecodedRecord rec;
    io.prepare_fetch(10, rec, true);
    io.prepare_fetch(12, rec, true);

    CandidateList c(8);
    c.insert(10, 1.0F);  // resident
    c.insert(11, 2.0F);  // on disk
    c.insert(12, 3.0F);  // resident
    c.insert(13, 4.0F);  // on disk
    c.insert(14, 5.0F);  // on disk, beyond the window below

    CHECK(prefetch_top(io, c, 0) == 0);

    SUBCASE("issues reads for the on-disk members of the window") {
        CHECK(prefetch_top(io, c, 4) == 2);
        CHECK(io.is_resident(11));
        CHECK(io.is_resident(13));
        CHECK(!io.is_resident(14));
        CHECK(prefetch_top(io, c, 4) == 0);  // everything near is now resident
    }

    SUBCASE("explored entries do not occupy window positions") {
        c.mark_explored(10);
        c.mark_explored(11);
        // Window of 2 now covers vids 12 and 13; only 13 needs a read.
        CHECK(prefetch_top(io, c, 2) == 1);
        CHECK(io.is_resident(13));
        CHECK(!io.is_resident(11));
        CHECK(!io.is_resident(14));
    }
}

TEST_CASE("searches validate their arguments") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    BufferPool pool(testsupport::pool_config(*reader, 50), reader->directory());
    std::vector<float> q(ix.data.queries[0].begin(), ix.data.queries[0].end());
    std::vector<float> short_q(q.begin(), q.begin() + 5);

    CHECK_THROWS_AS(best_first_search(*reader, pool, short_q, 64, 10), Error);
    CHECK_THROWS_AS(best_first_search(*reader, pool, q, 64, 0), Error);
    CHECK_THROWS_AS(best_first_search(*reader, pool, q, 0, 0), Error);
    CHECK_THROWS_AS(best_first_search(*reader, pool, q, 10, 11), Error);

    // The coroutine variant surfaces the same validation through its handle.
    SearchParams bad;
    bad.L = 16;
    bad.beam_width = 17;
    QueryMetrics m;
    SyncFetchService io(*reader, pool, &m);
    SearchTask task = cache_aware_search(*reader, io, q, bad, m);
    task.resume();
    REQUIRE(task.done());
    REQUIRE(task.error());
    try {
        std::rethrow_exception(task.error());
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_argument);
    }
}
