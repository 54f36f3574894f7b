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

#include <boost/multiprecision/cpp_int.hpp>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "gannet/error.hpp"
#include "gannet/scheduler.hpp"
#include "support/index_fixture.hpp"

using namespace gannet;
using namespace std::chrono_literals;
using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

namespace {

// Exact reference: ceil(alpha * io / compute) over the rationals, where alpha
// enters with its exact binary value, floored at 1 and saturated at 2^32 - 1.
uint32_t oracle_batch(double alpha, int64_t io_ns, int64_t compute_ns) {
    cpp_rational r(alpha);
    r *= io_ns;
    r /= compute_ns;
    const cpp_int num = numerator(r);
    const cpp_int den = denominator(r);
    cpp_int b = (num + den - 1) / den;
    if (b < 1) {
        return 1;
    }
    if (b > cpp_int(std::numeric_limits<uint32_t>::max())) {
        return std::numeric_limits<uint32_t>::max();
    }
    return b.convert_to<uint32_t>();
}

const testsupport::DiskIndex& fixture() {
    static testsupport::DiskIndex ix({.n = 2000, .dim = 32, .clusters = 200, .seed = 7}, 100);
    return ix;
}

std::vector<QueryOutcome> run_worker(const IndexReader& reader, BufferPool& pool,
                                     IoDriver& driver, const SearchParams& params,
                                     const SchedulerConfig& cfg, const Dataset& queries) {
    std::vector<QueryJob> jobs(queries.size());
    std::vector<QueryOutcome> outcomes(queries.size());
    for (uint32_t i = 0; i < queries.size(); ++i) {
        jobs[i] = {i, queries[i]};
    }
    Worker w(reader, pool, driver, params, cfg, 0);
    w.run(jobs, outcomes);
    return outcomes;
}

PageReadFn reader_fn(const IndexReader& reader) {
    return [&reader](uint32_t page_id, std::span<uint8_t> out) {
        reader.read_page(page_id, out);
    };
}

}  // namespace

TEST_CASE("batch size formula frozen examples") {
    CHECK(compute_batch_size(1.0, 100us, 50us) == 2);
    CHECK(compute_batch_size(1.0, 10us, 100us) == 1);  // floored at 1
    CHECK(compute_batch_size(2.0, 100us, 50us) == 4);
    CHECK(compute_batch_size(1.5, 1ns, 1ns) == 2);   // ceil(1.5)
    CHECK(compute_batch_size(0.5, 4000ns, 1000ns) == 2);  // exact: no round-up
    CHECK(compute_batch_size(1.0, 1ns, 1000000000ns) == 1);
    CHECK(compute_batch_size(3.0, 1000ns, 999ns) == 4);  // barely above 3
}

TEST_CASE("batch size saturates and validates its inputs") {
    CHECK(compute_batch_size(1e30, 1000000000ns, 1ns) ==
          std::numeric_limits<uint32_t>::max());
    CHECK(compute_batch_size(4.0, 1073741824ns, 1ns) ==
          std::numeric_limits<uint32_t>::max());  // 2^32 exactly saturates

    CHECK_THROWS_AS(compute_batch_size(0.0, 1us, 1us), Error);
    CHECK_THROWS_AS(compute_batch_size(-1.0, 1us, 1us), Error);
    CHECK_THROWS_AS(compute_batch_size(std::nan(""), 1us, 1us), Error);
    CHECK_THROWS_AS(compute_batch_size(std::numeric_limits<double>::infinity(), 1us, 1us),
                    Error);
    CHECK_THROWS_AS(compute_batch_size(1.0, 0ns, 1us), Error);
    CHECK_THROWS_AS(compute_batch_size(1.0, 1us, 0ns), Error);
    CHECK_THROWS_AS(compute_batch_size(1.0, -5ns, 1us), Error);
}

TEST_CASE("batch size equals exact rational arithmetic on random inputs") {
    std::mt19937_64 rng(60);
    for (int t = 0; t < 1000; ++t) {
        const double mant = 1.0 + testsupport::unit_draw(rng);
        const int exp = static_cast<int>(rng() % 91) - 45;
        const double alpha = std::ldexp(mant, exp);
        const auto io_ns = static_cast<int64_t>(1 + rng() % 10'000'000'000ULL);
        const auto compute_ns = static_cast<int64_t>(1 + rng() % 10'000'000'000ULL);
        const uint32_t got = compute_batch_size(alpha, std::chrono::nanoseconds(io_ns),
                                                std::chrono::nanoseconds(compute_ns));
        const uint32_t want = oracle_batch(alpha, io_ns, compute_ns);
        if (got != want) {
            CAPTURE(alpha);
            CAPTURE(io_ns);
            CAPTURE(compute_ns);
            REQUIRE(got == want);
        }
    }

    // Dyadic alphas hitting exact integer products: ceil must not overshoot.
    for (int e = -8; e <= 8; ++e) {
        const double alpha = std::ldexp(1.0, e);
        for (int64_t io : {1LL << 20, 3LL << 16, 1000000LL}) {
            for (int64_t comp : {1LL, 1LL << 10, 256LL}) {
                const uint32_t got = compute_batch_size(
                    alpha, std::chrono::nanoseconds(io), std::chrono::nanoseconds(comp));
                CHECK(got == oracle_batch(alpha, io, comp));
            }
        }
    }
}

TEST_CASE("a worker with no jobs returns immediately") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    BufferPool pool(testsupport::pool_config(*reader, 64), reader->directory());
    SimIoDriver driver(reader_fn(*reader), {.latency = 10us});
    SchedulerConfig cfg;
    Worker w(*reader, pool, driver, SearchParams{}, cfg, 0);
    w.run({}, {});
    CHECK(pool.stats().loads == 0);
}

TEST_CASE("worker rejects a zero batch size") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    BufferPool pool(testsupport::pool_config(*reader, 64), reader->directory());
    SimIoDriver driver(reader_fn(*reader), {.latency = 10us});
    SchedulerConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(Worker(*reader, pool, driver, SearchParams{}, cfg, 0), Error);
}

TEST_CASE("a single-task worker matches the synchronous baseline exactly") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    // Ample slots: the worker sweeps the pool between scheduler rounds, so a
    // capacity-bound pool would diverge from the blocking path in hit and
    // eviction counts even though the walk itself is identical.
    const uint32_t slots = 2 * ix.data.base.size();

    SearchParams params;
    params.record_trace = true;

    // Baseline: blocking fetches, same pool geometry, queries in order.
    BufferPool sync_pool(testsupport::pool_config(*reader, slots), reader->directory());
    std::vector<ResultSet> expected;
    std::vector<QueryMetrics> expected_metrics;
    for (uint32_t i = 0; i < 40; ++i) {
        QueryMetrics m;
        expected.push_back(
            best_first_search(*reader, sync_pool, ix.data.queries[i], params.L, params.k, &m));
        expected_metrics.push_back(std::move(m));
    }

    BufferPool pool(testsupport::pool_config(*reader, slots), reader->directory());
    SimIoDriver driver(reader_fn(*reader), {.latency = 20us});
    SchedulerConfig cfg;
    cfg.batch_size = 1;

    Dataset queries(ix.data.queries.dim(), {});
    for (uint32_t i = 0; i < 40; ++i) {
        queries.append(ix.data.queries[i]);
    }
    auto outcomes = run_worker(*reader, pool, driver, params, cfg, queries);

    REQUIRE(outcomes.size() == 40);
    for (uint32_t i = 0; i < 40; ++i) {
        REQUIRE(!outcomes[i].failed);
        CHECK(outcomes[i].result == expected[i]);
        CHECK(outcomes[i].metrics.visit_trace == expected_metrics[i].visit_trace);
        CHECK(outcomes[i].metrics.ios == expected_metrics[i].ios);
        CHECK(outcomes[i].metrics.hits == expected_metrics[i].hits);
        CHECK(outcomes[i].metrics.misses == expected_metrics[i].misses);
    }
}

TEST_CASE("four concurrent tasks return the same results as one") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    const uint32_t slots = 100;
    SearchParams params;

    BufferPool pool1(testsupport::pool_config(*reader, slots), reader->directory());
    SimIoDriver d1(reader_fn(*reader), {.latency = 20us});
    SchedulerConfig c1;
    c1.batch_size = 1;
    auto base = run_worker(*reader, pool1, d1, params, c1, ix.data.queries);

    BufferPool pool4(testsupport::pool_config(*reader, slots), reader->directory());
    SimIoDriver d4(reader_fn(*reader), {.latency = 20us});
    SchedulerConfig c4;
    c4.batch_size = 4;
    auto wide = run_worker(*reader, pool4, d4, params, c4, ix.data.queries);

    REQUIRE(base.size() == wide.size());
    for (size_t i = 0; i < base.size(); ++i) {
        REQUIRE(!base[i].failed);
        REQUIRE(!wide[i].failed);
        CHECK(base[i].result == wide[i].result);
    }
}

TEST_CASE("randomized completion latencies do not change results") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    const uint32_t slots = 100;
    SearchParams params;

    BufferPool pool1(testsupport::pool_config(*reader, slots), reader->directory());
    SimIoDriver d1(reader_fn(*reader), {.latency = 20us});
    SchedulerConfig c1;
    c1.batch_size = 1;
    auto base = run_worker(*reader, pool1, d1, params, c1, ix.data.queries);

    SimIoDriver::Options jitter;
    jitter.latency_fn = [](const IoRequest& r) {
        return std::chrono::microseconds(1 + (r.token * 2654435761ULL) % 90);
    };
    BufferPool pool2(testsupport::pool_config(*reader, slots), reader->directory());
    SimIoDriver d2(reader_fn(*reader), jitter);
    SchedulerConfig c2;
    c2.batch_size = 3;
    auto shuffled = run_worker(*reader, pool2, d2, params, c2, ix.data.queries);

    REQUIRE(base.size() == shuffled.size());
    for (size_t i = 0; i < base.size(); ++i) {
        REQUIRE(!shuffled[i].failed);
        CHECK(base[i].result == shuffled[i].result);
    }
}

TEST_CASE("a failed read fails exactly the tasks that needed it") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    const uint32_t slots = 100;
    SearchParams params;
    const uint32_t nq = 20;

    // Fail the first read the worker ever issues: that read belongs to query
    // 0, which aborts; the pool is left untouched for the rest.
    SimIoDriver::Options failing;
    failing.latency = 10us;
    failing.fail_fn = [](uint32_t, uint64_t token) { return token == 1; };
    BufferPool pool(testsupport::pool_config(*reader, slots), reader->directory());
    SimIoDriver driver(reader_fn(*reader), failing);
    SchedulerConfig cfg;
    cfg.batch_size = 1;

    Dataset queries(ix.data.queries.dim(), {});
    for (uint32_t i = 0; i < nq; ++i) {
        queries.append(ix.data.queries[i]);
    }
    auto outcomes = run_worker(*reader, pool, driver, params, cfg, queries);

    REQUIRE(outcomes[0].failed);
    CHECK(!outcomes[0].error.empty());
    CHECK(outcomes[0].result.ids.empty());

    // Baseline without query 0, since the aborted load left no trace.
    BufferPool clean(testsupport::pool_config(*reader, slots), reader->directory());
    SimIoDriver d2(reader_fn(*reader), {.latency = 10us});
    Dataset rest(ix.data.queries.dim(), {});
    for (uint32_t i = 1; i < nq; ++i) {
        rest.append(ix.data.queries[i]);
    }
    auto expected = run_worker(*reader, clean, d2, params, cfg, rest);
    for (uint32_t i = 1; i < nq; ++i) {
        REQUIRE(!outcomes[i].failed);
        CHECK(outcomes[i].result == expected[i - 1].result);
    }
}

TEST_CASE("task events balance and respect the batch bound") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    SearchParams params;
    const uint32_t nq = 30;
    const uint32_t batch = 2;

    std::vector<TaskEvent> events;
    SchedulerConfig cfg;
    cfg.batch_size = batch;
    cfg.event_hook = [&](const TaskEvent& e) { events.push_back(e); };

    BufferPool pool(testsupport::pool_config(*reader, 100), reader->directory());
    SimIoDriver driver(reader_fn(*reader), {.latency = 20us});
    Dataset queries(ix.data.queries.dim(), {});
    for (uint32_t i = 0; i < nq; ++i) {
        queries.append(ix.data.queries[i]);
    }
    auto outcomes = run_worker(*reader, pool, driver, params, cfg, queries);
    for (const auto& o : outcomes) {
        REQUIRE(!o.failed);
    }

    std::vector<int> admitted(nq, 0);
    std::vector<int> finished(nq, 0);
    std::vector<int> suspended(nq, 0);
    std::vector<int> resumed(nq, 0);
    int active = 0;
    int max_active = 0;
    for (const auto& e : events) {
        CHECK(e.worker == 0);
        REQUIRE(e.query < nq);
        switch (e.kind) {
            case TaskEvent::Kind::admitted:
                admitted[e.query]++;
                active++;
                max_active = std::max(max_active, active);
                break;
            case TaskEvent::Kind::finished:
                finished[e.query]++;
                active--;
                break;
            case TaskEvent::Kind::suspended:
                suspended[e.query]++;
                break;
            case TaskEvent::Kind::resumed:
                resumed[e.query]++;
                break;
        }
    }
    CHECK(active == 0);
    CHECK(max_active <= static_cast<int>(batch));
    uint64_t total_suspensions = 0;
    for (uint32_t q = 0; q < nq; ++q) {
        CHECK(admitted[q] == 1);
        CHECK(finished[q] == 1);
        // Every suspension is matched by exactly one wakeup: nothing is lost.
        CHECK(suspended[q] == resumed[q]);
        total_suspensions += static_cast<uint64_t>(suspended[q]);
    }
    CHECK(total_suspensions > 0);  // a cold pool forces real waits
}

TEST_CASE("doubling the batch overlaps reads and cuts wall time") {
    const auto& ix = fixture();
    auto reader = open_index(ix.path);
    const uint32_t slots = 100;
    SearchParams params;
    const uint32_t nq = 50;

    Dataset queries(ix.data.queries.dim(), {});
    for (uint32_t i = 0; i < nq; ++i) {
        queries.append(ix.data.queries[i]);
    }

    auto timed = [&](uint32_t batch) {
        BufferPool pool(testsupport::pool_config(*reader, slots), reader->directory());
        SimIoDriver driver(reader_fn(*reader), {.latency = 200us});
        SchedulerConfig cfg;
        cfg.batch_size = batch;
        const auto t0 = std::chrono::steady_clock::now();
        auto outcomes = run_worker(*reader, pool, driver, params, cfg, queries);
        const auto t1 = std::chrono::steady_clock::now();
        for (const auto& o : outcomes) {
            REQUIRE(!o.failed);
        }
        return std::pair{t1 - t0, std::move(outcomes)};
    };

    auto [serial, serial_out] = timed(1);
    auto [overlapped, overlapped_out] = timed(2);
    for (uint32_t i = 0; i < nq; ++i) {
        CHECK(serial_out[i].result == overlapped_out[i].result);
    }
    CHECK(overlapped < serial);
}
