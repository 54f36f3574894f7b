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

#include "gannet/engine.hpp"

#include <algorithm>
#include <random>
#include <thread>

#include "gannet/error.hpp"

namespace gannet {

Engine::Engine(const std::string& index_path, EngineOptions opts) : opts_(opts) {
    if (!(opts_.buffer_ratio > 0.0) || opts_.buffer_ratio > 1.0) {
        throw_invalid_argument("Engine: buffer_ratio must be in (0, 1]");
    }
    if (opts_.batch_size == 0 || opts_.workers == 0) {
        throw_invalid_argument("Engine: batch_size and workers must be positive");
    }
    reader_ = open_index(index_path);

    const uint32_t n = reader_->n();
    auto want = static_cast<uint64_t>(opts_.buffer_ratio * static_cast<double>(n));
    want = std::max<uint64_t>(want, opts_.min_slots);
    const auto slots = static_cast<uint32_t>(std::max<uint64_t>(1, std::min<uint64_t>(want, n)));

    BufferPool::Config cfg;
    cfg.slot_count = slots;
    cfg.extended_size = reader_->quantizer().extended_code_size();
    cfg.max_degree = reader_->max_degree();
    cfg.low_watermark = opts_.low_watermark;
    cfg.co_fetch = opts_.co_fetch;
    cfg.record_transitions = opts_.record_transitions;
    pool_ = std::make_unique<BufferPool>(cfg, reader_->directory());
}

std::unique_ptr<IoDriver> Engine::make_driver() const {
    PageReadFn read_fn = [r = reader_.get()](uint32_t page_id, std::span<uint8_t> buf) {
        r->read_page(page_id, buf);
    };
    if (opts_.backend == EngineOptions::Backend::sim) {
        SimIoDriver::Options o;
        o.latency = opts_.sim_latency;
        o.queue_depth = opts_.queue_depth;
        return std::make_unique<SimIoDriver>(std::move(read_fn), o);
    }
    ThreadIoDriver::Options o;
    o.threads = std::max<uint32_t>(1, opts_.io_threads);
    o.queue_depth = opts_.queue_depth;
    return std::make_unique<ThreadIoDriver>(std::move(read_fn), o);
}

std::vector<QueryOutcome> Engine::run(const Dataset& queries, const SearchParams& params) {
    std::vector<QueryOutcome> outcomes(queries.size());
    if (queries.empty()) {
        return outcomes;
    }
    if (queries.dim() != reader_->dim()) {
        throw_invalid_argument("Engine::run: query dimension mismatch");
    }

    const uint32_t workers = std::min<uint32_t>(opts_.workers, queries.size());
    std::vector<std::vector<QueryJob>> parts(workers);
    for (uint32_t i = 0; i < queries.size(); ++i) {
        parts[i % workers].push_back(QueryJob{i, queries[i]});
    }

    SchedulerConfig cfg;
    cfg.batch_size = opts_.batch_size;
    cfg.workers = workers;
    cfg.queue_depth = opts_.queue_depth;
    cfg.event_hook = opts_.event_hook;

    if (workers == 1) {
        auto driver = make_driver();
        Worker worker(*reader_, *pool_, *driver, params, cfg, 0);
        worker.run(parts[0], outcomes);
        return outcomes;
    }

    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (uint32_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                auto driver = make_driver();
                Worker worker(*reader_, *pool_, *driver, params, cfg, w);
                worker.run(parts[w], outcomes);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return outcomes;
}

QueryOutcome Engine::search_one(std::span<const float> query, const SearchParams& params) {
    std::vector<QueryOutcome> outcomes(1);
    std::vector<QueryJob> jobs{QueryJob{0, query}};

    SchedulerConfig cfg;
    cfg.batch_size = opts_.batch_size;
    cfg.workers = 1;
    cfg.queue_depth = opts_.queue_depth;
    cfg.event_hook = opts_.event_hook;

    auto driver = make_driver();
    Worker worker(*reader_, *pool_, *driver, params, cfg, 0);
    worker.run(jobs, outcomes);
    return std::move(outcomes[0]);
}

Engine::Calibration Engine::calibrate(const Dataset& sample_queries, const SearchParams& params,
                                      double alpha) {
    if (sample_queries.empty()) {
        throw_invalid_argument("Engine::calibrate: need at least one sample query");
    }
    if (sample_queries.dim() != reader_->dim()) {
        throw_invalid_argument("Engine::calibrate: query dimension mismatch");
    }

    Calibration cal;
    if (opts_.backend == EngineOptions::Backend::sim) {
        cal.io_latency = std::chrono::duration_cast<std::chrono::nanoseconds>(opts_.sim_latency);
    } else {
        std::vector<uint8_t> buf(reader_->page_size());
        const uint32_t reads = std::min<uint32_t>(64, reader_->page_count());
        std::mt19937_64 rng(12345);
        const auto t0 = std::chrono::steady_clock::now();
        for (uint32_t i = 0; i < reads; ++i) {
            reader_->read_page(static_cast<uint32_t>(rng() % reader_->page_count()), buf);
        }
        cal.io_latency = std::chrono::duration_cast<std::chrono::nanoseconds>(
                             std::chrono::steady_clock::now() - t0) /
                         reads;
    }
    if (cal.io_latency.count() <= 0) {
        cal.io_latency = std::chrono::nanoseconds(1);
    }

    // Per-expansion compute time, probed against a scratch pool big enough to
    // keep every record resident: pass one warms it, pass two is timed.
    BufferPool::Config cfg;
    cfg.slot_count = reader_->n();
    cfg.extended_size = reader_->quantizer().extended_code_size();
    cfg.max_degree = reader_->max_degree();
    cfg.co_fetch = false;
    BufferPool scratch(cfg, reader_->directory());

    uint64_t iterations = 0;
    std::chrono::nanoseconds timed{0};
    for (int pass = 0; pass < 2; ++pass) {
        iterations = 0;
        const auto t0 = std::chrono::steady_clock::now();
        for (uint32_t i = 0; i < sample_queries.size(); ++i) {
            QueryMetrics m;
            best_first_search(*reader_, scratch, sample_queries[i], params.L, params.k, &m);
            iterations += m.iterations;
        }
        timed = std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now() - t0);
    }
    cal.compute_time =
        iterations > 0 ? timed / static_cast<int64_t>(iterations) : std::chrono::nanoseconds(1);
    if (cal.compute_time.count() <= 0) {
        cal.compute_time = std::chrono::nanoseconds(1);
    }

    cal.batch_size = compute_batch_size(alpha, cal.io_latency, cal.compute_time);
    opts_.batch_size = cal.batch_size;
    return cal;
}

}  // namespace gannet
