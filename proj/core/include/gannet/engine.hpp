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

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "gannet/buffer_pool.hpp"
#include "gannet/dataset.hpp"
#include "gannet/index_file.hpp"
#include "gannet/io_driver.hpp"
#include "gannet/scheduler.hpp"
#include "gannet/search.hpp"

namespace gannet {

struct EngineOptions {
    /// Pool slots as a fraction of the record count, clamped to
    /// [min_slots, n]. 1.0 keeps everything resident after warmup.
    double buffer_ratio = 0.2;
    uint32_t min_slots = 64;
    bool co_fetch = true;
    double low_watermark = 0.05;
    bool record_transitions = false;

    uint32_t workers = 1;
    uint32_t batch_size = 2;
    uint32_t queue_depth = 256;

    enum class Backend { real, sim };
    Backend backend = Backend::real;
    std::chrono::microseconds sim_latency{100};
    uint32_t io_threads = 4;  // thread count of the real backend, per worker

    std::function<void(const TaskEvent&)> event_hook;
};

/// An opened index plus its buffer pool and query scheduler. Queries are
/// dispatched round-robin across workers; each worker owns a private I/O
/// driver and keeps batch_size tasks in flight.
class Engine {
public:
    Engine(const std::string& index_path, EngineOptions opts = {});

    const IndexReader& index() const { return *reader_; }
    BufferPool& pool() { return *pool_; }
    uint32_t batch_size() const { return opts_.batch_size; }

    struct Calibration {
        std::chrono::nanoseconds io_latency{0};
        std::chrono::nanoseconds compute_time{0};
        uint32_t batch_size = 1;
    };

    /// Measures the mean page-read latency and the mean per-expansion compute
    /// time on the sample, then fixes batch_size = ceil(alpha * I / T). The
    /// compute probe runs against a fully resident scratch pool so I/O does
    /// not leak into T.
    Calibration calibrate(const Dataset& sample_queries, const SearchParams& params,
                          double alpha);

    /// Runs every query to completion; outcome order matches query order.
    std::vector<QueryOutcome> run(const Dataset& queries, const SearchParams& params);

    QueryOutcome search_one(std::span<const float> query, const SearchParams& params);

private:
    std::unique_ptr<IoDriver> make_driver() const;

    EngineOptions opts_;
    std::unique_ptr<IndexReader> reader_;
    std::unique_ptr<BufferPool> pool_;
};

}  // namespace gannet
