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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <queue>
#include <span>
#include <thread>
#include <tuple>
#include <vector>

namespace gannet {

struct IoRequest {
    uint64_t token = 0;
    uint32_t page_id = 0;
    std::span<uint8_t> buffer;  // >= page_size, owned by caller until completion
};

struct IoCompletion {
    uint64_t token = 0;
    bool ok = true;
};

/// Reads one page into the destination buffer; throws on failure.
using PageReadFn = std::function<void(uint32_t page_id, std::span<uint8_t>)>;

class IoDriver {
public:
    virtual ~IoDriver() = default;

    /// Queues a batch, returning how many requests from the front were
    /// accepted. Fewer than batch.size() signals backpressure; the caller
    /// resubmits the rest on a later loop.
    virtual size_t submit(std::span<const IoRequest> batch) = 0;

    /// Completions in driver-defined order. May block up to max_wait when
    /// nothing has completed yet but requests are in flight.
    virtual std::vector<IoCompletion> poll(std::chrono::microseconds max_wait) = 0;

    virtual size_t in_flight() const = 0;
};

/// Real backend: a small thread pool serving positional reads. Completion
/// order follows actual read completion and is not deterministic.
class ThreadIoDriver final : public IoDriver {
public:
    struct Options {
        uint32_t threads = 4;
        uint32_t queue_depth = 256;
    };
    ThreadIoDriver(PageReadFn read_fn, Options opts);
    ~ThreadIoDriver() override;

    size_t submit(std::span<const IoRequest> batch) override;
    std::vector<IoCompletion> poll(std::chrono::microseconds max_wait) override;
    size_t in_flight() const override { return in_flight_.load(std::memory_order_acquire); }

private:
    void worker_loop();

    PageReadFn read_fn_;
    Options opts_;
    std::mutex mutex_;
    std::condition_variable work_cv_;
    std::condition_variable done_cv_;
    std::deque<IoRequest> queue_;
    std::vector<IoCompletion> done_;
    std::atomic<size_t> in_flight_{0};
    bool stop_ = false;
    std::vector<std::thread> threads_;
};

/// Deterministic test backend. The page is read synchronously at submit time;
/// the completion becomes visible once its deadline (submit time plus the
/// configured latency) has passed, and a blocking poll sleeps until then, so
/// latency behaves like a real device while data stays exact. Delivery order
/// is (deadline, submission sequence), which with a constant latency is
/// simply submission order.
class SimIoDriver final : public IoDriver {
public:
    struct Options {
        std::chrono::microseconds latency{100};
        uint32_t queue_depth = 256;
        /// Per-request latency override; falls back to `latency` when unset.
        std::function<std::chrono::microseconds(const IoRequest&)> latency_fn;
        /// Requests for which this returns true complete with ok = false and
        /// an untouched buffer.
        std::function<bool(uint32_t page_id, uint64_t token)> fail_fn;
    };
    SimIoDriver(PageReadFn read_fn, Options opts);

    size_t submit(std::span<const IoRequest> batch) override;
    std::vector<IoCompletion> poll(std::chrono::microseconds max_wait) override;
    size_t in_flight() const override { return pending_.size(); }

private:
    using Clock = std::chrono::steady_clock;
    struct Pending {
        Clock::time_point deadline;
        uint64_t seq;
        uint64_t token;
        bool ok;
        bool operator>(const Pending& o) const {
            return std::tie(deadline, seq) > std::tie(o.deadline, o.seq);
        }
    };

    PageReadFn read_fn_;
    Options opts_;
    uint64_t next_seq_ = 0;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending_;
};

}  // namespace gannet
