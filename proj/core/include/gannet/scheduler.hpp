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
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "gannet/buffer_pool.hpp"
#include "gannet/index_file.hpp"
#include "gannet/io_driver.hpp"
#include "gannet/search.hpp"

namespace gannet {

/// Tasks kept in flight per worker so compute overlaps disk reads:
/// ceil(alpha * io_latency / compute_time), floored at 1. The ceiling is
/// taken over the exact binary value of alpha (integer mantissa times a power
/// of two), never through a rounded double product. Results past 2^32 - 1
/// saturate.
uint32_t compute_batch_size(double alpha, std::chrono::nanoseconds io_latency,
                            std::chrono::nanoseconds compute_time);

struct TaskEvent {
    enum class Kind { admitted, suspended, resumed, finished };
    Kind kind;
    uint32_t worker;
    uint64_t query;          // index of the query within the submitted batch
    SearchTask::Wait wait;   // why it suspended; meaningful for Kind::suspended
};

struct SchedulerConfig {
    uint32_t batch_size = 2;  // concurrent tasks per worker
    uint32_t workers = 1;
    uint32_t queue_depth = 256;
    /// Called on every task state change. With several workers this fires
    /// from several threads, so the callee must synchronize.
    std::function<void(const TaskEvent&)> event_hook;
};

struct QueryJob {
    uint64_t index = 0;            // slot in the outcome array
    std::span<const float> query;  // must stay valid until run() returns
};

/// Drives a batch of queries as cooperatively scheduled coroutines over one
/// private I/O driver. Strictly sequential inside; the only cross-worker
/// sharing is the buffer pool. Each loop turn admits jobs up to batch_size,
/// resumes every ready task, submits the reads they requested as one batch,
/// then polls for completions (blocking briefly when nothing is runnable but
/// reads are in flight) and wakes the tasks that were parked on them.
class Worker {
public:
    Worker(const IndexReader& index, BufferPool& pool, IoDriver& driver,
           const SearchParams& params, const SchedulerConfig& cfg, uint32_t worker_id);
    ~Worker();

    Worker(const Worker&) = delete;
    Worker& operator=(const Worker&) = delete;

    /// Runs every job to completion. outcomes[job.index] receives the result
    /// or the error; a failed read fails only the tasks that needed it.
    void run(std::span<const QueryJob> jobs, std::span<QueryOutcome> outcomes);

private:
    struct TaskSlot;
    friend struct TaskSlot;

    struct PendingIo {
        BufferPool::Reservation reservation;
        std::vector<uint8_t> buffer;
        std::vector<TaskSlot*> waiters;
    };

    void admit(const QueryJob& job);
    void step(TaskSlot* slot, std::span<QueryOutcome> outcomes, size_t& done, size_t& active);
    void flush_submissions();
    void handle_completion(const IoCompletion& c);
    uint64_t enqueue_read(const BufferPool::Reservation& r, TaskSlot* waiter);
    std::vector<uint8_t> take_buffer();
    void release_slot(TaskSlot* slot);
    void emit(TaskEvent::Kind kind, const TaskSlot& slot, SearchTask::Wait wait);

    const IndexReader& index_;
    BufferPool& pool_;
    IoDriver& driver_;
    SearchParams params_;
    SchedulerConfig cfg_;
    uint32_t id_;

    uint64_t next_token_ = 1;
    std::vector<std::unique_ptr<TaskSlot>> slots_;
    std::deque<TaskSlot*> ready_;
    std::vector<TaskSlot*> yielded_;
    std::vector<IoRequest> pending_submit_;
    std::unordered_map<uint64_t, PendingIo> pending_io_;
    std::unordered_map<uint32_t, uint64_t> loading_by_vid_;
    std::vector<std::vector<uint8_t>> spare_buffers_;
};

}  // namespace gannet
