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

#include "gannet/io_driver.hpp"

#include <algorithm>
#include <thread>

#include "gannet/error.hpp"

namespace gannet {

ThreadIoDriver::ThreadIoDriver(PageReadFn read_fn, Options opts)
    : read_fn_(std::move(read_fn)), opts_(opts) {
    if (opts_.threads == 0 || opts_.queue_depth == 0) {
        throw_invalid_argument("ThreadIoDriver: threads and queue depth must be positive");
    }
    threads_.reserve(opts_.threads);
    for (uint32_t i = 0; i < opts_.threads; ++i) {
        threads_.emplace_back([this] { worker_loop(); });
    }
}

ThreadIoDriver::~ThreadIoDriver() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        stop_ = true;
    }
    work_cv_.notify_all();
    for (auto& t : threads_) {
        t.join();
    }
}

size_t ThreadIoDriver::submit(std::span<const IoRequest> batch) {
    size_t accepted = 0;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        while (accepted < batch.size() &&
               in_flight_.load(std::memory_order_relaxed) < opts_.queue_depth) {
            queue_.push_back(batch[accepted]);
            in_flight_.fetch_add(1, std::memory_order_relaxed);
            accepted++;
        }
    }
    if (accepted > 0) {
        work_cv_.notify_all();
    }
    return accepted;
}

void ThreadIoDriver::worker_loop() {
    for (;;) {
        IoRequest req;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            work_cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
            if (stop_ && queue_.empty()) {
                return;
            }
            req = queue_.front();
            queue_.pop_front();
        }
        bool ok = true;
        try {
            read_fn_(req.page_id, req.buffer);
        } catch (...) {
            ok = false;
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            done_.push_back({req.token, ok});
        }
        done_cv_.notify_all();
    }
}

std::vector<IoCompletion> ThreadIoDriver::poll(std::chrono::microseconds max_wait) {
    std::unique_lock<std::mutex> lock(mutex_);
    if (done_.empty() && max_wait.count() > 0 &&
        in_flight_.load(std::memory_order_relaxed) > 0) {
        done_cv_.wait_for(lock, max_wait, [this] { return !done_.empty(); });
    }
    std::vector<IoCompletion> out = std::move(done_);
    done_.clear();
    in_flight_.fetch_sub(out.size(), std::memory_order_relaxed);
    return out;
}

SimIoDriver::SimIoDriver(PageReadFn read_fn, Options opts)
    : read_fn_(std::move(read_fn)), opts_(std::move(opts)) {
    if (opts_.queue_depth == 0) {
        throw_invalid_argument("SimIoDriver: queue depth must be positive");
    }
}

size_t SimIoDriver::submit(std::span<const IoRequest> batch) {
    size_t accepted = 0;
    auto now = Clock::now();
    while (accepted < batch.size() && pending_.size() < opts_.queue_depth) {
        const IoRequest& req = batch[accepted];
        bool ok = true;
        if (opts_.fail_fn && opts_.fail_fn(req.page_id, req.token)) {
            ok = false;
        } else {
            try {
                read_fn_(req.page_id, req.buffer);
            } catch (...) {
                ok = false;
            }
        }
        auto latency = opts_.latency_fn ? opts_.latency_fn(req) : opts_.latency;
        pending_.push({now + latency, next_seq_++, req.token, ok});
        accepted++;
    }
    return accepted;
}

std::vector<IoCompletion> SimIoDriver::poll(std::chrono::microseconds max_wait) {
    std::vector<IoCompletion> out;
    if (pending_.empty()) {
        return out;
    }
    auto now = Clock::now();
    if (pending_.top().deadline > now) {
        if (max_wait.count() == 0) {
            return out;
        }
        auto wake = std::min(pending_.top().deadline, now + max_wait);
        std::this_thread::sleep_until(wake);
        now = Clock::now();
    }
    while (!pending_.empty() && pending_.top().deadline <= now) {
        out.push_back({pending_.top().token, pending_.top().ok});
        pending_.pop();
    }
    return out;
}

}  // namespace gannet
