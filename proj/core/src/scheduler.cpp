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

#include "gannet/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <thread>

#include "gannet/error.hpp"

namespace gannet {

uint32_t compute_batch_size(double alpha, std::chrono::nanoseconds io_latency,
                            std::chrono::nanoseconds compute_time) {
    if (!std::isfinite(alpha) || alpha <= 0.0) {
        throw_invalid_argument("compute_batch_size: alpha must be positive and finite");
    }
    const int64_t io_ns = io_latency.count();
    const int64_t compute_ns = compute_time.count();
    if (io_ns <= 0 || compute_ns <= 0) {
        throw_invalid_argument("compute_batch_size: durations must be positive");
    }

    // alpha == mant * 2^exp with mant an integer in [2^52, 2^53), so the
    // quotient can be ceiled in integer arithmetic.
    int exp = 0;
    const double frac = std::frexp(alpha, &exp);
    const auto mant = static_cast<uint64_t>(std::ldexp(frac, 53));
    exp -= 53;

    const unsigned __int128 num =
        static_cast<unsigned __int128>(mant) * static_cast<unsigned __int128>(io_ns);
    const auto den = static_cast<unsigned __int128>(compute_ns);
    constexpr uint32_t kMax = std::numeric_limits<uint32_t>::max();

    unsigned __int128 result;
    if (exp >= 0) {
        // mant >= 2^52 makes any exp >= 43 overshoot 2^32 regardless of den.
        if (exp >= 43) {
            return kMax;
        }
        const unsigned __int128 q = num / den;
        const unsigned __int128 r = num % den;
        const unsigned __int128 shifted_r = r << exp;
        if (q > kMax) {
            return kMax;
        }
        result = (q << exp) + shifted_r / den + (shifted_r % den != 0 ? 1 : 0);
    } else {
        // ceil(a / (b * 2^s)) == ceil(ceil(a / b) / 2^s)
        const unsigned s = static_cast<unsigned>(-exp);
        const unsigned __int128 q1 = num / den + (num % den != 0 ? 1 : 0);
        if (s >= 128) {
            result = 1;
        } else {
            const unsigned __int128 mask =
                s == 0 ? 0 : (~static_cast<unsigned __int128>(0)) >> (128 - s);
            result = (q1 >> s) + ((q1 & mask) != 0 ? 1 : 0);
        }
    }
    if (result < 1) {
        return 1;
    }
    if (result > kMax) {
        return kMax;
    }
    return static_cast<uint32_t>(result);
}

namespace {

uint64_t elapsed_ns(std::chrono::steady_clock::time_point since) {
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                     std::chrono::steady_clock::now() - since)
                                     .count());
}

}  // namespace

struct Worker::TaskSlot final : FetchService {
    Worker& w;
    uint64_t query_index;
    QueryMetrics metrics;
    SearchTask task;
    bool fail_flag = false;
    std::string fail_msg;
    std::chrono::steady_clock::time_point admitted_at;
    std::chrono::steady_clock::time_point suspended_at;

    TaskSlot(Worker& worker, uint64_t qi) : w(worker), query_index(qi) {}

    Step prepare_fetch(uint32_t vid, DecodedRecord& out, bool first_attempt) override {
        for (;;) {
            RecordLocation loc = first_attempt ? w.pool_.lookup(vid) : w.pool_.peek(vid);
            if (first_attempt) {
                (loc.resident ? metrics.hits : metrics.misses)++;
            }
            first_attempt = false;
            if (loc.resident) {
                if (w.pool_.try_read(vid, loc.value, out)) {
                    return Step::got;
                }
                continue;  // slot was recycled between decode and copy
            }
            if (auto it = w.loading_by_vid_.find(vid); it != w.loading_by_vid_.end()) {
                // This worker already has a read in flight for the page;
                // park on it instead of issuing a duplicate.
                w.pending_io_[it->second].waiters.push_back(this);
                return Step::wait;
            }
            auto res = w.pool_.begin_load(vid, loc.value, /*allow_evict=*/true);
            switch (res.status) {
                case BufferPool::BeginLoad::resident:
                    continue;
                case BufferPool::BeginLoad::already_loading:
                case BufferPool::BeginLoad::retry_later:
                    return Step::yield;
                case BufferPool::BeginLoad::reserved:
                    w.enqueue_read(res.reservation, this);
                    metrics.ios++;
                    return Step::wait;
            }
        }
    }

    bool prefetch(uint32_t vid) override {
        if (w.loading_by_vid_.contains(vid)) {
            return false;
        }
        RecordLocation loc = w.pool_.peek(vid);
        if (loc.resident) {
            return false;
        }
        auto res = w.pool_.begin_load(vid, loc.value, /*allow_evict=*/false);
        if (res.status != BufferPool::BeginLoad::reserved) {
            return false;
        }
        w.enqueue_read(res.reservation, nullptr);
        metrics.ios++;
        return true;
    }

    bool is_resident(uint32_t vid) const override { return w.pool_.peek(vid).resident; }
    bool io_failed() const override { return fail_flag; }
};

Worker::Worker(const IndexReader& index, BufferPool& pool, IoDriver& driver,
               const SearchParams& params, const SchedulerConfig& cfg, uint32_t worker_id)
    : index_(index), pool_(pool), driver_(driver), params_(params), cfg_(cfg), id_(worker_id) {
    if (cfg_.batch_size == 0) {
        throw_invalid_argument("Worker: batch_size must be positive");
    }
}

Worker::~Worker() = default;

void Worker::emit(TaskEvent::Kind kind, const TaskSlot& slot, SearchTask::Wait wait) {
    if (cfg_.event_hook) {
        cfg_.event_hook(TaskEvent{kind, id_, slot.query_index, wait});
    }
}

std::vector<uint8_t> Worker::take_buffer() {
    if (!spare_buffers_.empty()) {
        auto buf = std::move(spare_buffers_.back());
        spare_buffers_.pop_back();
        return buf;
    }
    return std::vector<uint8_t>(index_.page_size());
}

uint64_t Worker::enqueue_read(const BufferPool::Reservation& r, TaskSlot* waiter) {
    const uint64_t token = next_token_++;
    PendingIo p;
    p.reservation = r;
    p.buffer = take_buffer();
    if (waiter != nullptr) {
        p.waiters.push_back(waiter);
    }
    auto [it, inserted] = pending_io_.emplace(token, std::move(p));
    pending_submit_.push_back(IoRequest{token, r.page_id, std::span<uint8_t>(it->second.buffer)});
    loading_by_vid_.emplace(r.vid, token);
    return token;
}

void Worker::admit(const QueryJob& job) {
    auto slot = std::make_unique<TaskSlot>(*this, job.index);
    slot->admitted_at = std::chrono::steady_clock::now();
    slot->task = cache_aware_search(index_, *slot, job.query, params_, slot->metrics);
    TaskSlot* raw = slot.get();
    slots_.push_back(std::move(slot));
    ready_.push_back(raw);
    emit(TaskEvent::Kind::admitted, *raw, SearchTask::Wait::none);
}

void Worker::release_slot(TaskSlot* slot) {
    for (auto& owned : slots_) {
        if (owned.get() == slot) {
            owned = std::move(slots_.back());
            slots_.pop_back();
            return;
        }
    }
}

void Worker::step(TaskSlot* slot, std::span<QueryOutcome> outcomes, size_t& done,
                  size_t& active) {
    slot->task.resume();
    if (slot->task.done()) {
        QueryOutcome& out = outcomes[slot->query_index];
        if (auto err = slot->task.error()) {
            out.failed = true;
            if (!slot->fail_msg.empty()) {
                out.error = slot->fail_msg;
            } else {
                try {
                    std::rethrow_exception(err);
                } catch (const std::exception& e) {
                    out.error = e.what();
                } catch (...) {
                    out.error = "unknown search failure";
                }
            }
        } else {
            out.result = slot->task.take_result();
        }
        slot->metrics.latency_ns = elapsed_ns(slot->admitted_at);
        out.metrics = std::move(slot->metrics);
        emit(TaskEvent::Kind::finished, *slot, SearchTask::Wait::none);
        release_slot(slot);
        --active;
        ++done;
        return;
    }
    switch (slot->task.wait_state()) {
        case SearchTask::Wait::io:
            // Waiter registration happened inside prepare_fetch.
            slot->suspended_at = std::chrono::steady_clock::now();
            emit(TaskEvent::Kind::suspended, *slot, SearchTask::Wait::io);
            break;
        case SearchTask::Wait::yield:
            slot->suspended_at = std::chrono::steady_clock::now();
            yielded_.push_back(slot);
            emit(TaskEvent::Kind::suspended, *slot, SearchTask::Wait::yield);
            break;
        case SearchTask::Wait::none:
            throw Error(ErrorCode::logic_error, "Worker: task suspended without a wait state");
    }
}

void Worker::flush_submissions() {
    if (pending_submit_.empty()) {
        return;
    }
    const size_t accepted = driver_.submit(pending_submit_);
    pending_submit_.erase(pending_submit_.begin(),
                          pending_submit_.begin() + static_cast<ptrdiff_t>(accepted));
}

void Worker::handle_completion(const IoCompletion& c) {
    auto it = pending_io_.find(c.token);
    if (it == pending_io_.end()) {
        throw Error(ErrorCode::logic_error, "Worker: completion for unknown token");
    }
    PendingIo p = std::move(it->second);
    pending_io_.erase(it);
    loading_by_vid_.erase(p.reservation.vid);

    bool ok = c.ok;
    std::string fail_msg;
    if (ok) {
        try {
            pool_.complete_load(p.reservation, p.buffer);
        } catch (const std::exception& e) {
            ok = false;  // complete_load consumed the reservation
            fail_msg = e.what();
        }
    } else {
        pool_.abort_load(p.reservation);
        fail_msg = "page read failed";
    }

    const auto now = std::chrono::steady_clock::now();
    for (TaskSlot* s : p.waiters) {
        s->metrics.stall_ns += static_cast<uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(now - s->suspended_at).count());
        if (!ok) {
            s->fail_flag = true;
            s->fail_msg = fail_msg;
        }
        ready_.push_back(s);
        emit(TaskEvent::Kind::resumed, *s, SearchTask::Wait::io);
    }
    spare_buffers_.push_back(std::move(p.buffer));
}

void Worker::run(std::span<const QueryJob> jobs, std::span<QueryOutcome> outcomes) {
    size_t next = 0;
    size_t done = 0;
    size_t active = 0;
    const size_t total = jobs.size();

    while (done < total) {
        while (active < cfg_.batch_size && next < total) {
            admit(jobs[next]);
            ++next;
            ++active;
        }

        while (!ready_.empty()) {
            TaskSlot* slot = ready_.front();
            ready_.pop_front();
            step(slot, outcomes, done, active);
        }

        flush_submissions();

        const bool may_block = ready_.empty() && driver_.in_flight() > 0;
        auto completions =
            driver_.poll(may_block ? std::chrono::microseconds(200) : std::chrono::microseconds(0));
        for (const auto& c : completions) {
            handle_completion(c);
        }

        if (ready_.empty() && !yielded_.empty() && driver_.in_flight() == 0 &&
            pending_submit_.empty() && completions.empty()) {
            // Every runnable task is retrying a condition another worker must
            // clear; back off instead of spinning on the pool.
            std::this_thread::sleep_for(std::chrono::microseconds(2));
        }

        for (TaskSlot* slot : yielded_) {
            ready_.push_back(slot);
            emit(TaskEvent::Kind::resumed, *slot, SearchTask::Wait::yield);
        }
        yielded_.clear();

        pool_.sweep_if_low();
    }
}

}  // namespace gannet
