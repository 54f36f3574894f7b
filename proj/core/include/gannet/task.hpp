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

#include <coroutine>
#include <exception>
#include <utility>

#include "gannet/distance.hpp"

namespace gannet {

/// A query running as a stackless coroutine. The owning worker resumes it and
/// then inspects wait_state() to learn why it suspended: waiting on an I/O
/// completion it registered for, or yielding to retry a transient condition
/// (pool contention, a load started by someone else).
class SearchTask {
public:
    enum class Wait { none, io, yield };

    struct promise_type {
        Wait wait = Wait::none;
        ResultSet result;
        std::exception_ptr error;

        SearchTask get_return_object() {
            return SearchTask(std::coroutine_handle<promise_type>::from_promise(*this));
        }
        std::suspend_always initial_suspend() noexcept { return {}; }
        std::suspend_always final_suspend() noexcept { return {}; }
        void return_value(ResultSet r) { result = std::move(r); }
        void unhandled_exception() { error = std::current_exception(); }
    };

    SearchTask() = default;
    explicit SearchTask(std::coroutine_handle<promise_type> h) : h_(h) {}
    SearchTask(SearchTask&& o) noexcept : h_(std::exchange(o.h_, nullptr)) {}
    SearchTask& operator=(SearchTask&& o) noexcept {
        if (this != &o) {
            destroy();
            h_ = std::exchange(o.h_, nullptr);
        }
        return *this;
    }
    SearchTask(const SearchTask&) = delete;
    SearchTask& operator=(const SearchTask&) = delete;
    ~SearchTask() { destroy(); }

    bool valid() const { return h_ != nullptr; }
    bool done() const { return h_.done(); }
    Wait wait_state() const { return h_.promise().wait; }

    void resume() {
        h_.promise().wait = Wait::none;
        h_.resume();
    }

    ResultSet take_result() { return std::move(h_.promise().result); }
    std::exception_ptr error() const { return h_.promise().error; }

private:
    void destroy() {
        if (h_) {
            h_.destroy();
            h_ = nullptr;
        }
    }
    std::coroutine_handle<promise_type> h_;
};

/// co_await'ed after registering for a completion; parks the task as Wait::io.
struct SuspendForIo {
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<SearchTask::promise_type> h) const noexcept {
        h.promise().wait = SearchTask::Wait::io;
    }
    void await_resume() const noexcept {}
};

/// co_await'ed to back off and retry later; parks the task as Wait::yield.
struct SuspendYield {
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<SearchTask::promise_type> h) const noexcept {
        h.promise().wait = SearchTask::Wait::yield;
    }
    void await_resume() const noexcept {}
};

}  // namespace gannet
