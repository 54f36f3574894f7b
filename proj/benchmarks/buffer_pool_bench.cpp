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

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "gannet/buffer_pool.hpp"
#include "gannet/page.hpp"
#include "gannet/varint.hpp"

namespace {

constexpr uint32_t kRecords = 40;
constexpr size_t kExtendedSize = 16;
constexpr uint32_t kMaxDegree = 8;

// One synthetic page holding all records. Each record is a 16-byte code
// followed by a one-neighbor compressed adjacency list.
const std::vector<uint8_t>& page_bytes() {
    static const std::vector<uint8_t> bytes = [] {
        gannet::Page page(gannet::kDefaultPageSize);
        for (uint32_t vid = 0; vid < kRecords; ++vid) {
            std::vector<uint8_t> record(kExtendedSize);
            for (size_t i = 0; i < kExtendedSize; ++i) {
                record[i] = static_cast<uint8_t>(vid * 31 + i);
            }
            const uint32_t neighbor[] = {(vid + 1) % kRecords};
            auto adj = gannet::compress_adjacency(neighbor);
            record.insert(record.end(), adj.begin(), adj.end());
            page.insert(vid, 0, record);
        }
        auto span = page.bytes();
        return std::vector<uint8_t>(span.begin(), span.end());
    }();
    return bytes;
}

gannet::BufferPool::Config pool_config(uint32_t slots) {
    gannet::BufferPool::Config cfg;
    cfg.slot_count = slots;
    cfg.extended_size = kExtendedSize;
    cfg.max_degree = kMaxDegree;
    cfg.co_fetch = false;
    return cfg;
}

std::unique_ptr<gannet::BufferPool> warmed_pool(uint32_t slots, uint32_t loaded) {
    std::vector<uint32_t> directory(kRecords, 0);  // everything lives on page 0
    auto pool = std::make_unique<gannet::BufferPool>(pool_config(slots), directory);
    for (uint32_t vid = 0; vid < loaded; ++vid) {
        auto loc = pool->peek(vid);
        auto res = pool->begin_load(vid, loc.value, /*allow_evict=*/true);
        if (res.status == gannet::BufferPool::BeginLoad::reserved) {
            pool->complete_load(res.reservation, page_bytes());
        }
    }
    return pool;
}

}  // namespace

static void BM_PoolHit(benchmark::State& state) {
    auto pool = warmed_pool(64, kRecords);
    gannet::DecodedRecord rec;
    uint32_t vid = 0;
    for (auto _ : state) {
        auto loc = pool->lookup(vid);
        benchmark::DoNotOptimize(pool->try_read(vid, loc.value, rec));
        vid = (vid + 1) % kRecords;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PoolHit);

static void BM_PoolPeek(benchmark::State& state) {
    auto pool = warmed_pool(64, kRecords);
    uint32_t vid = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(pool->peek(vid));
        vid = (vid + 1) % kRecords;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PoolPeek);

static void BM_PoolMissEvictReload(benchmark::State& state) {
    // Two slots and a rotating working set force an eviction on every load.
    auto pool = warmed_pool(2, 2);
    const auto& bytes = page_bytes();
    uint32_t vid = 2;
    for (auto _ : state) {
        auto loc = pool->lookup(vid);
        if (!loc.resident) {
            auto res = pool->begin_load(vid, loc.value, /*allow_evict=*/true);
            if (res.status == gannet::BufferPool::BeginLoad::reserved) {
                pool->complete_load(res.reservation, bytes);
            }
        }
        vid = (vid + 1) % kRecords;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PoolMissEvictReload);

static void BM_PoolHitThreaded(benchmark::State& state) {
    static std::unique_ptr<gannet::BufferPool> shared;
    if (state.thread_index() == 0) {
        shared = warmed_pool(64, kRecords);
    }
    gannet::DecodedRecord rec;
    uint32_t vid = static_cast<uint32_t>(state.thread_index()) * 7 % kRecords;
    for (auto _ : state) {
        auto loc = shared->lookup(vid);
        if (loc.resident) {
            benchmark::DoNotOptimize(shared->try_read(vid, loc.value, rec));
        }
        vid = (vid + 1) % kRecords;
    }
    state.SetItemsProcessed(state.iterations());
    if (state.thread_index() == 0) {
        shared.reset();
    }
}
BENCHMARK(BM_PoolHitThreaded)->Threads(4);

BENCHMARK_MAIN();
