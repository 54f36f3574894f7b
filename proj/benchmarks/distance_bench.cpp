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

#include <random>
#include <vector>

#include "gannet/distance.hpp"

namespace {

std::vector<float> random_vector(size_t dim, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0F, 10.0F);
    std::vector<float> v(dim);
    for (auto& x : v) {
        x = dist(rng);
    }
    return v;
}

gannet::Dataset random_dataset(uint32_t n, uint32_t dim, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.0F, 10.0F);
    std::vector<float> data(static_cast<size_t>(n) * dim);
    for (auto& x : data) {
        x = dist(rng);
    }
    return {dim, std::move(data)};
}

}  // namespace

static void BM_EuclideanDistance(benchmark::State& state) {
    const auto dim = static_cast<size_t>(state.range(0));
    const auto a = random_vector(dim, 1);
    const auto b = random_vector(dim, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gannet::euclidean_distance(a, b));
    }
    state.SetItemsProcessed(state.iterations());
    state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(2 * dim * sizeof(float)));
}
BENCHMARK(BM_EuclideanDistance)->Arg(32)->Arg(128)->Arg(960);

static void BM_EuclideanDistanceSq(benchmark::State& state) {
    const auto dim = static_cast<size_t>(state.range(0));
    const auto a = random_vector(dim, 1);
    const auto b = random_vector(dim, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gannet::euclidean_distance_sq(a, b));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EuclideanDistanceSq)->Arg(32)->Arg(128)->Arg(960);

static void BM_BruteForceTopk(benchmark::State& state) {
    const auto n = static_cast<uint32_t>(state.range(0));
    const auto ds = random_dataset(n, 32, 3);
    const auto q = random_vector(32, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gannet::brute_force_topk(ds, q, 10));
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_BruteForceTopk)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
