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

#include "gannet/distance.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "gannet/error.hpp"

namespace gannet {

float euclidean_distance_sq(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw_invalid_argument("euclidean_distance: dimension mismatch");
    }
    float acc = 0.0F;
    for (size_t i = 0; i < a.size(); ++i) {
        float d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

float euclidean_distance(std::span<const float> a, std::span<const float> b) {
    return std::sqrt(euclidean_distance_sq(a, b));
}

ResultSet brute_force_topk(const Dataset& ds, std::span<const float> q, uint32_t k) {
    if (k == 0) {
        throw_invalid_argument("brute_force_topk: k must be positive");
    }
    std::vector<std::pair<float, uint32_t>> all;
    all.reserve(ds.size());
    for (uint32_t vid = 0; vid < ds.size(); ++vid) {
        all.emplace_back(euclidean_distance(ds[vid], q), vid);
    }
    uint32_t take = std::min<uint32_t>(k, static_cast<uint32_t>(all.size()));
    std::partial_sort(all.begin(), all.begin() + take, all.end());
    ResultSet out;
    out.ids.reserve(take);
    out.distances.reserve(take);
    for (uint32_t i = 0; i < take; ++i) {
        out.distances.push_back(all[i].first);
        out.ids.push_back(all[i].second);
    }
    return out;
}

double recall_at_k(std::span<const uint32_t> result_ids, std::span<const uint32_t> truth_ids,
                   uint32_t k) {
    if (k == 0) {
        throw_invalid_argument("recall_at_k: k must be positive");
    }
    if (truth_ids.size() < k) {
        throw_invalid_argument("recall_at_k: ground truth has fewer than k entries");
    }
    std::unordered_set<uint32_t> truth(truth_ids.begin(), truth_ids.begin() + k);
    size_t take = std::min<size_t>(result_ids.size(), k);
    size_t hits = 0;
    for (size_t i = 0; i < take; ++i) {
        hits += truth.count(result_ids[i]);
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

double recall_at_k(const ResultSet& result, const ResultSet& truth, uint32_t k) {
    return recall_at_k(std::span<const uint32_t>(result.ids), std::span<const uint32_t>(truth.ids),
                       k);
}

}  // namespace gannet
