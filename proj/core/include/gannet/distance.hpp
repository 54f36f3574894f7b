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

#include <cstdint>
#include <span>
#include <vector>

#include "gannet/dataset.hpp"

namespace gannet {

/// IDs with their distances to a query, distance-ascending. Ties everywhere in
/// the engine break toward the smaller vertex ID so that runs are reproducible
/// and oracle comparisons are exact.
struct ResultSet {
    std::vector<uint32_t> ids;
    std::vector<float> distances;

    size_t size() const noexcept { return ids.size(); }
    bool operator==(const ResultSet&) const = default;
};

float euclidean_distance(std::span<const float> a, std::span<const float> b);

/// Squared-distance variant; same ordering, one sqrt cheaper in inner loops.
float euclidean_distance_sq(std::span<const float> a, std::span<const float> b);

/// Exact k nearest rows of `ds` to `q`, distance-ascending, ties by smaller ID.
ResultSet brute_force_topk(const Dataset& ds, std::span<const float> q, uint32_t k);

/// |first k of result ∩ first k of truth| / k.
double recall_at_k(const ResultSet& result, const ResultSet& truth, uint32_t k);
double recall_at_k(std::span<const uint32_t> result_ids, std::span<const uint32_t> truth_ids,
                   uint32_t k);

}  // namespace gannet
