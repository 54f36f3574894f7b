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
#include <utility>
#include <vector>

#include "gannet/dataset.hpp"
#include "gannet/distance.hpp"

namespace gannet {

struct BuildParams {
    uint32_t candidate_list_size = 64;  // beam width used while building
    uint32_t degree_bound = 32;         // max out-degree kept after pruning
    float prune_alpha = 1.2F;
    float tau = 0.0F;        // affinity distance threshold; 0 disables
    uint32_t k_affine = 8;   // cap on each vertex's affinity set
    uint64_t rng_seed = 42;
};

struct Graph {
    uint32_t n = 0;
    std::vector<std::vector<uint32_t>> adjacency;  // sorted ascending, no self-loops
    uint32_t entry_point = 0;
};

/// A_p per vertex: the nearest build-time candidates within tau of p, capped
/// at k_affine. p never appears in its own set. Membership is one-directional.
using AffinityDictionary = std::vector<std::vector<uint32_t>>;

/// Best-first traversal from the graph entry point with a candidate list
/// capped at list_size. Returns (visited, frontier): every expanded vertex
/// and the final candidate list, both with exact distances, distance-ascending
/// with ties toward the smaller ID.
std::pair<ResultSet, ResultSet> greedy_search(const Graph& g, const Dataset& ds,
                                              std::span<const float> q, uint32_t list_size);

/// Alpha-pruning over distance-sorted candidates (p itself excluded by the
/// caller): nearest-first, keep v only while every kept u satisfies
/// prune_alpha * d(u,v) > d(p,v) strictly; ties prune. Stops at R kept.
/// Returned IDs are sorted ascending.
std::vector<uint32_t> robust_prune(const Dataset& ds, uint32_t p, const ResultSet& candidates,
                                   float prune_alpha, uint32_t R);

std::pair<Graph, AffinityDictionary> build_graph(const Dataset& ds, const BuildParams& params);

/// Vertex whose vector is nearest the dataset mean, ties toward the smaller ID.
uint32_t find_medoid(const Dataset& ds);

}  // namespace gannet
