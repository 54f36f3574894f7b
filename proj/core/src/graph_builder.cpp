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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gannet/error.hpp"
#include "gannet/graph.hpp"

namespace gannet {

namespace {

struct Cand {
    float dist;
    uint32_t vid;
    bool expanded;
};

bool cand_less(const Cand& a, const Cand& b) {
    if (a.dist != b.dist) {
        return a.dist < b.dist;
    }
    return a.vid < b.vid;
}

}  // namespace

uint32_t find_medoid(const Dataset& ds) {
    if (ds.size() == 0) {
        throw_invalid_argument("find_medoid: empty dataset");
    }
    const uint32_t d = ds.dim();
    std::vector<double> sum(d, 0.0);
    for (uint32_t vid = 0; vid < ds.size(); ++vid) {
        auto row = ds[vid];
        for (uint32_t j = 0; j < d; ++j) {
            sum[j] += row[j];
        }
    }
    std::vector<float> mean(d);
    for (uint32_t j = 0; j < d; ++j) {
        mean[j] = static_cast<float>(sum[j] / ds.size());
    }
    uint32_t best = 0;
    float best_dist = std::numeric_limits<float>::max();
    for (uint32_t vid = 0; vid < ds.size(); ++vid) {
        float dist = euclidean_distance_sq(ds[vid], mean);
        if (dist < best_dist) {
            best_dist = dist;
            best = vid;
        }
    }
    return best;
}

std::pair<ResultSet, ResultSet> greedy_search(const Graph& g, const Dataset& ds,
                                              std::span<const float> q, uint32_t list_size) {
    if (g.n == 0 || g.entry_point >= g.n) {
        throw_invalid_argument("greedy_search: empty graph or bad entry point");
    }
    if (list_size == 0) {
        throw_invalid_argument("greedy_search: candidate list size must be positive");
    }

    std::vector<Cand> list;
    list.reserve(list_size + 1);
    std::vector<uint8_t> seen(g.n, 0);

    auto insert = [&](uint32_t vid) {
        if (seen[vid]) {
            return;
        }
        seen[vid] = 1;
        Cand c{euclidean_distance(ds[vid], q), vid, false};
        auto pos = std::lower_bound(list.begin(), list.end(), c, cand_less);
        if (list.size() >= list_size && pos == list.end()) {
            return;
        }
        list.insert(pos, c);
        if (list.size() > list_size) {
            list.pop_back();
        }
    };

    insert(g.entry_point);
    std::vector<std::pair<float, uint32_t>> visited;
    for (;;) {
        auto next = std::find_if(list.begin(), list.end(),
                                 [](const Cand& c) { return !c.expanded; });
        if (next == list.end()) {
            break;
        }
        next->expanded = true;
        visited.emplace_back(next->dist, next->vid);
        for (uint32_t nb : g.adjacency[next->vid]) {
            insert(nb);
        }
    }

    std::sort(visited.begin(), visited.end());
    ResultSet vis;
    vis.ids.reserve(visited.size());
    vis.distances.reserve(visited.size());
    for (auto& [dist, vid] : visited) {
        vis.distances.push_back(dist);
        vis.ids.push_back(vid);
    }
    ResultSet frontier;
    frontier.ids.reserve(list.size());
    frontier.distances.reserve(list.size());
    for (auto& c : list) {
        frontier.distances.push_back(c.dist);
        frontier.ids.push_back(c.vid);
    }
    return {std::move(vis), std::move(frontier)};
}

std::vector<uint32_t> robust_prune(const Dataset& ds, uint32_t p, const ResultSet& candidates,
                                   float prune_alpha, uint32_t R) {
    if (prune_alpha < 1.0F) {
        throw_invalid_argument("robust_prune: prune_alpha must be >= 1");
    }
    if (R == 0) {
        throw_invalid_argument("robust_prune: degree bound must be positive");
    }
    std::vector<uint32_t> kept;
    kept.reserve(R);
    for (size_t i = 0; i < candidates.size() && kept.size() < R; ++i) {
        uint32_t v = candidates.ids[i];
        if (v == p) {
            continue;
        }
        float d_pv = candidates.distances[i];
        bool dominated = false;
        for (uint32_t u : kept) {
            if (!(prune_alpha * euclidean_distance(ds[u], ds[v]) > d_pv)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) {
            kept.push_back(v);
        }
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::pair<Graph, AffinityDictionary> build_graph(const Dataset& ds, const BuildParams& params) {
    const uint32_t n = ds.size();
    if (n < 2) {
        throw_invalid_argument("build_graph: need at least 2 vectors");
    }
    if (params.candidate_list_size < params.degree_bound) {
        throw_invalid_argument("build_graph: candidate list size must be >= degree bound");
    }
    if (params.prune_alpha < 1.0F) {
        throw_invalid_argument("build_graph: prune_alpha must be >= 1");
    }
    if (params.k_affine == 0) {
        throw_invalid_argument("build_graph: k_affine must be positive");
    }
    if (!(params.tau >= 0.0F)) {
        throw_invalid_argument("build_graph: tau must be non-negative");
    }

    const uint32_t R = params.degree_bound;
    std::mt19937_64 rng(params.rng_seed);

    Graph g;
    g.n = n;
    g.entry_point = find_medoid(ds);
    g.adjacency.resize(n);

    // Seeded random R-regular starting graph (degree clamped for tiny inputs).
    uint32_t init_degree = std::min<uint32_t>(R, n - 1);
    std::vector<uint8_t> picked(n, 0);
    for (uint32_t p = 0; p < n; ++p) {
        auto& adj = g.adjacency[p];
        adj.reserve(R + 1);
        while (adj.size() < init_degree) {
            auto v = static_cast<uint32_t>(rng() % n);
            if (v == p || picked[v]) {
                continue;
            }
            picked[v] = 1;
            adj.push_back(v);
        }
        for (uint32_t v : adj) {
            picked[v] = 0;
        }
        std::sort(adj.begin(), adj.end());
    }

    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0U);
    for (uint32_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng() % i]);
    }

    AffinityDictionary affine(n);
    ResultSet reprune;
    for (uint32_t p : order) {
        auto [visited, frontier] = greedy_search(g, ds, ds[p], params.candidate_list_size);

        ResultSet candidates;
        candidates.ids.reserve(visited.size());
        candidates.distances.reserve(visited.size());
        for (size_t i = 0; i < visited.size(); ++i) {
            if (visited.ids[i] != p) {
                candidates.ids.push_back(visited.ids[i]);
                candidates.distances.push_back(visited.distances[i]);
            }
        }

        auto& ap = affine[p];
        ap.clear();
        for (size_t i = 0; i < candidates.size() && ap.size() < params.k_affine; ++i) {
            if (candidates.distances[i] <= params.tau) {
                ap.push_back(candidates.ids[i]);
            }
        }

        g.adjacency[p] = robust_prune(ds, p, candidates, params.prune_alpha, R);

        for (uint32_t v : g.adjacency[p]) {
            auto& vadj = g.adjacency[v];
            auto pos = std::lower_bound(vadj.begin(), vadj.end(), p);
            if (pos != vadj.end() && *pos == p) {
                continue;
            }
            vadj.insert(pos, p);
            if (vadj.size() > R) {
                reprune.ids.clear();
                reprune.distances.clear();
                std::vector<std::pair<float, uint32_t>> by_dist;
                by_dist.reserve(vadj.size());
                for (uint32_t u : vadj) {
                    by_dist.emplace_back(euclidean_distance(ds[v], ds[u]), u);
                }
                std::sort(by_dist.begin(), by_dist.end());
                for (auto& [dist, u] : by_dist) {
                    reprune.distances.push_back(dist);
                    reprune.ids.push_back(u);
                }
                vadj = robust_prune(ds, v, reprune, params.prune_alpha, R);
            }
        }
    }

    return {std::move(g), std::move(affine)};
}

}  // namespace gannet
