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

#include "gannet/graph.hpp"

namespace gannet {

/// Page-by-page record order produced before any bytes are written. Every vid
/// appears exactly once across all pages. Color 0 marks non-affine records;
/// records of one affinity group share that page's next color (cycling 1..255,
/// restarting per page). A group split across pages gets each page's own color.
struct PlacementPlan {
    struct Assignment {
        uint32_t vid;
        uint8_t color;
        bool operator==(const Assignment&) const = default;
    };
    std::vector<std::vector<Assignment>> pages;

    size_t total_records() const {
        size_t n = 0;
        for (const auto& p : pages) {
            n += p.size();
        }
        return n;
    }
};

/// Greedy fill: affinity groups {p} ∪ A_p in ascending p (already-placed
/// members skipped) keep page locality; when a group overflows the current
/// page's residual space the residual is padded with unplaced non-affine
/// records, and groups larger than a whole page split at the exact byte
/// boundary. Leftover vids go last, ascending, color 0.
/// record_sizes[vid] is the encoded record's byte length; any record that
/// cannot fit a page alongside the header and one slot is invalid-argument.
PlacementPlan plan_placement(const AffinityDictionary& aff,
                             std::span<const uint32_t> record_sizes, uint32_t page_size);

}  // namespace gannet
