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

#include "gannet/placement.hpp"

#include <algorithm>

#include "gannet/error.hpp"
#include "gannet/page.hpp"

namespace gannet {

namespace {

class PlanBuilder {
public:
    PlanBuilder(std::span<const uint32_t> sizes, uint32_t page_size)
        : sizes_(sizes), page_size_(page_size) {
        plan_.pages.emplace_back();
    }

    size_t free_space() const { return page_size_ - kPageHeaderSize - used_; }
    bool fits(uint32_t vid) const { return kPageSlotSize + sizes_[vid] <= free_space(); }
    bool page_empty() const { return plan_.pages.back().empty(); }

    void open_fresh_page() {
        if (!page_empty()) {
            plan_.pages.emplace_back();
            used_ = 0;
            colors_used_ = 0;
        }
    }

    // Color for the next group on the current page, cycling 1..255.
    uint8_t next_color() const { return static_cast<uint8_t>(colors_used_ % 255 + 1); }

    void place(uint32_t vid, uint8_t color) {
        plan_.pages.back().push_back({vid, color});
        used_ += kPageSlotSize + sizes_[vid];
    }

    void finish_group() { colors_used_++; }

    PlacementPlan take() && {
        if (!plan_.pages.empty() && plan_.pages.back().empty()) {
            plan_.pages.pop_back();
        }
        return std::move(plan_);
    }

private:
    std::span<const uint32_t> sizes_;
    uint32_t page_size_;
    PlacementPlan plan_;
    size_t used_ = 0;
    uint32_t colors_used_ = 0;
};

}  // namespace

PlacementPlan plan_placement(const AffinityDictionary& aff,
                             std::span<const uint32_t> record_sizes, uint32_t page_size) {
    if (page_size < kMinPageSize || page_size > kMaxPageSize) {
        throw_invalid_argument("plan_placement: page size must be in [64, 65535]");
    }
    const size_t n = record_sizes.size();
    if (aff.size() != n) {
        throw_invalid_argument("plan_placement: affinity dictionary and sizes disagree on n");
    }
    for (size_t vid = 0; vid < n; ++vid) {
        if (kPageHeaderSize + kPageSlotSize + record_sizes[vid] > page_size) {
            throw_invalid_argument("plan_placement: record larger than a page");
        }
    }

    // A vid is affine if it owns a non-empty set or appears in one.
    std::vector<uint8_t> is_affine(n, 0);
    for (size_t p = 0; p < n; ++p) {
        if (aff[p].empty()) {
            continue;
        }
        is_affine[p] = 1;
        for (uint32_t v : aff[p]) {
            if (v >= n) {
                throw_invalid_argument("plan_placement: affinity member out of range");
            }
            is_affine[v] = 1;
        }
    }
    std::vector<uint32_t> non_affine;
    for (uint32_t vid = 0; vid < n; ++vid) {
        if (!is_affine[vid]) {
            non_affine.push_back(vid);
        }
    }

    PlanBuilder b(record_sizes, page_size);
    std::vector<uint8_t> placed(n, 0);
    size_t pad_cursor = 0;  // non-affine vids are consumed in ascending order

    auto pad_residual = [&] {
        while (pad_cursor < non_affine.size()) {
            uint32_t vid = non_affine[pad_cursor];
            if (!b.fits(vid)) {
                break;
            }
            b.place(vid, 0);
            placed[vid] = 1;
            pad_cursor++;
        }
    };

    std::vector<uint32_t> group;
    for (uint32_t p = 0; p < n; ++p) {
        if (aff[p].empty()) {
            continue;
        }
        group.clear();
        if (!placed[p]) {
            group.push_back(p);
        }
        for (uint32_t v : aff[p]) {
            if (!placed[v] &&
                std::find(group.begin(), group.end(), v) == group.end()) {
                group.push_back(v);
            }
        }
        if (group.empty()) {
            continue;
        }

        size_t cost = 0;
        for (uint32_t v : group) {
            cost += kPageSlotSize + record_sizes[v];
        }

        if (cost > b.free_space()) {
            // The group is moving on, so backfill this page's residual with
            // non-affine records; if none remain, split across the boundary
            // right here instead. Oversized groups always split.
            bool oversized = cost > page_size - kPageHeaderSize;
            bool can_pad = pad_cursor < non_affine.size() && !b.page_empty();
            if (can_pad && !oversized) {
                pad_residual();
                b.open_fresh_page();
            }
        }
        uint8_t color = b.next_color();
        for (uint32_t v : group) {
            if (!b.fits(v)) {
                b.open_fresh_page();
                color = b.next_color();
            }
            b.place(v, color);
            placed[v] = 1;
        }
        b.finish_group();
    }

    // Everything left is non-affine; drain ascending with color 0.
    for (; pad_cursor < non_affine.size(); ++pad_cursor) {
        uint32_t vid = non_affine[pad_cursor];
        if (!b.fits(vid)) {
            b.open_fresh_page();
        }
        b.place(vid, 0);
        placed[vid] = 1;
    }

    return std::move(b).take();
}

}  // namespace gannet
