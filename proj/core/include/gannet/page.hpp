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
#include <optional>
#include <span>
#include <vector>

namespace gannet {

// Slotted page with two-way growth. The slot directory grows forward from a
// 5-byte header {count u8, heap_start u16, heap_used u16}; record bytes grow
// backward from the page end. Each 9-byte slot holds
// {vid u32, color u8, length u16, start_offset u16}, sorted ascending by vid.
// heap_start always equals page_size - heap_used, so 5 + 9*count <= heap_start
// is the only fit condition.

inline constexpr size_t kPageHeaderSize = 5;
inline constexpr size_t kPageSlotSize = 9;
inline constexpr uint32_t kDefaultPageSize = 4096;
inline constexpr uint32_t kMinPageSize = 64;
inline constexpr uint32_t kMaxPageSize = 65535;  // offsets are 16-bit

struct PageSlot {
    uint32_t vid;
    uint8_t color;
    uint16_t length;
    uint16_t start_offset;
};

/// Read-only structured access to one page worth of bytes, e.g. directly into
/// an I/O buffer. Construction validates the header; record reads are bounds
/// checked. The span must outlive the view.
class PageView {
public:
    explicit PageView(std::span<const uint8_t> bytes);

    uint32_t count() const { return count_; }
    uint16_t heap_start() const { return heap_start_; }
    uint16_t heap_used() const { return heap_used_; }
    uint32_t page_size() const { return static_cast<uint32_t>(bytes_.size()); }
    size_t free_space() const {
        return heap_start_ - kPageHeaderSize - kPageSlotSize * count_;
    }

    PageSlot slot(uint32_t i) const;
    std::optional<PageSlot> find(uint32_t vid) const;  // binary search
    std::span<const uint8_t> record(const PageSlot& s) const;
    std::optional<std::span<const uint8_t>> lookup(uint32_t vid) const;

    /// All records sharing vid's nonzero color (vid included), slot order.
    /// Color 0 yields just vid's own record. Absent vid is invalid-argument.
    std::vector<std::pair<PageSlot, std::span<const uint8_t>>> coresidents(uint32_t vid) const;

    std::span<const uint8_t> bytes() const { return bytes_; }

private:
    std::span<const uint8_t> bytes_;
    uint32_t count_;
    uint16_t heap_start_;
    uint16_t heap_used_;
};

/// Mutable page builder. The backing buffer is kept in serialized form at all
/// times, so bytes() needs no encode step and round-trips are byte-exact.
class Page {
public:
    explicit Page(uint32_t page_size = kDefaultPageSize);

    /// Full validation: header arithmetic, slot ordering, extent containment
    /// and pairwise non-overlap. Throws corrupt_data on any violation.
    static Page from_bytes(std::span<const uint8_t> bytes);

    enum class InsertResult { inserted, page_full };

    /// Appends the record below heap_start and splices the slot into vid
    /// order. Returns page_full (no mutation) when 9 + record bytes exceed
    /// free space. Duplicate vid is invalid-argument.
    InsertResult insert(uint32_t vid, uint8_t color, std::span<const uint8_t> record);

    uint32_t count() const { return view().count(); }
    size_t free_space() const { return view().free_space(); }
    uint32_t page_size() const { return static_cast<uint32_t>(buf_.size()); }
    std::optional<std::span<const uint8_t>> lookup(uint32_t vid) const {
        return view().lookup(vid);
    }
    std::optional<PageSlot> find(uint32_t vid) const { return view().find(vid); }
    PageSlot slot(uint32_t i) const { return view().slot(i); }
    std::vector<std::pair<PageSlot, std::span<const uint8_t>>> coresidents(uint32_t vid) const {
        return view().coresidents(vid);
    }

    std::span<const uint8_t> bytes() const { return buf_; }
    PageView view() const { return PageView(buf_); }

private:
    std::vector<uint8_t> buf_;
};

}  // namespace gannet
