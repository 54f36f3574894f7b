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

#include "gannet/page.hpp"

#include <algorithm>
#include <cstring>

#include "gannet/endian.hpp"
#include "gannet/error.hpp"
#include "gannet/varint.hpp"

namespace gannet {

std::vector<uint8_t> compress_adjacency(std::span<const uint32_t> ids) {
    std::vector<uint8_t> out;
    out.reserve(1 + ids.size());
    varint_encode(static_cast<uint32_t>(ids.size()), out);
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i == 0) {
            varint_encode(ids[0], out);
        } else {
            if (ids[i] <= ids[i - 1]) {
                throw_invalid_argument("compress_adjacency: ids must be strictly ascending");
            }
            varint_encode(ids[i] - ids[i - 1], out);
        }
    }
    return out;
}

std::vector<uint32_t> decompress_adjacency(std::span<const uint8_t> bytes) {
    const uint8_t* p = bytes.data();
    const uint8_t* end = p + bytes.size();
    uint32_t count = 0;
    p = varint_decode(p, end, count);
    std::vector<uint32_t> ids(count);
    uint64_t prev = 0;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t delta = 0;
        p = varint_decode(p, end, delta);
        uint64_t id = (i == 0) ? delta : prev + delta;
        if (id > UINT32_MAX || (i > 0 && delta == 0)) {
            throw_corrupt_data("decompress_adjacency: non-ascending or overflowing id");
        }
        ids[i] = static_cast<uint32_t>(id);
        prev = id;
    }
    if (p != end) {
        throw_corrupt_data("decompress_adjacency: trailing bytes");
    }
    return ids;
}

namespace {

PageSlot read_slot(const uint8_t* base, uint32_t i) {
    const uint8_t* s = base + kPageHeaderSize + kPageSlotSize * i;
    PageSlot out;
    out.vid = detail::load_u32_le(s);
    out.color = s[4];
    out.length = detail::load_u16_le(s + 5);
    out.start_offset = detail::load_u16_le(s + 7);
    return out;
}

void write_slot(uint8_t* base, uint32_t i, const PageSlot& s) {
    uint8_t* p = base + kPageHeaderSize + kPageSlotSize * i;
    detail::store_u32_le(p, s.vid);
    p[4] = s.color;
    detail::store_u16_le(p + 5, s.length);
    detail::store_u16_le(p + 7, s.start_offset);
}

// Returns the index of the first slot with vid >= target.
uint32_t slot_lower_bound(const uint8_t* base, uint32_t count, uint32_t vid) {
    uint32_t lo = 0;
    uint32_t hi = count;
    while (lo < hi) {
        uint32_t mid = (lo + hi) / 2;
        if (read_slot(base, mid).vid < vid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    return lo;
}

}  // namespace

PageView::PageView(std::span<const uint8_t> bytes) : bytes_(bytes) {
    if (bytes.size() < kPageHeaderSize || bytes.size() > kMaxPageSize) {
        throw_corrupt_data("page: implausible page size");
    }
    count_ = bytes_[0];
    heap_start_ = detail::load_u16_le(bytes_.data() + 1);
    heap_used_ = detail::load_u16_le(bytes_.data() + 3);
    if (heap_start_ != bytes_.size() - heap_used_) {
        throw_corrupt_data("page: heap_start inconsistent with heap_used");
    }
    if (kPageHeaderSize + kPageSlotSize * count_ > heap_start_) {
        throw_corrupt_data("page: slot directory overlaps heap");
    }
}

PageSlot PageView::slot(uint32_t i) const {
    if (i >= count_) {
        throw_invalid_argument("page: slot index out of range");
    }
    return read_slot(bytes_.data(), i);
}

std::optional<PageSlot> PageView::find(uint32_t vid) const {
    uint32_t i = slot_lower_bound(bytes_.data(), count_, vid);
    if (i == count_) {
        return std::nullopt;
    }
    PageSlot s = read_slot(bytes_.data(), i);
    if (s.vid != vid) {
        return std::nullopt;
    }
    return s;
}

std::span<const uint8_t> PageView::record(const PageSlot& s) const {
    size_t begin = s.start_offset;
    size_t end = begin + s.length;
    if (begin < heap_start_ || end > bytes_.size()) {
        throw_corrupt_data("page: record extent out of bounds");
    }
    return bytes_.subspan(begin, s.length);
}

std::optional<std::span<const uint8_t>> PageView::lookup(uint32_t vid) const {
    auto s = find(vid);
    if (!s) {
        return std::nullopt;
    }
    return record(*s);
}

std::vector<std::pair<PageSlot, std::span<const uint8_t>>> PageView::coresidents(
    uint32_t vid) const {
    auto s = find(vid);
    if (!s) {
        throw_invalid_argument("page: coresidents of absent vid");
    }
    std::vector<std::pair<PageSlot, std::span<const uint8_t>>> out;
    if (s->color == 0) {
        out.emplace_back(*s, record(*s));
        return out;
    }
    for (uint32_t i = 0; i < count_; ++i) {
        PageSlot other = read_slot(bytes_.data(), i);
        if (other.color == s->color) {
            out.emplace_back(other, record(other));
        }
    }
    return out;
}

Page::Page(uint32_t page_size) {
    if (page_size < kMinPageSize || page_size > kMaxPageSize) {
        throw_invalid_argument("page: size must be in [64, 65535]");
    }
    buf_.assign(page_size, 0);
    buf_[0] = 0;
    detail::store_u16_le(buf_.data() + 1, static_cast<uint16_t>(page_size));
    detail::store_u16_le(buf_.data() + 3, 0);
}

Page Page::from_bytes(std::span<const uint8_t> bytes) {
    PageView v(bytes);  // header checks
    uint64_t heap_bytes = 0;
    uint32_t prev_vid = 0;
    std::vector<std::pair<uint16_t, uint16_t>> extents;
    extents.reserve(v.count());
    for (uint32_t i = 0; i < v.count(); ++i) {
        PageSlot s = v.slot(i);
        if (i > 0 && s.vid <= prev_vid) {
            throw_corrupt_data("page: slots not sorted by vid");
        }
        prev_vid = s.vid;
        v.record(s);  // extent bounds check
        heap_bytes += s.length;
        extents.emplace_back(s.start_offset, s.length);
    }
    if (heap_bytes != v.heap_used()) {
        throw_corrupt_data("page: heap_used does not match slot lengths");
    }
    std::sort(extents.begin(), extents.end());
    for (size_t i = 1; i < extents.size(); ++i) {
        if (extents[i - 1].first + extents[i - 1].second > extents[i].first) {
            throw_corrupt_data("page: overlapping record extents");
        }
    }
    Page p(static_cast<uint32_t>(bytes.size()));
    std::memcpy(p.buf_.data(), bytes.data(), bytes.size());
    return p;
}

Page::InsertResult Page::insert(uint32_t vid, uint8_t color, std::span<const uint8_t> record) {
    PageView v(buf_);
    uint32_t count = v.count();
    if (count == 255) {
        return InsertResult::page_full;
    }
    uint32_t pos = slot_lower_bound(buf_.data(), count, vid);
    if (pos < count && read_slot(buf_.data(), pos).vid == vid) {
        throw_invalid_argument("page: duplicate vid");
    }
    if (kPageSlotSize + record.size() > v.free_space()) {
        return InsertResult::page_full;
    }

    auto new_start = static_cast<uint16_t>(v.heap_start() - record.size());
    std::memcpy(buf_.data() + new_start, record.data(), record.size());

    uint8_t* slot0 = buf_.data() + kPageHeaderSize;
    std::memmove(slot0 + kPageSlotSize * (pos + 1), slot0 + kPageSlotSize * pos,
                 kPageSlotSize * (count - pos));
    write_slot(buf_.data(), pos,
               PageSlot{vid, color, static_cast<uint16_t>(record.size()), new_start});

    buf_[0] = static_cast<uint8_t>(count + 1);
    detail::store_u16_le(buf_.data() + 1, new_start);
    detail::store_u16_le(buf_.data() + 3,
                         static_cast<uint16_t>(v.heap_used() + record.size()));
    return InsertResult::inserted;
}

}  // namespace gannet
