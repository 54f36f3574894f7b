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

#include "gannet/error.hpp"

namespace gannet {

/// LEB128-style varint used by the adjacency codec: 7 value bits per byte,
/// high bit set on every byte except the last.
inline void varint_encode(uint32_t v, std::vector<uint8_t>& out) {
    while (v >= 0x80U) {
        out.push_back(static_cast<uint8_t>(v | 0x80U));
        v >>= 7;
    }
    out.push_back(static_cast<uint8_t>(v));
}

/// Decodes one varint from [p, end); advances and returns the new cursor.
/// Throws corrupt_data on truncation or on encodings that overflow 32 bits.
inline const uint8_t* varint_decode(const uint8_t* p, const uint8_t* end, uint32_t& v) {
    uint64_t acc = 0;
    uint32_t shift = 0;
    while (true) {
        if (p == end) {
            throw_corrupt_data("varint truncated");
        }
        uint8_t byte = *p++;
        acc |= static_cast<uint64_t>(byte & 0x7FU) << shift;
        if ((byte & 0x80U) == 0) {
            break;
        }
        shift += 7;
        if (shift >= 35) {
            throw_corrupt_data("varint overlong for 32-bit value");
        }
    }
    if (acc > UINT32_MAX) {
        throw_corrupt_data("varint exceeds 32-bit range");
    }
    v = static_cast<uint32_t>(acc);
    return p;
}

/// varint(count), varint(first id), then varint deltas between consecutive
/// IDs. Empty list encodes as the single byte 0x00.
std::vector<uint8_t> compress_adjacency(std::span<const uint32_t> ids);
std::vector<uint32_t> decompress_adjacency(std::span<const uint8_t> bytes);

}  // namespace gannet
