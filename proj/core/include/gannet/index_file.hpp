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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gannet/dataset.hpp"
#include "gannet/graph.hpp"
#include "gannet/page.hpp"
#include "gannet/placement.hpp"
#include "gannet/quantizer.hpp"

namespace gannet {

// On-disk index layout, little-endian throughout:
//   magic "GANNETIX" (8 bytes)
//   version u32, dim u32, n u32, entry_point u32,
//   page_size u32, page_count u32, max_degree u32, quantizer_blob_size u32
//   quantizer blob
//   binary codes, n * ceil(dim/8) bytes
//   directory, n * u32 page IDs
//   zero padding up to the next page_size boundary
//   pages, page_count * page_size bytes
// Each page record is the vertex's 4-bit extended code followed by its
// delta-compressed adjacency list; the owning slot carries vid and color.

inline constexpr char kIndexMagic[8] = {'G', 'A', 'N', 'N', 'E', 'T', 'I', 'X'};
inline constexpr uint32_t kIndexVersion = 1;

void write_index(const std::string& path, const Dataset& ds, const ScalarQuantizer& model,
                 const Graph& graph, const PlacementPlan& plan, uint32_t page_size);

class IndexReader {
public:
    ~IndexReader();
    IndexReader(const IndexReader&) = delete;
    IndexReader& operator=(const IndexReader&) = delete;

    uint32_t dim() const { return dim_; }
    uint32_t n() const { return n_; }
    uint32_t entry_point() const { return entry_point_; }
    uint32_t page_size() const { return page_size_; }
    uint32_t page_count() const { return page_count_; }
    uint32_t max_degree() const { return max_degree_; }
    const ScalarQuantizer& quantizer() const { return quantizer_; }

    size_t binary_code_size() const { return (dim_ + 7) / 8; }
    const uint8_t* binary_code(uint32_t vid) const {
        return binary_codes_.data() + static_cast<size_t>(vid) * binary_code_size();
    }

    uint32_t page_of(uint32_t vid) const { return directory_[vid]; }
    std::span<const uint32_t> directory() const { return directory_; }

    uint64_t page_file_offset(uint32_t page_id) const {
        return pages_offset_ + static_cast<uint64_t>(page_id) * page_size_;
    }
    int fd() const { return fd_; }

    /// Synchronous page read into a caller buffer of exactly page_size bytes.
    void read_page(uint32_t page_id, std::span<uint8_t> out) const;

private:
    friend std::unique_ptr<IndexReader> open_index(const std::string& path);
    IndexReader() = default;

    int fd_ = -1;
    uint32_t dim_ = 0;
    uint32_t n_ = 0;
    uint32_t entry_point_ = 0;
    uint32_t page_size_ = 0;
    uint32_t page_count_ = 0;
    uint32_t max_degree_ = 0;
    uint64_t pages_offset_ = 0;
    ScalarQuantizer quantizer_;
    std::vector<uint8_t> binary_codes_;
    std::vector<uint32_t> directory_;
};

/// Validates magic, version, header sanity, file size, and a deterministic
/// sample of directory/page agreement. Errors are distinct: io_error,
/// corrupt_data, version_mismatch.
std::unique_ptr<IndexReader> open_index(const std::string& path);

struct LayoutStats {
    uint32_t page_count = 0;
    uint64_t total_bytes = 0;
    uint64_t free_bytes = 0;
    double fragmentation = 0.0;  // free / total across all pages
    // Same records, one per page: how much space that layout would waste.
    double one_record_per_page_fragmentation = 0.0;
    uint64_t colored_records = 0;  // slots with a nonzero affinity color
    double mean_records_per_page = 0.0;
};

LayoutStats compute_layout_stats(const IndexReader& reader);

}  // namespace gannet
