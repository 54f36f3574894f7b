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
#include <string>
#include <vector>

#include "gannet/error.hpp"

namespace gannet {

/// Row-major collection of float vectors with a shared dimensionality.
/// Vertex IDs are the contiguous row indices 0..n-1.
class Dataset {
public:
    Dataset() = default;
    Dataset(uint32_t dim, std::vector<float> data);

    static Dataset from_rows(const std::vector<std::vector<float>>& rows);

    uint32_t dim() const noexcept { return dim_; }
    uint32_t size() const noexcept { return n_; }
    bool empty() const noexcept { return n_ == 0; }

    std::span<const float> operator[](uint32_t vid) const {
        return {data_.data() + static_cast<size_t>(vid) * dim_, dim_};
    }

    void append(std::span<const float> v);

    const std::vector<float>& raw() const noexcept { return data_; }

private:
    uint32_t dim_ = 0;
    uint32_t n_ = 0;
    std::vector<float> data_;
};

// Readers/writers for the classic ann-benchmarks vector formats: every vector
// is a little-endian 4-byte dimension header followed by the components
// (float32 for fvecs, uint8 for bvecs, int32 for ivecs).
Dataset read_fvecs(const std::string& path);
Dataset read_bvecs(const std::string& path);
std::vector<std::vector<uint32_t>> read_ivecs(const std::string& path);

void write_fvecs(const std::string& path, const Dataset& ds);
void write_ivecs(const std::string& path, const std::vector<std::vector<uint32_t>>& rows);

}  // namespace gannet
