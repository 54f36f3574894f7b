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

/// Abstract compression interface. The engine only depends on this surface, so
/// a different codec (e.g. a rotation-based one) can slot in without touching
/// the search path. The shipped implementation is per-dimension uniform scalar
/// quantization: a 1-bit code resident in memory and a 4-bit extended code on
/// disk used for refinement.
class Quantizer {
public:
    virtual ~Quantizer() = default;

    virtual uint32_t dim() const = 0;
    virtual size_t binary_code_size() const = 0;    // bytes, ⌈d/8⌉ for 1-bit
    virtual size_t extended_code_size() const = 0;  // bytes, ⌈d/2⌉ for 4-bit

    virtual void encode_binary(std::span<const float> v, uint8_t* out) const = 0;
    virtual void encode_extended(std::span<const float> v, uint8_t* out) const = 0;
    virtual float estimate_distance_binary(std::span<const float> q,
                                           const uint8_t* code) const = 0;
    virtual float estimate_distance_extended(std::span<const float> q,
                                             const uint8_t* code) const = 0;
};

struct TrainOptions {
    uint32_t num_clusters = 16;
    uint32_t sample_size = 100000;
    uint64_t seed = 42;
    // Per-cluster distance-to-centroid percentile averaged into the affinity
    // threshold. Values ≤ 0 force tau = 0 (co-placement disabled).
    double tau_percentile = 5.0;
};

class ScalarQuantizer final : public Quantizer {
public:
    ScalarQuantizer() = default;

    static ScalarQuantizer train(const Dataset& ds, const TrainOptions& opts);

    uint32_t dim() const override { return dim_; }
    size_t binary_code_size() const override { return (dim_ + 7) / 8; }
    size_t extended_code_size() const override { return (dim_ + 1) / 2; }

    void encode_binary(std::span<const float> v, uint8_t* out) const override;
    void encode_extended(std::span<const float> v, uint8_t* out) const override;
    float estimate_distance_binary(std::span<const float> q, const uint8_t* code) const override;
    float estimate_distance_extended(std::span<const float> q, const uint8_t* code) const override;

    /// Dequantized vectors, mostly useful to tests.
    std::vector<float> reconstruct_binary(const uint8_t* code) const;
    std::vector<float> reconstruct_extended(const uint8_t* code) const;

    float tau() const { return tau_; }
    void set_tau(float t) { tau_ = t; }
    uint32_t num_clusters() const { return static_cast<uint32_t>(centroids_.size()); }
    const std::vector<std::vector<float>>& centroids() const { return centroids_; }
    std::span<const float> per_dim_min() const { return min_; }
    std::span<const float> per_dim_max() const { return max_; }

    /// Little-endian blob: dim u32, num_clusters u32, min f32[d], max f32[d],
    /// centroids f32[num_clusters*d], tau f32.
    std::vector<uint8_t> serialize() const;
    static ScalarQuantizer deserialize(std::span<const uint8_t> blob);

    bool operator==(const ScalarQuantizer& o) const {
        return dim_ == o.dim_ && min_ == o.min_ && max_ == o.max_ &&
               centroids_ == o.centroids_ && tau_ == o.tau_;
    }

private:
    uint32_t dim_ = 0;
    std::vector<float> min_;
    std::vector<float> max_;
    std::vector<std::vector<float>> centroids_;
    float tau_ = 0.0F;
};

/// Seeded Lloyd k-means with k-means++ style seeding, fixed iteration count.
/// Exposed for tests and for the placement threshold computation; rows are
/// assigned to the nearest centroid with ties broken toward the lower index.
struct KMeansResult {
    std::vector<std::vector<float>> centroids;
    std::vector<uint32_t> assignment;  // one entry per input row
};
KMeansResult kmeans(const Dataset& ds, std::span<const uint32_t> row_ids, uint32_t k,
                    uint64_t seed, uint32_t iterations = 20);

}  // namespace gannet
