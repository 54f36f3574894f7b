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

#include "gannet/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>

#include "gannet/distance.hpp"
#include "gannet/endian.hpp"
#include "gannet/error.hpp"

namespace gannet {

namespace {

// Bounded draw straight off the mt19937_64 stream. std::uniform_int_distribution
// is implementation-defined, which would break bit-for-bit reproducibility of
// trained models across standard libraries.
uint64_t bounded(std::mt19937_64& rng, uint64_t bound) {
    return rng() % bound;
}

double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

float dist_sq_to(std::span<const float> v, const std::vector<float>& c) {
    float acc = 0.0F;
    for (size_t i = 0; i < v.size(); ++i) {
        float d = v[i] - c[i];
        acc += d * d;
    }
    return acc;
}

// Nearest-rank percentile over an unsorted sample; p in [0,100].
float percentile(std::vector<float>& values, double p) {
    std::sort(values.begin(), values.end());
    auto m = static_cast<double>(values.size());
    auto rank = static_cast<long>(std::ceil(p / 100.0 * m));
    long idx = std::clamp(rank - 1, 0L, static_cast<long>(values.size()) - 1);
    return values[static_cast<size_t>(idx)];
}

}  // namespace

KMeansResult kmeans(const Dataset& ds, std::span<const uint32_t> row_ids, uint32_t k,
                    uint64_t seed, uint32_t iterations) {
    if (row_ids.empty()) {
        throw_invalid_argument("kmeans: no input rows");
    }
    if (k == 0 || k > row_ids.size()) {
        throw_invalid_argument("kmeans: cluster count must be in [1, rows]");
    }
    const uint32_t d = ds.dim();
    const size_t m = row_ids.size();
    std::mt19937_64 rng(seed);

    KMeansResult res;
    res.centroids.reserve(k);
    std::vector<float> best_d2(m, std::numeric_limits<float>::max());

    // k-means++ seeding: first center uniform, the rest proportional to the
    // squared distance to the nearest already-chosen center.
    {
        auto first = ds[row_ids[bounded(rng, m)]];
        res.centroids.emplace_back(first.begin(), first.end());
    }
    for (uint32_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (size_t i = 0; i < m; ++i) {
            float d2 = dist_sq_to(ds[row_ids[i]], res.centroids.back());
            best_d2[i] = std::min(best_d2[i], d2);
            total += best_d2[i];
        }
        size_t pick = 0;
        if (total <= 0.0) {
            pick = bounded(rng, m);
        } else {
            double r = unit_double(rng) * total;
            double acc = 0.0;
            pick = m - 1;
            for (size_t i = 0; i < m; ++i) {
                acc += best_d2[i];
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
        }
        auto row = ds[row_ids[pick]];
        res.centroids.emplace_back(row.begin(), row.end());
    }

    res.assignment.assign(m, 0);
    std::vector<double> sums(static_cast<size_t>(k) * d);
    std::vector<uint32_t> counts(k);
    for (uint32_t iter = 0; iter < iterations; ++iter) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0U);
        for (size_t i = 0; i < m; ++i) {
            auto row = ds[row_ids[i]];
            uint32_t best = 0;
            float best_dist = dist_sq_to(row, res.centroids[0]);
            for (uint32_t c = 1; c < k; ++c) {
                float d2 = dist_sq_to(row, res.centroids[c]);
                if (d2 < best_dist) {
                    best_dist = d2;
                    best = c;
                }
            }
            res.assignment[i] = best;
            counts[best]++;
            double* s = &sums[static_cast<size_t>(best) * d];
            for (uint32_t j = 0; j < d; ++j) {
                s[j] += row[j];
            }
        }
        for (uint32_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                continue;  // empty cluster keeps its previous center
            }
            const double* s = &sums[static_cast<size_t>(c) * d];
            for (uint32_t j = 0; j < d; ++j) {
                res.centroids[c][j] = static_cast<float>(s[j] / counts[c]);
            }
        }
    }
    return res;
}

ScalarQuantizer ScalarQuantizer::train(const Dataset& ds, const TrainOptions& opts) {
    if (ds.size() == 0) {
        throw_invalid_argument("ScalarQuantizer::train: empty dataset");
    }
    if (opts.num_clusters == 0 || opts.num_clusters > ds.size()) {
        throw_invalid_argument("ScalarQuantizer::train: num_clusters must be in [1, n]");
    }
    if (opts.sample_size == 0) {
        throw_invalid_argument("ScalarQuantizer::train: sample_size must be positive");
    }

    std::mt19937_64 rng(opts.seed);
    const uint32_t n = ds.size();
    uint32_t take = std::min<uint32_t>(opts.sample_size, n);

    // Uniform sample without replacement via a partial Fisher-Yates shuffle.
    std::vector<uint32_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0U);
    for (uint32_t i = 0; i < take; ++i) {
        uint32_t j = i + static_cast<uint32_t>(bounded(rng, n - i));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(take);

    ScalarQuantizer q;
    q.dim_ = ds.dim();
    q.min_.assign(ds.dim(), std::numeric_limits<float>::max());
    q.max_.assign(ds.dim(), std::numeric_limits<float>::lowest());
    for (uint32_t id : ids) {
        auto row = ds[id];
        for (uint32_t j = 0; j < ds.dim(); ++j) {
            q.min_[j] = std::min(q.min_[j], row[j]);
            q.max_[j] = std::max(q.max_[j], row[j]);
        }
    }

    auto km = kmeans(ds, ids, std::min<uint32_t>(opts.num_clusters, take), rng());
    q.centroids_ = km.centroids;

    if (opts.tau_percentile <= 0.0) {
        q.tau_ = 0.0F;
        return q;
    }
    std::vector<std::vector<float>> member_dists(q.centroids_.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        uint32_t c = km.assignment[i];
        member_dists[c].push_back(
            std::sqrt(dist_sq_to(ds[ids[i]], q.centroids_[c])));
    }
    double sum = 0.0;
    uint32_t populated = 0;
    for (auto& dists : member_dists) {
        if (dists.empty()) {
            continue;
        }
        sum += percentile(dists, opts.tau_percentile);
        populated++;
    }
    q.tau_ = populated == 0 ? 0.0F : static_cast<float>(sum / populated);
    return q;
}

void ScalarQuantizer::encode_binary(std::span<const float> v, uint8_t* out) const {
    if (v.size() != dim_) {
        throw_invalid_argument("encode_binary: dimension mismatch");
    }
    std::memset(out, 0, binary_code_size());
    for (uint32_t i = 0; i < dim_; ++i) {
        float midpoint = (min_[i] + max_[i]) * 0.5F;
        if (v[i] >= midpoint) {
            out[i >> 3] |= static_cast<uint8_t>(1U << (i & 7));
        }
    }
}

void ScalarQuantizer::encode_extended(std::span<const float> v, uint8_t* out) const {
    if (v.size() != dim_) {
        throw_invalid_argument("encode_extended: dimension mismatch");
    }
    std::memset(out, 0, extended_code_size());
    for (uint32_t i = 0; i < dim_; ++i) {
        float range = max_[i] - min_[i];
        uint8_t val = 0;
        if (range > 0.0F) {
            float t = std::clamp((v[i] - min_[i]) / range, 0.0F, 1.0F);
            val = static_cast<uint8_t>(std::lround(15.0F * t));
        }
        out[i >> 1] |= static_cast<uint8_t>((i & 1) ? (val << 4) : val);
    }
}

float ScalarQuantizer::estimate_distance_binary(std::span<const float> q,
                                                const uint8_t* code) const {
    if (q.size() != dim_) {
        throw_invalid_argument("estimate_distance_binary: dimension mismatch");
    }
    float acc = 0.0F;
    for (uint32_t i = 0; i < dim_; ++i) {
        bool bit = (code[i >> 3] >> (i & 7)) & 1U;
        float range = max_[i] - min_[i];
        float recon = min_[i] + (bit ? 0.75F : 0.25F) * range;
        float d = q[i] - recon;
        acc += d * d;
    }
    return std::sqrt(acc);
}

float ScalarQuantizer::estimate_distance_extended(std::span<const float> q,
                                                  const uint8_t* code) const {
    if (q.size() != dim_) {
        throw_invalid_argument("estimate_distance_extended: dimension mismatch");
    }
    float acc = 0.0F;
    for (uint32_t i = 0; i < dim_; ++i) {
        uint8_t val = (i & 1) ? (code[i >> 1] >> 4) : (code[i >> 1] & 0x0F);
        float range = max_[i] - min_[i];
        float recon = min_[i] + (static_cast<float>(val) / 15.0F) * range;
        float d = q[i] - recon;
        acc += d * d;
    }
    return std::sqrt(acc);
}

std::vector<float> ScalarQuantizer::reconstruct_binary(const uint8_t* code) const {
    std::vector<float> out(dim_);
    for (uint32_t i = 0; i < dim_; ++i) {
        bool bit = (code[i >> 3] >> (i & 7)) & 1U;
        out[i] = min_[i] + (bit ? 0.75F : 0.25F) * (max_[i] - min_[i]);
    }
    return out;
}

std::vector<float> ScalarQuantizer::reconstruct_extended(const uint8_t* code) const {
    std::vector<float> out(dim_);
    for (uint32_t i = 0; i < dim_; ++i) {
        uint8_t val = (i & 1) ? (code[i >> 1] >> 4) : (code[i >> 1] & 0x0F);
        out[i] = min_[i] + (static_cast<float>(val) / 15.0F) * (max_[i] - min_[i]);
    }
    return out;
}

std::vector<uint8_t> ScalarQuantizer::serialize() const {
    size_t k = centroids_.size();
    std::vector<uint8_t> blob(8 + 4 * (2 * dim_ + k * dim_ + 1));
    uint8_t* p = blob.data();
    detail::store_u32_le(p, dim_);
    detail::store_u32_le(p + 4, static_cast<uint32_t>(k));
    p += 8;
    for (float f : min_) {
        detail::store_f32_le(p, f);
        p += 4;
    }
    for (float f : max_) {
        detail::store_f32_le(p, f);
        p += 4;
    }
    for (const auto& c : centroids_) {
        for (float f : c) {
            detail::store_f32_le(p, f);
            p += 4;
        }
    }
    detail::store_f32_le(p, tau_);
    return blob;
}

ScalarQuantizer ScalarQuantizer::deserialize(std::span<const uint8_t> blob) {
    if (blob.size() < 8) {
        throw_corrupt_data("quantizer blob truncated");
    }
    ScalarQuantizer q;
    q.dim_ = detail::load_u32_le(blob.data());
    uint32_t k = detail::load_u32_le(blob.data() + 4);
    if (q.dim_ == 0 || k == 0) {
        throw_corrupt_data("quantizer blob has zero dim or clusters");
    }
    size_t expect = 8 + 4 * (2 * static_cast<size_t>(q.dim_) +
                             static_cast<size_t>(k) * q.dim_ + 1);
    if (blob.size() != expect) {
        throw_corrupt_data("quantizer blob size mismatch");
    }
    const uint8_t* p = blob.data() + 8;
    q.min_.resize(q.dim_);
    q.max_.resize(q.dim_);
    for (uint32_t i = 0; i < q.dim_; ++i, p += 4) {
        q.min_[i] = detail::load_f32_le(p);
    }
    for (uint32_t i = 0; i < q.dim_; ++i, p += 4) {
        q.max_[i] = detail::load_f32_le(p);
    }
    for (uint32_t i = 0; i < q.dim_; ++i) {
        if (q.min_[i] > q.max_[i]) {
            throw_corrupt_data("quantizer blob has min > max");
        }
    }
    q.centroids_.assign(k, std::vector<float>(q.dim_));
    for (uint32_t c = 0; c < k; ++c) {
        for (uint32_t i = 0; i < q.dim_; ++i, p += 4) {
            q.centroids_[c][i] = detail::load_f32_le(p);
        }
    }
    q.tau_ = detail::load_f32_le(p);
    if (!(q.tau_ >= 0.0F)) {
        throw_corrupt_data("quantizer blob has negative tau");
    }
    return q;
}

}  // namespace gannet
