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

#include "gannet/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gannet/endian.hpp"

namespace gannet {

Dataset::Dataset(uint32_t dim, std::vector<float> data) : dim_(dim), data_(std::move(data)) {
    if (dim_ == 0) throw_invalid_argument("dataset dimension must be >= 1");
    if (data_.size() % dim_ != 0) throw_invalid_argument("data size not a multiple of dim");
    n_ = static_cast<uint32_t>(data_.size() / dim_);
}

Dataset Dataset::from_rows(const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) throw_invalid_argument("empty row list");
    Dataset ds;
    ds.dim_ = static_cast<uint32_t>(rows.front().size());
    if (ds.dim_ == 0) throw_invalid_argument("dataset dimension must be >= 1");
    for (const auto& r : rows) ds.append(r);
    return ds;
}

void Dataset::append(std::span<const float> v) {
    if (dim_ == 0) {
        dim_ = static_cast<uint32_t>(v.size());
        if (dim_ == 0) throw_invalid_argument("dataset dimension must be >= 1");
    }
    if (v.size() != dim_) throw_invalid_argument("vector dimension mismatch on append");
    for (float x : v) {
        if (!std::isfinite(x)) throw_invalid_argument("vector component is not finite");
    }
    data_.insert(data_.end(), v.begin(), v.end());
    ++n_;
}

namespace {

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io_error("cannot open " + path);
    in.seekg(0, std::ios::end);
    auto len = static_cast<size_t>(in.tellg());
    in.seekg(0);
    std::vector<uint8_t> buf(len);
    if (len > 0) in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len));
    if (!in) throw_io_error("short read on " + path);
    return buf;
}

}  // namespace

Dataset read_fvecs(const std::string& path) {
    auto buf = slurp(path);
    std::vector<float> data;
    uint32_t dim = 0;
    size_t off = 0;
    uint32_t n = 0;
    while (off < buf.size()) {
        if (off + 4 > buf.size()) throw_corrupt_data("truncated fvecs header in " + path);
        uint32_t d = detail::load_u32_le(buf.data() + off);
        off += 4;
        if (d == 0 || d > (1u << 24)) throw_corrupt_data("implausible fvecs dimension in " + path);
        if (dim == 0) dim = d;
        if (d != dim) throw_corrupt_data("inconsistent fvecs dimensions in " + path);
        if (off + 4ull * d > buf.size()) throw_corrupt_data("truncated fvecs vector in " + path);
        for (uint32_t i = 0; i < d; ++i) data.push_back(detail::load_f32_le(buf.data() + off + 4ull * i));
        off += 4ull * d;
        ++n;
    }
    if (n == 0) throw_corrupt_data("empty fvecs file " + path);
    return Dataset(dim, std::move(data));
}

Dataset read_bvecs(const std::string& path) {
    auto buf = slurp(path);
    std::vector<float> data;
    uint32_t dim = 0;
    size_t off = 0;
    uint32_t n = 0;
    while (off < buf.size()) {
        if (off + 4 > buf.size()) throw_corrupt_data("truncated bvecs header in " + path);
        uint32_t d = detail::load_u32_le(buf.data() + off);
        off += 4;
        if (d == 0 || d > (1u << 24)) throw_corrupt_data("implausible bvecs dimension in " + path);
        if (dim == 0) dim = d;
        if (d != dim) throw_corrupt_data("inconsistent bvecs dimensions in " + path);
        if (off + d > buf.size()) throw_corrupt_data("truncated bvecs vector in " + path);
        for (uint32_t i = 0; i < d; ++i) data.push_back(static_cast<float>(buf[off + i]));
        off += d;
        ++n;
    }
    if (n == 0) throw_corrupt_data("empty bvecs file " + path);
    return Dataset(dim, std::move(data));
}

std::vector<std::vector<uint32_t>> read_ivecs(const std::string& path) {
    auto buf = slurp(path);
    std::vector<std::vector<uint32_t>> rows;
    size_t off = 0;
    while (off < buf.size()) {
        if (off + 4 > buf.size()) throw_corrupt_data("truncated ivecs header in " + path);
        uint32_t d = detail::load_u32_le(buf.data() + off);
        off += 4;
        if (d > (1u << 24)) throw_corrupt_data("implausible ivecs row length in " + path);
        if (off + 4ull * d > buf.size()) throw_corrupt_data("truncated ivecs row in " + path);
        std::vector<uint32_t> row(d);
        for (uint32_t i = 0; i < d; ++i) row[i] = detail::load_u32_le(buf.data() + off + 4ull * i);
        off += 4ull * d;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_fvecs(const std::string& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io_error("cannot open " + path + " for writing");
    std::vector<uint8_t> rec(4 + 4ull * ds.dim());
    for (uint32_t i = 0; i < ds.size(); ++i) {
        detail::store_u32_le(rec.data(), ds.dim());
        auto v = ds[i];
        for (uint32_t j = 0; j < ds.dim(); ++j) detail::store_f32_le(rec.data() + 4 + 4ull * j, v[j]);
        out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    }
    if (!out) throw_io_error("write failed on " + path);
}

void write_ivecs(const std::string& path, const std::vector<std::vector<uint32_t>>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io_error("cannot open " + path + " for writing");
    for (const auto& row : rows) {
        std::vector<uint8_t> rec(4 + 4ull * row.size());
        detail::store_u32_le(rec.data(), static_cast<uint32_t>(row.size()));
        for (size_t j = 0; j < row.size(); ++j) detail::store_u32_le(rec.data() + 4 + 4 * j, row[j]);
        out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    }
    if (!out) throw_io_error("write failed on " + path);
}

}  // namespace gannet
