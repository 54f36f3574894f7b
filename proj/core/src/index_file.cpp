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

#include "gannet/index_file.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "gannet/endian.hpp"
#include "gannet/error.hpp"
#include "gannet/varint.hpp"

namespace gannet {

namespace {

constexpr size_t kHeaderSize = 8 + 8 * 4;

std::vector<uint8_t> encode_record(const Dataset& ds, const ScalarQuantizer& model,
                                   const Graph& graph, uint32_t vid) {
    std::vector<uint8_t> rec(model.extended_code_size());
    model.encode_extended(ds[vid], rec.data());
    auto adj = compress_adjacency(graph.adjacency[vid]);
    rec.insert(rec.end(), adj.begin(), adj.end());
    return rec;
}

}  // namespace

void write_index(const std::string& path, const Dataset& ds, const ScalarQuantizer& model,
                 const Graph& graph, const PlacementPlan& plan, uint32_t page_size) {
    const uint32_t n = ds.size();
    if (n == 0 || graph.n == 0) {
        throw_invalid_argument("write_index: empty dataset or graph");
    }
    if (graph.n != n || model.dim() != ds.dim()) {
        throw_invalid_argument("write_index: dataset, model and graph disagree");
    }
    if (graph.entry_point >= n) {
        throw_invalid_argument("write_index: entry point out of range");
    }
    if (plan.total_records() != n) {
        throw_invalid_argument("write_index: placement plan does not cover every vid once");
    }

    uint32_t max_degree = 1;
    for (const auto& adj : graph.adjacency) {
        max_degree = std::max<uint32_t>(max_degree, static_cast<uint32_t>(adj.size()));
    }

    std::vector<uint32_t> directory(n, UINT32_MAX);
    std::vector<Page> pages;
    pages.reserve(plan.pages.size());
    for (size_t page_id = 0; page_id < plan.pages.size(); ++page_id) {
        Page page(page_size);
        for (const auto& [vid, color] : plan.pages[page_id]) {
            if (vid >= n) {
                throw_invalid_argument("write_index: plan references vid out of range");
            }
            if (directory[vid] != UINT32_MAX) {
                throw_invalid_argument("write_index: plan places a vid twice");
            }
            auto rec = encode_record(ds, model, graph, vid);
            if (page.insert(vid, color, rec) != Page::InsertResult::inserted) {
                throw_invalid_argument("write_index: plan overflows a page");
            }
            directory[vid] = static_cast<uint32_t>(page_id);
        }
        pages.push_back(std::move(page));
    }

    auto blob = model.serialize();
    std::vector<uint8_t> header(kHeaderSize);
    std::memcpy(header.data(), kIndexMagic, 8);
    uint8_t* p = header.data() + 8;
    detail::store_u32_le(p + 0, kIndexVersion);
    detail::store_u32_le(p + 4, ds.dim());
    detail::store_u32_le(p + 8, n);
    detail::store_u32_le(p + 12, graph.entry_point);
    detail::store_u32_le(p + 16, page_size);
    detail::store_u32_le(p + 20, static_cast<uint32_t>(pages.size()));
    detail::store_u32_le(p + 24, max_degree);
    detail::store_u32_le(p + 28, static_cast<uint32_t>(blob.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw_io_error("write_index: cannot open " + path);
    }
    auto write_bytes = [&](const void* data, size_t len) {
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    };
    write_bytes(header.data(), header.size());
    write_bytes(blob.data(), blob.size());

    size_t code_size = model.binary_code_size();
    std::vector<uint8_t> code(code_size);
    for (uint32_t vid = 0; vid < n; ++vid) {
        model.encode_binary(ds[vid], code.data());
        write_bytes(code.data(), code.size());
    }
    std::vector<uint8_t> dir_bytes(4ULL * n);
    for (uint32_t vid = 0; vid < n; ++vid) {
        detail::store_u32_le(dir_bytes.data() + 4ULL * vid, directory[vid]);
    }
    write_bytes(dir_bytes.data(), dir_bytes.size());

    uint64_t meta_end = kHeaderSize + blob.size() + code_size * n + 4ULL * n;
    uint64_t pages_offset = (meta_end + page_size - 1) / page_size * page_size;
    std::vector<uint8_t> pad(pages_offset - meta_end, 0);
    write_bytes(pad.data(), pad.size());
    for (const auto& page : pages) {
        write_bytes(page.bytes().data(), page.bytes().size());
    }
    out.flush();
    if (!out) {
        throw_io_error("write_index: write failed for " + path);
    }
}

IndexReader::~IndexReader() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

void IndexReader::read_page(uint32_t page_id, std::span<uint8_t> out) const {
    if (page_id >= page_count_) {
        throw_invalid_argument("read_page: page id out of range");
    }
    if (out.size() != page_size_) {
        throw_invalid_argument("read_page: buffer size must equal page size");
    }
    size_t done = 0;
    while (done < out.size()) {
        ssize_t got = ::pread(fd_, out.data() + done, out.size() - done,
                              static_cast<off_t>(page_file_offset(page_id) + done));
        if (got < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_io_error("read_page: pread failed");
        }
        if (got == 0) {
            throw_io_error("read_page: unexpected end of file");
        }
        done += static_cast<size_t>(got);
    }
}

std::unique_ptr<IndexReader> open_index(const std::string& path) {
    int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) {
        throw_io_error("open_index: cannot open " + path);
    }
    auto reader = std::unique_ptr<IndexReader>(new IndexReader());
    reader->fd_ = fd;

    auto read_at = [&](uint64_t off, void* dst, size_t len) {
        size_t done = 0;
        while (done < len) {
            ssize_t got = ::pread(fd, static_cast<uint8_t*>(dst) + done, len - done,
                                  static_cast<off_t>(off + done));
            if (got < 0) {
                if (errno == EINTR) {
                    continue;
                }
                throw_io_error("open_index: read failed");
            }
            if (got == 0) {
                throw_corrupt_data("open_index: file truncated");
            }
            done += static_cast<size_t>(got);
        }
    };

    uint8_t header[kHeaderSize];
    read_at(0, header, sizeof(header));
    if (std::memcmp(header, kIndexMagic, 8) != 0) {
        throw_corrupt_data("open_index: bad magic");
    }
    const uint8_t* p = header + 8;
    uint32_t version = detail::load_u32_le(p);
    if (version != kIndexVersion) {
        throw Error(ErrorCode::version_mismatch,
                    "open_index: unsupported index version " + std::to_string(version));
    }
    reader->dim_ = detail::load_u32_le(p + 4);
    reader->n_ = detail::load_u32_le(p + 8);
    reader->entry_point_ = detail::load_u32_le(p + 12);
    reader->page_size_ = detail::load_u32_le(p + 16);
    reader->page_count_ = detail::load_u32_le(p + 20);
    reader->max_degree_ = detail::load_u32_le(p + 24);
    uint32_t blob_size = detail::load_u32_le(p + 28);

    if (reader->dim_ == 0 || reader->dim_ > (1U << 24) || reader->n_ == 0 ||
        reader->page_count_ == 0 || reader->entry_point_ >= reader->n_ ||
        reader->max_degree_ == 0) {
        throw_corrupt_data("open_index: implausible header fields");
    }
    if (reader->page_size_ < kMinPageSize || reader->page_size_ > kMaxPageSize) {
        throw_corrupt_data("open_index: implausible page size");
    }

    std::vector<uint8_t> blob(blob_size);
    read_at(kHeaderSize, blob.data(), blob.size());
    reader->quantizer_ = ScalarQuantizer::deserialize(blob);
    if (reader->quantizer_.dim() != reader->dim_) {
        throw_corrupt_data("open_index: quantizer dim disagrees with header");
    }

    uint64_t off = kHeaderSize + blob_size;
    reader->binary_codes_.resize(reader->binary_code_size() * reader->n_);
    read_at(off, reader->binary_codes_.data(), reader->binary_codes_.size());
    off += reader->binary_codes_.size();

    std::vector<uint8_t> dir_bytes(4ULL * reader->n_);
    read_at(off, dir_bytes.data(), dir_bytes.size());
    off += dir_bytes.size();
    reader->directory_.resize(reader->n_);
    for (uint32_t vid = 0; vid < reader->n_; ++vid) {
        reader->directory_[vid] = detail::load_u32_le(dir_bytes.data() + 4ULL * vid);
        if (reader->directory_[vid] >= reader->page_count_) {
            throw_corrupt_data("open_index: directory entry beyond page count");
        }
    }

    reader->pages_offset_ = (off + reader->page_size_ - 1) / reader->page_size_ *
                            reader->page_size_;
    off_t file_size = ::lseek(fd, 0, SEEK_END);
    if (file_size < 0) {
        throw_io_error("open_index: lseek failed");
    }
    uint64_t expect = reader->pages_offset_ +
                      static_cast<uint64_t>(reader->page_count_) * reader->page_size_;
    if (static_cast<uint64_t>(file_size) != expect) {
        throw_corrupt_data("open_index: file size disagrees with header");
    }

    // Spot-check directory/page agreement on a deterministic page sample.
    uint32_t sample = std::min<uint32_t>(16, reader->page_count_);
    std::vector<uint8_t> buf(reader->page_size_);
    for (uint32_t i = 0; i < sample; ++i) {
        uint32_t page_id =
            static_cast<uint32_t>(static_cast<uint64_t>(i) * reader->page_count_ / sample);
        reader->read_page(page_id, buf);
        PageView view(buf);
        for (uint32_t s = 0; s < view.count(); ++s) {
            PageSlot slot = view.slot(s);
            if (slot.vid >= reader->n_ || reader->directory_[slot.vid] != page_id) {
                throw_corrupt_data("open_index: directory disagrees with page contents");
            }
        }
    }
    return reader;
}

LayoutStats compute_layout_stats(const IndexReader& reader) {
    LayoutStats stats;
    stats.page_count = reader.page_count();
    stats.total_bytes = static_cast<uint64_t>(reader.page_count()) * reader.page_size();

    uint64_t records = 0;
    uint64_t one_rpp_free = 0;
    std::vector<uint8_t> buf(reader.page_size());
    for (uint32_t page_id = 0; page_id < reader.page_count(); ++page_id) {
        reader.read_page(page_id, buf);
        PageView view(buf);
        stats.free_bytes += view.free_space();
        records += view.count();
        for (uint32_t s = 0; s < view.count(); ++s) {
            PageSlot slot = view.slot(s);
            if (slot.color != 0) {
                stats.colored_records++;
            }
            one_rpp_free += reader.page_size() - kPageHeaderSize - kPageSlotSize - slot.length;
        }
    }
    stats.fragmentation =
        static_cast<double>(stats.free_bytes) / static_cast<double>(stats.total_bytes);
    stats.one_record_per_page_fragmentation =
        static_cast<double>(one_rpp_free) /
        (static_cast<double>(records) * reader.page_size());
    stats.mean_records_per_page =
        static_cast<double>(records) / static_cast<double>(reader.page_count());
    return stats;
}

}  // namespace gannet
