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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "gannet/error.hpp"
#include "gannet/index_file.hpp"
#include "gannet/varint.hpp"
#include "support/synthetic.hpp"

using namespace gannet;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("gannet_index_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

struct BuiltIndex {
    Dataset base;
    ScalarQuantizer model;
    Graph graph;
    PlacementPlan plan;

    BuiltIndex()
        : base(testsupport::make_clustered(
                   {.n = 300, .dim = 16, .clusters = 30, .seed = 41}, 0)
                   .base),
          model(ScalarQuantizer::train(base, {.num_clusters = 8})) {
        BuildParams params;
        params.candidate_list_size = 32;
        params.degree_bound = 16;
        params.tau = model.tau();
        auto built = build_graph(base, params);
        graph = std::move(built.first);
        std::vector<uint32_t> sizes(base.size());
        for (uint32_t vid = 0; vid < base.size(); ++vid) {
            sizes[vid] = static_cast<uint32_t>(
                model.extended_code_size() +
                compress_adjacency(graph.adjacency[vid]).size());
        }
        plan = plan_placement(built.second, sizes, 1024);
    }
};

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("write and reopen round-trips every field and record") {
    TempDir dir;
    BuiltIndex b;
    const auto path = dir.file("round.idx");
    write_index(path, b.base, b.model, b.graph, b.plan, 1024);

    auto reader = open_index(path);
    CHECK(reader->dim() == 16);
    CHECK(reader->n() == b.base.size());
    CHECK(reader->entry_point() == b.graph.entry_point);
    CHECK(reader->page_size() == 1024);
    CHECK(reader->page_count() == b.plan.pages.size());
    // The header records the max observed out-degree, capped by the bound.
    CHECK(reader->max_degree() <= 16);
    CHECK(reader->max_degree() >= 1);
    CHECK(reader->quantizer() == b.model);

    // Binary codes match a fresh encode of each vector.
    std::vector<uint8_t> code(b.model.binary_code_size());
    for (uint32_t vid = 0; vid < b.base.size(); ++vid) {
        b.model.encode_binary(b.base[vid], code.data());
        CHECK(std::equal(code.begin(), code.end(), reader->binary_code(vid)));
    }

    // The directory agrees with the plan, and each page holds exactly the
    // planned records: 4-bit code then compressed adjacency.
    std::vector<uint8_t> page_buf(reader->page_size());
    std::vector<uint8_t> ext(b.model.extended_code_size());
    for (uint32_t pi = 0; pi < b.plan.pages.size(); ++pi) {
        reader->read_page(pi, page_buf);
        PageView view{std::span<const uint8_t>(page_buf)};
        CHECK(view.count() == b.plan.pages[pi].size());
        for (const auto& a : b.plan.pages[pi]) {
            CHECK(reader->page_of(a.vid) == pi);
            auto slot = view.find(a.vid);
            REQUIRE(slot.has_value());
            CHECK(slot->color == a.color);
            auto rec = view.record(*slot);
            b.model.encode_extended(b.base[a.vid], ext.data());
            REQUIRE(rec.size() >= ext.size());
            CHECK(std::equal(ext.begin(), ext.end(), rec.begin()));
            CHECK(decompress_adjacency(rec.subspan(ext.size())) ==
                  b.graph.adjacency[a.vid]);
        }
    }
}

TEST_CASE("two writes of the same inputs produce identical bytes") {
    TempDir dir;
    BuiltIndex b;
    write_index(dir.file("a.idx"), b.base, b.model, b.graph, b.plan, 1024);
    write_index(dir.file("b.idx"), b.base, b.model, b.graph, b.plan, 1024);
    CHECK(slurp(dir.file("a.idx")) == slurp(dir.file("b.idx")));
}

TEST_CASE("open errors are distinct by failure kind") {
    TempDir dir;
    BuiltIndex b;
    const auto path = dir.file("victim.idx");
    write_index(path, b.base, b.model, b.graph, b.plan, 1024);
    auto pristine = slurp(path);

    SUBCASE("missing file is io_error") {
        try {
            open_index(dir.file("nope.idx"));
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::io_error);
        }
    }
    SUBCASE("bad magic is corrupt_data") {
        auto bytes = pristine;
        bytes[0] ^= 0xFF;
        spit(path, bytes);
        try {
            open_index(path);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::corrupt_data);
        }
    }
    SUBCASE("wrong version is version_mismatch") {
        auto bytes = pristine;
        bytes[8] = 99;  // version u32 little-endian, low byte first
        spit(path, bytes);
        try {
            open_index(path);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::version_mismatch);
        }
    }
    SUBCASE("truncated file is corrupt_data") {
        auto bytes = pristine;
        bytes.resize(bytes.size() - 700);
        spit(path, bytes);
        try {
            open_index(path);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::corrupt_data);
        }
    }
    SUBCASE("truncated header is corrupt_data") {
        auto bytes = pristine;
        bytes.resize(20);
        spit(path, bytes);
        try {
            open_index(path);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::corrupt_data);
        }
    }
}

TEST_CASE("writing rejects inconsistent inputs") {
    TempDir dir;
    BuiltIndex b;

    SUBCASE("empty graph") {
        Graph empty;
        CHECK_THROWS_AS(
            write_index(dir.file("x.idx"), b.base, b.model, empty, b.plan, 1024), Error);
    }
    SUBCASE("plan missing records") {
        PlacementPlan partial = b.plan;
        partial.pages.pop_back();
        CHECK_THROWS_AS(
            write_index(dir.file("x.idx"), b.base, b.model, b.graph, partial, 1024), Error);
    }
    SUBCASE("dimension mismatch between data and model") {
        auto other = testsupport::make_uniform(300, 8, 3, 1.0);
        CHECK_THROWS_AS(
            write_index(dir.file("x.idx"), other, b.model, b.graph, b.plan, 1024), Error);
    }
}

TEST_CASE("layout stats add up against a hand count") {
    TempDir dir;
    BuiltIndex b;
    const auto path = dir.file("stats.idx");
    write_index(path, b.base, b.model, b.graph, b.plan, 1024);
    auto reader = open_index(path);
    LayoutStats stats = compute_layout_stats(*reader);

    CHECK(stats.page_count == reader->page_count());
    CHECK(stats.total_bytes == static_cast<uint64_t>(reader->page_count()) * 1024);

    uint64_t free_bytes = 0;
    uint64_t colored = 0;
    uint64_t records = 0;
    uint64_t solo_free = 0;  // waste if each record sat alone on its own page
    std::vector<uint8_t> buf(reader->page_size());
    for (uint32_t pi = 0; pi < reader->page_count(); ++pi) {
        reader->read_page(pi, buf);
        PageView v{std::span<const uint8_t>(buf)};
        free_bytes += v.free_space();
        records += v.count();
        for (uint32_t i = 0; i < v.count(); ++i) {
            PageSlot s = v.slot(i);
            colored += s.color != 0 ? 1 : 0;
            solo_free += reader->page_size() - kPageHeaderSize - kPageSlotSize - s.length;
        }
    }
    CHECK(stats.free_bytes == free_bytes);
    CHECK(stats.fragmentation ==
          doctest::Approx(static_cast<double>(free_bytes) /
                          static_cast<double>(stats.total_bytes)));
    CHECK(stats.colored_records == colored);
    CHECK(stats.mean_records_per_page ==
          doctest::Approx(static_cast<double>(records) /
                          static_cast<double>(reader->page_count())));
    CHECK(stats.one_record_per_page_fragmentation ==
          doctest::Approx(static_cast<double>(solo_free) /
                          static_cast<double>(records * reader->page_size())));
    CHECK(stats.one_record_per_page_fragmentation > stats.fragmentation);
}
