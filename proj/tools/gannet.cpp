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

// Command line front end: build an index from an fvecs file, run queries,
// sweep benchmark configurations, or dump layout statistics.
//
// Exit codes: 0 success, 2 usage, 3 I/O failure, 4 corrupt or mismatched
// index file.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gannet/dataset.hpp"
#include "gannet/distance.hpp"
#include "gannet/engine.hpp"
#include "gannet/error.hpp"
#include "gannet/graph.hpp"
#include "gannet/index_file.hpp"
#include "gannet/placement.hpp"
#include "gannet/quantizer.hpp"
#include "gannet/varint.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitCorrupt = 4;

int exit_code_for(const gannet::Error& e) {
    switch (e.code()) {
        case gannet::ErrorCode::invalid_argument:
            return kExitUsage;
        case gannet::ErrorCode::io_error:
            return kExitIo;
        case gannet::ErrorCode::corrupt_data:
        case gannet::ErrorCode::version_mismatch:
            return kExitCorrupt;
        default:
            return 1;
    }
}

// --io-backend accepts "real", "sim", or "sim:<latency-microseconds>".
void apply_backend(const std::string& raw, gannet::EngineOptions& opts) {
    if (raw == "real") {
        opts.backend = gannet::EngineOptions::Backend::real;
        return;
    }
    if (raw == "sim") {
        opts.backend = gannet::EngineOptions::Backend::sim;
        return;
    }
    if (raw.rfind("sim:", 0) == 0) {
        int us = 0;
        try {
            us = std::stoi(raw.substr(4));
        } catch (const std::exception&) {
            us = -1;
        }
        if (us < 0) {
            gannet::throw_invalid_argument("--io-backend: bad latency in '" + raw + "'");
        }
        opts.backend = gannet::EngineOptions::Backend::sim;
        opts.sim_latency = std::chrono::microseconds(us);
        return;
    }
    gannet::throw_invalid_argument("--io-backend must be 'real' or 'sim:<microseconds>'");
}

struct BuildArgs {
    std::string data;
    std::string out;
    std::string params_file;
    uint32_t degree = 32;
    uint32_t build_list = 64;
    double alpha = 1.2;
    double tau_percentile = 5.0;
    uint32_t k_affine = 8;
    uint32_t clusters = 16;
    uint32_t page_size = 4096;
    uint64_t seed = 42;
};

// JSON values fill in whatever the command line left at its default.
void merge_params_file(const CLI::App& cmd, BuildArgs& a) {
    std::ifstream in(a.params_file);
    if (!in) {
        gannet::throw_io_error("cannot open params file: " + a.params_file);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        gannet::throw_invalid_argument(std::string("params file: ") + e.what());
    }
    auto overridable = [&](const char* flag) { return cmd.get_option(flag)->count() == 0; };
    if (j.contains("degree") && overridable("--degree")) {
        a.degree = j["degree"].get<uint32_t>();
    }
    if (j.contains("build_list") && overridable("--build-list")) {
        a.build_list = j["build_list"].get<uint32_t>();
    }
    if (j.contains("prune_alpha") && overridable("--alpha")) {
        a.alpha = j["prune_alpha"].get<double>();
    }
    if (j.contains("tau_percentile") && overridable("--tau-percentile")) {
        a.tau_percentile = j["tau_percentile"].get<double>();
    }
    if (j.contains("k_affine") && overridable("--k-affine")) {
        a.k_affine = j["k_affine"].get<uint32_t>();
    }
    if (j.contains("clusters") && overridable("--clusters")) {
        a.clusters = j["clusters"].get<uint32_t>();
    }
    if (j.contains("page_size") && overridable("--page-size")) {
        a.page_size = j["page_size"].get<uint32_t>();
    }
    if (j.contains("seed") && overridable("--seed")) {
        a.seed = j["seed"].get<uint64_t>();
    }
}

int run_build(const CLI::App& cmd, BuildArgs a) {
    if (!a.params_file.empty()) {
        merge_params_file(cmd, a);
    }
    gannet::Dataset ds = gannet::read_fvecs(a.data);

    gannet::TrainOptions topts;
    topts.num_clusters = a.clusters;
    topts.seed = a.seed;
    topts.tau_percentile = a.tau_percentile;
    gannet::ScalarQuantizer model = gannet::ScalarQuantizer::train(ds, topts);

    gannet::BuildParams bp;
    bp.candidate_list_size = a.build_list;
    bp.degree_bound = a.degree;
    bp.prune_alpha = static_cast<float>(a.alpha);
    bp.tau = model.tau();
    bp.k_affine = a.k_affine;
    bp.rng_seed = a.seed;
    auto [graph, affinity] = gannet::build_graph(ds, bp);

    std::vector<uint32_t> sizes(ds.size());
    for (uint32_t vid = 0; vid < ds.size(); ++vid) {
        auto enc = gannet::compress_adjacency(graph.adjacency[vid]);
        sizes[vid] = static_cast<uint32_t>(model.extended_code_size() + enc.size());
    }
    auto plan = gannet::plan_placement(affinity, sizes, a.page_size);
    gannet::write_index(a.out, ds, model, graph, plan, a.page_size);

    auto reader = gannet::open_index(a.out);
    auto stats = gannet::compute_layout_stats(*reader);
    size_t affine_total = 0;
    for (const auto& set : affinity) {
        affine_total += set.size();
    }
    const double mean_affine = ds.size() > 0 ? static_cast<double>(affine_total) / ds.size() : 0.0;
    const auto disk_bytes = std::filesystem::file_size(a.out);

    std::printf("vectors            %u\n", ds.size());
    std::printf("dim                %u\n", ds.dim());
    std::printf("degree_bound       %u\n", a.degree);
    std::printf("tau                %.6f\n", static_cast<double>(model.tau()));
    std::printf("mean_affinity_set  %.3f\n", mean_affine);
    std::printf("pages              %u\n", stats.page_count);
    std::printf("fragmentation      %.4f\n", stats.fragmentation);
    std::printf("one_per_page_frag  %.4f\n", stats.one_record_per_page_fragmentation);
    std::printf("disk_bytes         %llu\n", static_cast<unsigned long long>(disk_bytes));
    return 0;
}

struct QueryArgs {
    std::string index;
    std::string queries;
    std::string out;
    uint32_t k = 10;
    uint32_t L = 64;
    uint32_t beam = 0;
    uint32_t prefetch = 0;
    uint32_t workers = 1;
    uint32_t batch = 1;
    double buffer_ratio = 0.2;
    std::string backend = "real";
};

int run_query(const QueryArgs& a) {
    gannet::EngineOptions eo;
    eo.buffer_ratio = a.buffer_ratio;
    eo.workers = a.workers;
    eo.batch_size = a.batch;
    apply_backend(a.backend, eo);
    gannet::Engine engine(a.index, eo);

    gannet::Dataset queries = gannet::read_fvecs(a.queries);
    gannet::SearchParams sp;
    sp.k = a.k;
    sp.L = a.L;
    sp.beam_width = a.beam;
    sp.prefetch_depth = a.prefetch;

    const auto t0 = std::chrono::steady_clock::now();
    auto outcomes = engine.run(queries, sp);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream out(a.out);
    if (!out) {
        gannet::throw_io_error("cannot open results file: " + a.out);
    }
    uint64_t total_ios = 0;
    for (const auto& o : outcomes) {
        if (o.failed) {
            std::cerr << "query failed: " << o.error << "\n";
            return kExitIo;
        }
        for (size_t i = 0; i < o.result.ids.size(); ++i) {
            out << (i > 0 ? " " : "") << o.result.ids[i];
        }
        char buf[32];
        for (float d : o.result.distances) {
            std::snprintf(buf, sizeof(buf), " %.9g", static_cast<double>(d));
            out << buf;
        }
        out << "\n";
        total_ios += o.metrics.ios;
    }
    out.flush();
    if (!out) {
        gannet::throw_io_error("writing results file failed: " + a.out);
    }

    const double n = queries.size();
    std::printf("queries   %u\n", queries.size());
    std::printf("wall_ms   %.3f\n", wall_s * 1e3);
    std::printf("qps       %.1f\n", n > 0 ? n / wall_s : 0.0);
    std::printf("mean_ios  %.2f\n", n > 0 ? static_cast<double>(total_ios) / n : 0.0);
    return 0;
}

struct BenchArgs {
    std::string index;
    std::string queries;
    std::string truth;
    std::string out;  // empty writes to stdout
    uint32_t k = 10;
    std::vector<uint32_t> lists{64};
    uint32_t batch = 2;
    uint32_t beam = 4;
    uint32_t prefetch = 4;
    uint32_t workers = 1;
    double buffer_ratio = 0.2;
    double baseline_ratio = 0.05;
    std::string backend = "sim:100";
    std::vector<uint32_t> batch_sweep;
    std::vector<uint32_t> beam_sweep;
};

struct StageConfig {
    std::string name;
    uint32_t batch;
    uint32_t beam;
    uint32_t prefetch;
    double ratio;
    bool co_fetch;
};

struct BenchRow {
    std::string stage;
    uint32_t L;
    const StageConfig* cfg;
    double recall;
    double qps;
    double mean_ms;
    double median_ms;
    double p99_ms;
    double mean_ios;
    double hit_rate;
};

double percentile_ms(std::vector<uint64_t>& ns_sorted, double p) {
    if (ns_sorted.empty()) {
        return 0.0;
    }
    const size_t m = ns_sorted.size();
    auto idx = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(m)));
    idx = std::clamp<size_t>(idx, 1, m) - 1;
    return static_cast<double>(ns_sorted[idx]) / 1e6;
}

BenchRow run_bench_row(const BenchArgs& a, const StageConfig& stage, uint32_t L,
                       const gannet::Dataset& queries,
                       const std::vector<std::vector<uint32_t>>& truth) {
    gannet::EngineOptions eo;
    eo.buffer_ratio = stage.ratio;
    eo.co_fetch = stage.co_fetch;
    eo.workers = a.workers;
    eo.batch_size = stage.batch;
    apply_backend(a.backend, eo);
    gannet::Engine engine(a.index, eo);

    gannet::SearchParams sp;
    sp.k = a.k;
    sp.L = L;
    sp.beam_width = stage.beam;
    sp.prefetch_depth = stage.prefetch;

    const auto t0 = std::chrono::steady_clock::now();
    auto outcomes = engine.run(queries, sp);
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    double recall_sum = 0.0;
    uint64_t ios = 0;
    uint64_t hits = 0;
    uint64_t misses = 0;
    std::vector<uint64_t> latencies;
    latencies.reserve(outcomes.size());
    for (uint32_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        if (o.failed) {
            throw gannet::Error(gannet::ErrorCode::io_error, "bench query failed: " + o.error);
        }
        if (truth[i].size() < a.k) {
            gannet::throw_invalid_argument("ground truth has fewer than k neighbors");
        }
        recall_sum += gannet::recall_at_k(o.result.ids, truth[i], a.k);
        ios += o.metrics.ios;
        hits += o.metrics.hits;
        misses += o.metrics.misses;
        latencies.push_back(o.metrics.latency_ns);
    }
    std::sort(latencies.begin(), latencies.end());

    BenchRow row;
    row.stage = stage.name;
    row.L = L;
    row.cfg = &stage;
    const double n = static_cast<double>(outcomes.size());
    row.recall = n > 0 ? recall_sum / n : 0.0;
    row.qps = wall_s > 0 ? n / wall_s : 0.0;
    row.mean_ms = n > 0
                      ? static_cast<double>(std::accumulate(latencies.begin(), latencies.end(),
                                                            uint64_t{0})) /
                            n / 1e6
                      : 0.0;
    row.median_ms = percentile_ms(latencies, 50.0);
    row.p99_ms = percentile_ms(latencies, 99.0);
    row.mean_ios = n > 0 ? static_cast<double>(ios) / n : 0.0;
    row.hit_rate = (hits + misses) > 0 ? static_cast<double>(hits) / (hits + misses) : 0.0;
    return row;
}

int run_bench(const BenchArgs& a) {
    gannet::Dataset queries = gannet::read_fvecs(a.queries);
    auto truth = gannet::read_ivecs(a.truth);
    if (truth.size() != queries.size()) {
        gannet::throw_invalid_argument("ground truth row count does not match queries");
    }

    std::vector<StageConfig> stages{
        {"baseline", 1, 0, 0, a.baseline_ratio, false},
        {"+async", a.batch, 0, 0, a.baseline_ratio, false},
        {"+record_pool", a.batch, 0, 0, a.buffer_ratio, true},
        {"+prefetch", a.batch, 0, a.prefetch, a.buffer_ratio, true},
        {"+cache_aware", a.batch, a.beam, a.prefetch, a.buffer_ratio, true},
    };
    for (uint32_t b : a.batch_sweep) {
        stages.push_back({"batch=" + std::to_string(b), b, 0, 0, a.buffer_ratio, true});
    }
    for (uint32_t w : a.beam_sweep) {
        stages.push_back({"beam=" + std::to_string(w), a.batch, w, 0, a.buffer_ratio, true});
    }

    // Fragmentation depends only on the index file, not the stage.
    double fragmentation = 0.0;
    {
        auto reader = gannet::open_index(a.index);
        fragmentation = gannet::compute_layout_stats(*reader).fragmentation;
    }

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) {
            gannet::throw_io_error("cannot open report file: " + a.out);
        }
        out = &file;
    }

    char line[512];
    std::snprintf(line, sizeof(line),
                  "stage,L,batch,beam,prefetch,workers,queries,recall_at_%u,qps,mean_latency_ms,"
                  "median_latency_ms,p99_latency_ms,mean_ios,hit_rate,fragmentation\n",
                  a.k);
    *out << line;
    for (const auto& stage : stages) {
        for (uint32_t L : a.lists) {
            BenchRow row = run_bench_row(a, stage, L, queries, truth);
            std::snprintf(line, sizeof(line),
                          "%s,%u,%u,%u,%u,%u,%u,%.4f,%.1f,%.3f,%.3f,%.3f,%.2f,%.4f,%.4f\n",
                          row.stage.c_str(), row.L, stage.batch, stage.beam, stage.prefetch,
                          a.workers, queries.size(), row.recall, row.qps, row.mean_ms,
                          row.median_ms, row.p99_ms, row.mean_ios, row.hit_rate, fragmentation);
            *out << line;
            out->flush();
        }
    }
    if (!*out) {
        gannet::throw_io_error("writing bench report failed");
    }
    return 0;
}

int run_stats(const std::string& index_path) {
    auto reader = gannet::open_index(index_path);
    auto stats = gannet::compute_layout_stats(*reader);
    std::printf("vectors                 %u\n", reader->n());
    std::printf("dim                     %u\n", reader->dim());
    std::printf("entry_point             %u\n", reader->entry_point());
    std::printf("max_degree              %u\n", reader->max_degree());
    std::printf("page_size               %u\n", reader->page_size());
    std::printf("page_count              %u\n", stats.page_count);
    std::printf("tau                     %.6f\n", static_cast<double>(reader->quantizer().tau()));
    std::printf("mean_records_per_page   %.2f\n", stats.mean_records_per_page);
    std::printf("colored_records         %llu\n",
                static_cast<unsigned long long>(stats.colored_records));
    std::printf("fragmentation           %.4f\n", stats.fragmentation);
    std::printf("one_per_page_frag       %.4f\n", stats.one_record_per_page_fragmentation);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gannet: disk-resident graph search over compressed vectors"};
    app.require_subcommand(1);

    BuildArgs build_args;
    CLI::App* build = app.add_subcommand("build", "Build an index from an fvecs dataset");
    build->add_option("--data", build_args.data, "input vectors (fvecs)")->required();
    build->add_option("--out", build_args.out, "output index path")->required();
    build->add_option("--params", build_args.params_file, "JSON file with build parameters");
    build->add_option("--degree", build_args.degree, "max out-degree R");
    build->add_option("--build-list", build_args.build_list, "construction candidate list size");
    build->add_option("--alpha", build_args.alpha, "pruning slack factor");
    build->add_option("--tau-percentile", build_args.tau_percentile,
                      "affinity threshold percentile; <= 0 disables co-placement");
    build->add_option("--k-affine", build_args.k_affine, "max affinity set size per vertex");
    build->add_option("--clusters", build_args.clusters, "k-means clusters for calibration");
    build->add_option("--page-size", build_args.page_size, "index page size in bytes");
    build->add_option("--seed", build_args.seed, "build RNG seed");

    QueryArgs query_args;
    CLI::App* query = app.add_subcommand("query", "Answer queries from an fvecs file");
    query->add_option("--index", query_args.index, "index path")->required();
    query->add_option("--queries", query_args.queries, "query vectors (fvecs)")->required();
    query->add_option("--out", query_args.out, "results file (ids then distances per line)")
        ->required();
    query->add_option("--k", query_args.k, "neighbors per query");
    query->add_option("--search-list", query_args.L, "candidate list size L");
    query->add_option("--beam", query_args.beam, "pivot look-ahead width W");
    query->add_option("--prefetch", query_args.prefetch, "stride prefetch depth N");
    query->add_option("--workers", query_args.workers, "worker threads");
    query->add_option("--batch", query_args.batch, "concurrent tasks per worker");
    query->add_option("--buffer-ratio", query_args.buffer_ratio, "pool capacity as fraction of n");
    query->add_option("--io-backend", query_args.backend, "'real' or 'sim:<microseconds>'");

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "Run the ablation ladder and emit CSV");
    bench->add_option("--index", bench_args.index, "index path")->required();
    bench->add_option("--queries", bench_args.queries, "query vectors (fvecs)")->required();
    bench->add_option("--truth", bench_args.truth, "ground truth (ivecs)")->required();
    bench->add_option("--out", bench_args.out, "CSV path (default stdout)");
    bench->add_option("--k", bench_args.k, "neighbors per query");
    bench->add_option("--search-list", bench_args.lists, "candidate list sizes to sweep");
    bench->add_option("--batch", bench_args.batch, "tasks per worker for async stages");
    bench->add_option("--beam", bench_args.beam, "look-ahead width for the final stage");
    bench->add_option("--prefetch", bench_args.prefetch, "prefetch depth for the later stages");
    bench->add_option("--workers", bench_args.workers, "worker threads");
    bench->add_option("--buffer-ratio", bench_args.buffer_ratio, "pool fraction for pool stages");
    bench->add_option("--baseline-ratio", bench_args.baseline_ratio,
                      "pool fraction for the baseline stages");
    bench->add_option("--io-backend", bench_args.backend, "'real' or 'sim:<microseconds>'");
    bench->add_option("--sweep-batch", bench_args.batch_sweep, "extra rows sweeping batch size");
    bench->add_option("--sweep-beam", bench_args.beam_sweep, "extra rows sweeping beam width");

    std::string stats_index;
    CLI::App* stats = app.add_subcommand("stats", "Print index layout statistics");
    stats->add_option("--index", stats_index, "index path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (build->parsed()) {
            return run_build(*build, build_args);
        }
        if (query->parsed()) {
            return run_query(query_args);
        }
        if (bench->parsed()) {
            return run_bench(bench_args);
        }
        if (stats->parsed()) {
            return run_stats(stats_index);
        }
    } catch (const gannet::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
