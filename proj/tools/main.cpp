#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "overlap/config.hpp"
#include "overlap/oracle.hpp"

namespace fs = std::filesystem;
using namespace overlap;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string strategies;
    uint64_t seed = 0;
    bool seed_set = false;
};

RunConfig load_config(const CommonArgs& args) {
    if (args.config_path.empty()) throw ConfigError("--config PATH is required");
    RunConfig c = parse_run_config_file(args.config_path);
    if (args.seed_set) c.seed = args.seed;
    if (!args.out_dir.empty()) c.out_dir = args.out_dir;
    if (!args.strategies.empty()) {
        c.strategies.clear();
        std::stringstream ss(args.strategies);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) c.strategies.push_back(strategy_from_string(item));
        if (c.strategies.empty()) throw ConfigError("--strategies parsed to an empty list");
    }
    c.validate();
    return c;
}

void write_run_meta(const RunConfig& c, const std::string& command) {
    fs::create_directories(c.out_dir);
    std::ofstream out(fs::path(c.out_dir) / ("meta_" + command + ".json"));
    out << "{\"command\":\"" << command << "\",\"seed\":" << c.seed << ",\"config\":"
        << serialize_run_config(c) << "}\n";
}

std::vector<Matrix> run_strategy(Strategy s, const RunConfig& c, const ProblemSpec& p,
                                 ShardedWorkspace& ws) {
    switch (s) {
        case Strategy::Coarse:
            return run_nonoverlap(p, ws, c.tile);
        case Strategy::Medium:
            return run_medium_grained(p, ws, c.tile,
                                      c.medium_partitions > 0 ? c.medium_partitions : p.tp)
                .outputs;
        case Strategy::Fine:
            break;
    }
    EngineOptions opts;
    if (p.pattern == Pattern::AllGatherGemm) {
        const int rpct = c.rows_per_comm_tile > 0 ? c.rows_per_comm_tile : p.rows_per_rank();
        auto comm = make_comm_specs(p, c.machine.topology, rpct, c.transfer);
        return run_fused_allgather_gemm(p, ws, c.tile, comm, c.transfer,
                                        c.swizzle != SwizzleKind::Naive, opts)
            .outputs;
    }
    return run_fused_gemm_reducescatter(p, ws, c.tile, c.write, c.swizzle != SwizzleKind::Naive,
                                        opts)
        .outputs;
}

int cmd_verify(const RunConfig& c) {
    write_run_meta(c, "verify");
    ShardedWorkspace ws = ShardedWorkspace::make_random(c.problem, c.seed);
    const std::vector<Matrix> oracle = dense_oracle(c.problem, ws);
    bool ok = true;
    std::ofstream report(fs::path(c.out_dir) / "verify.csv");
    report << "strategy,pattern,m,n,k,tp,seed,max_rel_error,pass\n";
    for (Strategy s : c.strategies) {
        std::vector<Matrix> outs = run_strategy(s, c, c.problem, ws);
        double err = 0;
        for (int r = 0; r < c.problem.tp; ++r)
            err = std::max(err, max_rel_error(outs[r], oracle[r]));
        const bool pass = err <= 1e-8;
        ok = ok && pass;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.3e", err);
        report << to_string(s) << "," << to_string(c.problem.pattern) << "," << c.problem.m << ","
               << c.problem.n << "," << c.problem.k << "," << c.problem.tp << "," << c.seed << ","
               << buf << "," << (pass ? 1 : 0) << "\n";
        std::cout << to_string(s) << ": max rel error " << buf << (pass ? " (pass)" : " (FAIL)")
                  << "\n";
    }
    return ok ? 0 : 1;
}

int cmd_sweep(const RunConfig& c) {
    write_run_meta(c, "sweep");
    std::vector<int> ms = c.sweep_m.empty() ? std::vector<int>{c.problem.m} : c.sweep_m;
    std::ofstream out(fs::path(c.out_dir) / "sweep.csv");
    out << metrics_csv_header() << "\n";
    SimOptions opts;
    opts.medium_partitions = c.medium_partitions;
    opts.write_mode = c.write;
    for (int m : ms) {
        ProblemSpec p = c.problem;
        p.m = m;
        const Timeline baseline = simulate(Strategy::Coarse, p, c.tile, c.machine, c.swizzle,
                                           c.rows_per_comm_tile, c.transfer, opts);
        for (Strategy s : c.strategies) {
            const Timeline tl = s == Strategy::Coarse
                                    ? baseline
                                    : simulate(s, p, c.tile, c.machine, c.swizzle,
                                               c.rows_per_comm_tile, c.transfer, opts);
            const Metrics mt = metrics(tl, baseline, p, c.tile, c.machine);
            out << metrics_csv_row(to_string(s), p, mt) << "\n";
        }
    }
    std::cout << "wrote " << (fs::path(c.out_dir) / "sweep.csv").string() << "\n";
    return 0;
}

int cmd_bench(const RunConfig& c) {
    write_run_meta(c, "bench");
    ShardedWorkspace ws = ShardedWorkspace::make_random(c.problem, c.seed);
    std::ofstream out(fs::path(c.out_dir) / "bench.csv");
    out << "path,seed";
    for (int i = 1; i <= c.bench_repetitions; ++i) out << ",rep" << i << "_us";
    out << ",median_us,dispersion\n";
    auto timed = [&](const char* name, auto&& fn) {
        for (int i = 0; i < c.bench_warmup; ++i) fn();
        std::vector<double> us;
        for (int i = 0; i < c.bench_repetitions; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            fn();
            const auto t1 = std::chrono::steady_clock::now();
            us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        }
        std::vector<double> sorted = us;
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted[sorted.size() / 2];
        const double disp = median > 0 ? (sorted.back() - sorted.front()) / median : 0;
        out << name << "," << c.seed;
        char buf[64];
        for (double v : us) {
            std::snprintf(buf, sizeof(buf), ",%.3f", v);
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), ",%.3f,%.4f\n", median, disp);
        out << buf;
        std::cout << name << " median " << median << " us (dispersion " << disp << ")\n";
        return median;
    };
    const double fused = timed("fused", [&] { run_strategy(Strategy::Fine, c, c.problem, ws); });
    const double base =
        timed("nonoverlap", [&] { run_strategy(Strategy::Coarse, c, c.problem, ws); });
    std::cout << "fused/nonoverlap ratio: " << (base > 0 ? fused / base : 0) << "\n";
    return 0;
}

int cmd_tune(const RunConfig& c) {
    write_run_meta(c, "tune");
    ShardedWorkspace ws = ShardedWorkspace::make_random(c.problem, c.seed);
    const KnobSpace knobs = c.knobs_given ? c.knobs : default_knob_space(c.problem);
    std::string cache = c.cache_file;
    if (!cache.empty() && fs::path(cache).is_relative())
        cache = (fs::path(c.out_dir) / cache).string();
    TuneResult res =
        tune(c.problem, ws, c.machine, knobs, c.objective, c.tune_repetitions, cache);
    write_tune_csv((fs::path(c.out_dir) / "tune.csv").string(), res);
    write_tune_json((fs::path(c.out_dir) / "tune.json").string(), res);
    std::cout << "best config: " << res.best_config.encode() << " (" << res.objective_us
              << " us)" << (res.from_cache ? " [from cache]" : "") << "\n";
    return 0;
}

int cmd_report(const RunConfig& c, const std::string& in_dir) {
    const fs::path dir = in_dir.empty() ? fs::path(c.out_dir) : fs::path(in_dir);
    const fs::path sweep = dir / "sweep.csv";
    if (!fs::exists(sweep))
        throw ConfigError("report input missing: expected " + sweep.string() +
                          " (run the sweep command first)");
    // Group sweep rows per pattern into comparison tables.
    std::ifstream in(sweep);
    std::string line;
    std::getline(in, line);
    if (line != metrics_csv_header())
        throw ConfigError("unexpected sweep.csv header in " + sweep.string());
    std::map<std::string, std::vector<std::string>> by_pattern;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string strategy, pattern;
        std::getline(ss, strategy, ',');
        std::getline(ss, pattern, ',');
        by_pattern[pattern].push_back(line);
    }
    std::ofstream rpt(dir / "report.txt");
    for (const auto& [pattern, rows] : by_pattern) {
        rpt << "== " << pattern << " ==\n" << metrics_csv_header() << "\n";
        for (const std::string& r : rows) rpt << r << "\n";
        rpt << "\n";
    }
    // Chrome traces for visual inspection of each configured strategy.
    SimOptions opts;
    opts.medium_partitions = c.medium_partitions;
    opts.write_mode = c.write;
    for (Strategy s : c.strategies) {
        const Timeline tl = simulate(s, c.problem, c.tile, c.machine, c.swizzle,
                                     c.rows_per_comm_tile, c.transfer, opts);
        write_chrome_trace((dir / ("trace_" + to_string(s) + ".json")).string(), tl);
        write_timeline_jsonl((dir / ("timeline_" + to_string(s) + ".jsonl")).string(), tl);
    }
    std::cout << "wrote " << (dir / "report.txt").string() << " and per-strategy traces\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tile-granular communication/computation overlap toolkit"};
    app.require_subcommand(1);
    CommonArgs args;
    std::string report_in;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "run config JSON path");
        sub->add_option("--out", args.out_dir, "output directory override");
        sub->add_option("--seed", args.seed, "seed override")
            ->each([&](const std::string&) { args.seed_set = true; });
        sub->add_option("--strategies", args.strategies, "comma-separated strategy list");
    };
    CLI::App* verify = app.add_subcommand("verify", "check strategies against the dense oracle");
    CLI::App* sweep = app.add_subcommand("sweep", "simulate metrics across m values");
    CLI::App* bench = app.add_subcommand("bench", "wall-clock engine benchmark");
    CLI::App* tunec = app.add_subcommand("tune", "grid autotune over the knob space");
    CLI::App* report = app.add_subcommand("report", "aggregate CSVs and emit traces");
    for (CLI::App* s : {verify, sweep, bench, tunec, report}) add_common(s);
    report->add_option("--in", report_in, "directory holding sweep/bench/tune CSVs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const RunConfig c = load_config(args);
        if (verify->parsed()) return cmd_verify(c);
        if (sweep->parsed()) return cmd_sweep(c);
        if (bench->parsed()) return cmd_bench(c);
        if (tunec->parsed()) return cmd_tune(c);
        if (report->parsed()) return cmd_report(c, report_in);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
