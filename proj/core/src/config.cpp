#include "overlap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace overlap {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& ctx, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("'" + ctx + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in '" + ctx + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

TileShape parse_tile(const json& j, const std::string& ctx) {
    check_keys(j, ctx, {"tm", "tn"});
    TileShape t;
    t.tm = get_or<int>(j, "tm", 0);
    t.tn = get_or<int>(j, "tn", 0);
    if (t.tm <= 0 || t.tn <= 0) throw ConfigError("'" + ctx + "' needs positive tm and tn");
    return t;
}

ProblemSpec parse_problem(const json& j) {
    check_keys(j, "problem", {"m", "n", "k", "tp", "pattern"});
    ProblemSpec p;
    p.m = get_or<int>(j, "m", 0);
    p.n = get_or<int>(j, "n", 0);
    p.k = get_or<int>(j, "k", 0);
    p.tp = get_or<int>(j, "tp", 1);
    p.pattern = pattern_from_string(get_or<std::string>(j, "pattern", "AllGatherGemm"));
    return p;
}

MachineModel parse_machine(const json& j) {
    check_keys(j, "machine",
               {"sm_count", "flops_per_us", "launch_overhead_us", "link_bw_bytes_per_us",
                "link_latency_us", "inter_node_bw_bytes_per_us", "bytes_per_element", "topology",
                "split_efficiency"});
    MachineModel m;
    m.sm_count = get_or<int>(j, "sm_count", m.sm_count);
    m.flops_per_us = get_or<double>(j, "flops_per_us", m.flops_per_us);
    m.launch_overhead_us = get_or<double>(j, "launch_overhead_us", m.launch_overhead_us);
    m.link_bw_bytes_per_us = get_or<double>(j, "link_bw_bytes_per_us", m.link_bw_bytes_per_us);
    m.link_latency_us = get_or<double>(j, "link_latency_us", m.link_latency_us);
    m.inter_node_bw_bytes_per_us =
        get_or<double>(j, "inter_node_bw_bytes_per_us", m.inter_node_bw_bytes_per_us);
    m.bytes_per_element = get_or<int>(j, "bytes_per_element", m.bytes_per_element);
    if (j.contains("topology")) {
        const json& t = j.at("topology");
        check_keys(t, "machine.topology", {"kind", "ranks_per_numa", "ranks_per_node"});
        m.topology.kind = topology_kind_from_string(get_or<std::string>(t, "kind", "NVLinkRing"));
        m.topology.ranks_per_numa = get_or<int>(t, "ranks_per_numa", 0);
        m.topology.ranks_per_node = get_or<int>(t, "ranks_per_node", 0);
    }
    if (j.contains("split_efficiency")) {
        const json& s = j.at("split_efficiency");
        check_keys(s, "machine.split_efficiency", {"exponent", "floor"});
        m.split_eff.exponent = get_or<double>(s, "exponent", m.split_eff.exponent);
        m.split_eff.floor = get_or<double>(s, "floor", m.split_eff.floor);
    }
    return m;
}

KnobSpace parse_knobs(const json& j) {
    check_keys(j, "knobs",
               {"transfer_modes", "swizzle_policies", "write_modes", "gemm_tile_shapes",
                "comm_tile_sizes"});
    KnobSpace ks;
    for (const auto& s : get_or<std::vector<std::string>>(j, "transfer_modes", {}))
        ks.transfer_modes.push_back(transfer_mode_from_string(s));
    for (const auto& s : get_or<std::vector<std::string>>(j, "swizzle_policies", {}))
        ks.swizzle_policies.push_back(swizzle_kind_from_string(s));
    for (const auto& s : get_or<std::vector<std::string>>(j, "write_modes", {}))
        ks.write_modes.push_back(write_mode_from_string(s));
    if (j.contains("gemm_tile_shapes")) {
        if (!j.at("gemm_tile_shapes").is_array())
            throw ConfigError("'knobs.gemm_tile_shapes' must be an array");
        for (const json& t : j.at("gemm_tile_shapes"))
            ks.gemm_tile_shapes.push_back(parse_tile(t, "knobs.gemm_tile_shapes[]"));
    }
    ks.comm_tile_override = get_or<std::vector<int>>(j, "comm_tile_sizes", {});
    return ks;
}

}  // namespace

void RunConfig::validate() const {
    problem.validate();
    machine.validate();
    machine.topology.validate(problem.tp);
    validate_tiling(problem, tile);
    if (strategies.empty()) throw ConfigError("strategy list must not be empty");
    if (rows_per_comm_tile < 0 ||
        (rows_per_comm_tile > 0 && problem.rows_per_rank() % rows_per_comm_tile != 0))
        throw ConfigError("rows_per_comm_tile must divide m/tp");
    if (bench_warmup < 0 || bench_repetitions < 1)
        throw ConfigError("bench warmup must be >= 0 and repetitions >= 1");
    for (int m : sweep_m) {
        ProblemSpec p = problem;
        p.m = m;
        p.validate();
        validate_tiling(p, tile);
    }
}

RunConfig parse_run_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    check_keys(j, "<root>",
               {"problem", "tile", "strategies", "machine", "knobs", "run", "sweep", "bench",
                "tune", "seed", "out_dir"});
    if (!j.contains("problem")) throw ConfigError("config is missing required 'problem' section");

    RunConfig c;
    c.problem = parse_problem(j.at("problem"));
    if (j.contains("tile")) c.tile = parse_tile(j.at("tile"), "tile");
    if (j.contains("strategies")) {
        c.strategies.clear();
        for (const auto& s : get_or<std::vector<std::string>>(j, "strategies", {}))
            c.strategies.push_back(strategy_from_string(s));
    }
    if (j.contains("machine")) c.machine = parse_machine(j.at("machine"));
    if (j.contains("knobs")) {
        c.knobs = parse_knobs(j.at("knobs"));
        c.knobs_given = true;
    }
    if (j.contains("run")) {
        const json& r = j.at("run");
        check_keys(r, "run",
                   {"swizzle", "transfer", "write", "rows_per_comm_tile", "medium_partitions"});
        c.swizzle = swizzle_kind_from_string(get_or<std::string>(r, "swizzle", "RankShifted"));
        c.transfer = transfer_mode_from_string(get_or<std::string>(r, "transfer", "Pull"));
        c.write = write_mode_from_string(get_or<std::string>(r, "write", "FusedReduce"));
        c.rows_per_comm_tile = get_or<int>(r, "rows_per_comm_tile", 0);
        c.medium_partitions = get_or<int>(r, "medium_partitions", 0);
    }
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        check_keys(s, "sweep", {"m_values"});
        c.sweep_m = get_or<std::vector<int>>(s, "m_values", {});
    }
    if (j.contains("bench")) {
        const json& b = j.at("bench");
        check_keys(b, "bench", {"warmup", "repetitions"});
        c.bench_warmup = get_or<int>(b, "warmup", c.bench_warmup);
        c.bench_repetitions = get_or<int>(b, "repetitions", c.bench_repetitions);
    }
    if (j.contains("tune")) {
        const json& t = j.at("tune");
        check_keys(t, "tune", {"objective", "repetitions", "cache_file"});
        c.objective =
            tune_objective_from_string(get_or<std::string>(t, "objective", "SimulatedTime"));
        c.tune_repetitions = get_or<int>(t, "repetitions", c.tune_repetitions);
        c.cache_file = get_or<std::string>(t, "cache_file", "");
    }
    c.seed = get_or<uint64_t>(j, "seed", c.seed);
    c.out_dir = get_or<std::string>(j, "out_dir", c.out_dir);
    c.validate();
    return c;
}

RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config_text(ss.str());
}

std::string serialize_run_config(const RunConfig& c) {
    json j;
    j["problem"] = {{"m", c.problem.m},
                    {"n", c.problem.n},
                    {"k", c.problem.k},
                    {"tp", c.problem.tp},
                    {"pattern", to_string(c.problem.pattern)}};
    j["tile"] = {{"tm", c.tile.tm}, {"tn", c.tile.tn}};
    j["strategies"] = json::array();
    for (Strategy s : c.strategies) j["strategies"].push_back(to_string(s));
    j["machine"] = {{"sm_count", c.machine.sm_count},
                    {"flops_per_us", c.machine.flops_per_us},
                    {"launch_overhead_us", c.machine.launch_overhead_us},
                    {"link_bw_bytes_per_us", c.machine.link_bw_bytes_per_us},
                    {"link_latency_us", c.machine.link_latency_us},
                    {"inter_node_bw_bytes_per_us", c.machine.inter_node_bw_bytes_per_us},
                    {"bytes_per_element", c.machine.bytes_per_element},
                    {"topology",
                     {{"kind", to_string(c.machine.topology.kind)},
                      {"ranks_per_numa", c.machine.topology.ranks_per_numa},
                      {"ranks_per_node", c.machine.topology.ranks_per_node}}},
                    {"split_efficiency",
                     {{"exponent", c.machine.split_eff.exponent},
                      {"floor", c.machine.split_eff.floor}}}};
    if (c.knobs_given) {
        json k;
        k["transfer_modes"] = json::array();
        for (TransferMode m : c.knobs.transfer_modes)
            k["transfer_modes"].push_back(to_string(m));
        k["swizzle_policies"] = json::array();
        for (SwizzleKind s : c.knobs.swizzle_policies)
            k["swizzle_policies"].push_back(to_string(s));
        k["write_modes"] = json::array();
        for (WriteMode w : c.knobs.write_modes) k["write_modes"].push_back(to_string(w));
        k["gemm_tile_shapes"] = json::array();
        for (const TileShape& t : c.knobs.gemm_tile_shapes)
            k["gemm_tile_shapes"].push_back({{"tm", t.tm}, {"tn", t.tn}});
        k["comm_tile_sizes"] = c.knobs.comm_tile_override;
        j["knobs"] = k;
    }
    j["run"] = {{"swizzle", to_string(c.swizzle)},
                {"transfer", to_string(c.transfer)},
                {"write", to_string(c.write)},
                {"rows_per_comm_tile", c.rows_per_comm_tile},
                {"medium_partitions", c.medium_partitions}};
    j["sweep"] = {{"m_values", c.sweep_m}};
    j["bench"] = {{"warmup", c.bench_warmup}, {"repetitions", c.bench_repetitions}};
    j["tune"] = {{"objective", to_string(c.objective)},
                 {"repetitions", c.tune_repetitions},
                 {"cache_file", c.cache_file}};
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    return j.dump(2) + "\n";
}

}  // namespace overlap
