// zkvpn command line: deterministic simulation runs, lookup/zkp benchmarks,
// and attestation bundles over files.
//
//   zkvpn sim run --config cfg.json [--seed N] --out DIR
//   zkvpn bench zkp --iters N --group toy|std256 [--seed N] [--out csv]
//   zkvpn bench lookup --nodes N --queries M --latency fixed:50 [--seed N] [--out csv]
//   zkvpn attest prove --in instance.json [--out bundle.hex]
//   zkvpn attest verify --in bundle.hex

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "zkvpn/attest.hpp"
#include "zkvpn/metrics.hpp"
#include "zkvpn/sim.hpp"

using namespace zkvpn;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

int cmd_sim_run(const std::string& config_path, std::optional<uint64_t> seed,
                const std::string& out_dir) {
    sim::SimConfig cfg = sim::SimConfig::from_json(read_file(config_path));
    if (seed) cfg.seed = *seed;
    std::filesystem::create_directories(out_dir);

    sim::SimRunOutput run = sim::run_standard_scenarios(cfg);
    write_file(out_dir + "/events.log", run.events_text);
    if (!metrics::write_csv_file(run.records, out_dir + "/metrics.csv"))
        throw std::runtime_error("cannot write metrics.csv");

    for (const auto& s : run.scenarios) {
        std::cout << "session " << s.session_id << ": " << chain::phase_name(s.final_phase);
        if (s.lookup_failed) std::cout << " (lookup failed)";
        std::cout << "\n";
    }
    std::vector<double> e2e;
    for (const auto& r : run.records)
        if (r.metric == "e2e_setup") e2e.push_back(r.value_ms);
    if (!e2e.empty())
        std::cout << metrics::format_summary_table("e2e_setup", metrics::summarize(e2e)) << "\n";
    std::cout << "wrote " << out_dir << "/events.log and " << out_dir << "/metrics.csv\n";
    return run.all_authorized ? 0 : 1;
}

int cmd_bench_zkp(size_t iters, const std::string& group, uint64_t seed,
                  const std::string& out_csv) {
    auto res = sim::bench_zkp(iters, group, seed);
    std::cout << metrics::format_summary_table("prove_time", metrics::summarize(res.prove_ms))
              << "\n";
    std::cout << metrics::format_summary_table("verify_time", metrics::summarize(res.verify_ms))
              << "\n";
    if (!out_csv.empty()) {
        if (!metrics::write_csv_file(res.records, out_csv))
            throw std::runtime_error("cannot write " + out_csv);
        std::cout << "wrote " << out_csv << "\n";
    }
    return 0;
}

int cmd_bench_lookup(uint32_t nodes, size_t queries, const std::string& latency, uint64_t seed,
                     const std::string& out_csv) {
    auto model = sim::LatencyModel::parse(latency);
    if (!model) throw std::runtime_error("bad latency spec: " + latency);

    sim::SimConfig cfg;
    cfg.n_nodes = nodes;
    cfg.seed = seed;
    cfg.group = "toy"; // lookup timing does not depend on the group size
    cfg.latency = *model;
    size_t n_domains = std::min<size_t>(nodes * 2, 50);
    for (size_t i = 0; i < n_domains; ++i)
        cfg.whitelist["bench" + std::to_string(i) + ".example"] = uint32_t(i % nodes);

    sim::World world(cfg);
    world.build();
    auto samples = world.bench_lookup(queries);

    std::vector<double> durations;
    std::vector<metrics::Record> records;
    size_t failed = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!s.ok) {
            ++failed;
            continue;
        }
        durations.push_back(double(s.duration_us) / 1000.0);
        records.push_back(metrics::make_record(
            "q" + std::to_string(i), "lookup_duration", double(s.duration_us) / 1000.0,
            "legs=" + std::to_string(s.legs) + ";rounds=" + std::to_string(s.rounds)));
    }
    if (!durations.empty())
        std::cout << metrics::format_summary_table("lookup_duration",
                                                   metrics::summarize(durations))
                  << "\n";
    std::cout << queries - failed << "/" << queries << " lookups resolved\n";
    if (!out_csv.empty()) {
        if (!metrics::write_csv_file(records, out_csv))
            throw std::runtime_error("cannot write " + out_csv);
        std::cout << "wrote " << out_csv << "\n";
    }
    return failed == 0 ? 0 : 1;
}

int cmd_attest_prove(const std::string& in_path, const std::string& out_path) {
    auto j = nlohmann::json::parse(read_file(in_path));
    std::string group = j.value("group", std::string("std256"));
    std::string sni = j.at("sni").get<std::string>();
    uint64_t seed = j.value("seed", uint64_t(1));

    Group grp = group_setup(group);
    Drbg rng(seed, "attest-cli");
    auto inst = attest::sample_instance(grp, rng, sni);
    attest::Proof proof = attest::prove(inst.st, inst.w, rng);
    std::string hex = hex_encode(attest::encode_bundle(inst.st, proof));
    if (out_path.empty()) {
        std::cout << hex << "\n";
    } else {
        write_file(out_path, hex + "\n");
        std::cout << "wrote " << out_path << " (" << hex.size() / 2 << " bytes)\n";
    }
    return 0;
}

int cmd_attest_verify(const std::string& in_path) {
    std::string text = read_file(in_path);
    std::string hex;
    for (char c : text)
        if (!isspace(static_cast<unsigned char>(c))) hex.push_back(c);
    auto bytes = hex_decode(hex);
    if (!bytes) {
        std::cout << "reject (not hex)\n";
        return 1;
    }
    auto bundle = attest::decode_bundle(*bytes);
    if (!bundle) {
        std::cout << "reject (malformed bundle)\n";
        return 1;
    }
    if (!attest::verify(bundle->first, bundle->second)) {
        std::cout << "reject\n";
        return 1;
    }
    std::cout << "accept\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"privacy-preserving dVPN protocol simulator and attestation tool"};
    app.require_subcommand(1);

    auto* sim_cmd = app.add_subcommand("sim", "deterministic network simulation");
    sim_cmd->require_subcommand(1);
    auto* sim_run = sim_cmd->add_subcommand("run", "run one session per whitelisted domain");
    std::string config_path, out_dir = "sim-out";
    std::optional<uint64_t> seed_override;
    sim_run->add_option("--config", config_path, "config json")->required();
    sim_run->add_option("--seed", seed_override, "override the config seed");
    sim_run->add_option("--out", out_dir, "output directory");

    auto* bench = app.add_subcommand("bench", "benchmarks");
    bench->require_subcommand(1);
    auto* bench_zkp_cmd = bench->add_subcommand("zkp", "attestation prove/verify wall-clock");
    size_t zkp_iters = 100;
    std::string zkp_group = "std256", zkp_out;
    uint64_t zkp_seed = 1;
    bench_zkp_cmd->add_option("--iters", zkp_iters, "iterations")->check(CLI::PositiveNumber);
    bench_zkp_cmd->add_option("--group", zkp_group, "toy|std256");
    bench_zkp_cmd->add_option("--seed", zkp_seed, "rng seed");
    bench_zkp_cmd->add_option("--out", zkp_out, "csv output path");

    auto* bench_lookup_cmd = bench->add_subcommand("lookup", "DHT lookup latency in sim time");
    uint32_t lookup_nodes = 64;
    size_t lookup_queries = 200;
    std::string lookup_latency = "fixed:50", lookup_out;
    uint64_t lookup_seed = 1;
    bench_lookup_cmd->add_option("--nodes", lookup_nodes, "network size")
        ->check(CLI::PositiveNumber);
    bench_lookup_cmd->add_option("--queries", lookup_queries, "number of lookups")
        ->check(CLI::PositiveNumber);
    bench_lookup_cmd->add_option("--latency", lookup_latency, "fixed:ms or uniform:lo:hi");
    bench_lookup_cmd->add_option("--seed", lookup_seed, "rng seed");
    bench_lookup_cmd->add_option("--out", lookup_out, "csv output path");

    auto* attest_cmd = app.add_subcommand("attest", "attestation bundles over files");
    attest_cmd->require_subcommand(1);
    auto* attest_prove = attest_cmd->add_subcommand("prove", "build a bundle from instance json");
    std::string prove_in, prove_out;
    attest_prove->add_option("--in", prove_in, "instance json (group, sni, seed)")->required();
    attest_prove->add_option("--out", prove_out, "bundle hex output path");
    auto* attest_verify = attest_cmd->add_subcommand("verify", "verify a hex-encoded bundle");
    std::string verify_in;
    attest_verify->add_option("--in", verify_in, "bundle hex path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim_run->parsed()) return cmd_sim_run(config_path, seed_override, out_dir);
        if (bench_zkp_cmd->parsed()) return cmd_bench_zkp(zkp_iters, zkp_group, zkp_seed, zkp_out);
        if (bench_lookup_cmd->parsed())
            return cmd_bench_lookup(lookup_nodes, lookup_queries, lookup_latency, lookup_seed,
                                    lookup_out);
        if (attest_prove->parsed()) return cmd_attest_prove(prove_in, prove_out);
        if (attest_verify->parsed()) return cmd_attest_verify(verify_in);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
