#include <doctest.h>

#include <cmath>
#include <sstream>

#include "zkvpn/metrics.hpp"
#include "zkvpn/sim.hpp"

using namespace zkvpn;
using namespace zkvpn::sim;

TEST_SUITE_BEGIN("sim");

TEST_CASE("latency model: parse, format, draw ranges") {
    auto fixed = LatencyModel::parse("fixed:50");
    REQUIRE(fixed.has_value());
    CHECK(fixed->str() == "fixed:50");
    Drbg rng(90);
    for (int i = 0; i < 100; ++i) CHECK(fixed->draw_us(rng) == 50000);

    auto uni = LatencyModel::parse("uniform:10:200");
    REQUIRE(uni.has_value());
    CHECK(uni->str() == "uniform:10:200");
    for (int i = 0; i < 2000; ++i) {
        uint64_t d = uni->draw_us(rng);
        CHECK(d >= 10000);
        CHECK(d <= 200000);
    }

    CHECK(!LatencyModel::parse(""));
    CHECK(!LatencyModel::parse("fixed:"));
    CHECK(!LatencyModel::parse("uniform:200:10"));
    CHECK(!LatencyModel::parse("gaussian:5"));
}

TEST_CASE("config: json round trip and validation") {
    SimConfig cfg;
    cfg.n_nodes = 16;
    cfg.seed = 99;
    cfg.latency = *LatencyModel::parse("uniform:10:200");
    cfg.loss_rate = 0.05;
    cfg.group = "toy";
    cfg.whitelist["shop.example"] = 3;
    cfg.whitelist["news.example"] = 7;

    SimConfig back = SimConfig::from_json(cfg.to_json());
    CHECK(back.n_nodes == cfg.n_nodes);
    CHECK(back.seed == cfg.seed);
    CHECK(back.latency.str() == cfg.latency.str());
    CHECK(back.loss_rate == cfg.loss_rate);
    CHECK(back.group == cfg.group);
    CHECK(back.whitelist == cfg.whitelist);
    CHECK(back.window_t_s == cfg.window_t_s);
    CHECK(back.k == cfg.k);

    CHECK_THROWS_AS(SimConfig::from_json("not json"), std::invalid_argument);
    CHECK_THROWS_AS(SimConfig::from_json(R"({"bogus_field": 1})"), std::invalid_argument);
    CHECK_THROWS_AS(SimConfig::from_json(R"({"n_nodes": 0})"), std::invalid_argument);
    CHECK_THROWS_AS(SimConfig::from_json(R"({"loss_rate": 1.5})"), std::invalid_argument);
    CHECK_THROWS_AS(SimConfig::from_json(R"({"group": "huge"})"), std::invalid_argument);
    CHECK_THROWS_AS(SimConfig::from_json(R"({"n_nodes": 4, "whitelist": {"a.example": 9}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(SimConfig::from_json(R"({"latency": "warp:1"})"), std::invalid_argument);
}

TEST_CASE("determinism: identical seeds give byte-identical logs") {
    SimConfig cfg;
    cfg.n_nodes = 20;
    cfg.seed = 777;
    cfg.group = "toy";
    cfg.latency = *LatencyModel::parse("uniform:10:200");
    cfg.whitelist["shop.example"] = 4;

    ScenarioOpts opts;
    opts.client = 1;
    opts.relay = 2;
    opts.domain = "shop.example";

    World w1(cfg), w2(cfg);
    w1.build();
    w2.build();
    auto r1 = w1.run_scenario(opts);
    auto r2 = w2.run_scenario(opts);
    CHECK(r1.final_phase == r2.final_phase);
    CHECK(w1.event_log().size() == w2.event_log().size());
    CHECK(w1.event_log() == w2.event_log());

    // a different seed diverges
    SimConfig other = cfg;
    other.seed = 778;
    World w3(other);
    w3.build();
    CHECK(w3.event_log() != w1.event_log());
}

TEST_CASE("fixed latency: lookup duration is exactly legs x one-way") {
    SimConfig cfg;
    cfg.n_nodes = 64;
    cfg.seed = 2100;
    cfg.group = "toy";
    cfg.latency = *LatencyModel::parse("fixed:50");
    for (int i = 0; i < 30; ++i)
        cfg.whitelist["host" + std::to_string(i) + ".example"] = uint32_t(i % 64);
    World w(cfg);
    w.build();
    auto samples = w.bench_lookup(50);
    for (const auto& s : samples) {
        REQUIRE(s.ok);
        CHECK(s.duration_us == s.legs * 50000);
    }
}

TEST_CASE("uniform latency: samples stay inside analytic bounds") {
    SimConfig cfg;
    cfg.n_nodes = 64;
    cfg.seed = 2101;
    cfg.group = "toy";
    cfg.latency = *LatencyModel::parse("uniform:10:200");
    for (int i = 0; i < 30; ++i)
        cfg.whitelist["host" + std::to_string(i) + ".example"] = uint32_t(i % 64);
    World w(cfg);
    w.build();
    auto samples = w.bench_lookup(60);
    std::vector<double> durations;
    for (const auto& s : samples) {
        REQUIRE(s.ok);
        CHECK(s.duration_us >= s.legs * 10000);
        CHECK(s.duration_us <= s.legs * 200000);
        durations.push_back(double(s.duration_us) / 1000.0);
    }
    // the empirical distribution is monotone in its percentiles
    auto sum = metrics::summarize(durations);
    CHECK(sum.p10 <= sum.p25);
    CHECK(sum.p25 <= sum.p50);
    CHECK(sum.p50 <= sum.p75);
    CHECK(sum.p75 <= sum.p90);
    CHECK(sum.p90 <= sum.p95);
    CHECK(sum.p95 <= sum.p99);
}

TEST_CASE("one-node network: zero remote legs") {
    SimConfig cfg;
    cfg.n_nodes = 1;
    cfg.seed = 2102;
    cfg.group = "toy";
    cfg.latency = *LatencyModel::parse("fixed:50");
    cfg.whitelist["solo.example"] = 0;
    World w(cfg);
    w.build();
    auto samples = w.bench_lookup(3);
    for (const auto& s : samples) {
        CHECK(s.ok);
        CHECK(s.rounds == 0);
        CHECK(s.legs == 0);
        CHECK(s.duration_us == 0);
    }
}

TEST_CASE("latency accounting: e2e decomposes into the recorded stages") {
    SimConfig cfg;
    cfg.n_nodes = 24;
    cfg.seed = 2103;
    cfg.group = "toy";
    cfg.latency = *LatencyModel::parse("fixed:50");
    cfg.whitelist["alpha.example"] = 5;
    World w(cfg);
    w.build();
    ScenarioOpts opts;
    opts.client = 2;
    opts.relay = 3;
    opts.domain = "alpha.example";
    auto res = w.run_scenario(opts);
    REQUIRE(res.final_phase == chain::Phase::Authorized);

    double lookup = -1, splice = -1, e2e = -1;
    for (const auto& r : res.records) {
        if (r.metric == "lookup_duration") lookup = r.value_ms;
        if (r.metric == "splice_duration") splice = r.value_ms;
        if (r.metric == "e2e_setup") e2e = r.value_ms;
    }
    REQUIRE(lookup >= 0);
    REQUIRE(splice >= 0);
    REQUIRE(e2e >= 0);
    // proof round trip is exactly the re-handshake path S -> X -> A
    CHECK(e2e == lookup + splice + 100.0);
}

TEST_CASE("metrics: csv round trip, header-only file, sanitizing") {
    std::vector<metrics::Record> records;
    records.push_back(metrics::make_record("s1", "lookup_duration", 123.456789, "legs=4"));
    records.push_back(metrics::make_record("s1", "prove_time", 0.5, ""));
    records.push_back(metrics::make_record("s2", "e2e_setup", 1000.0, "note,with,commas"));

    std::stringstream ss;
    metrics::write_csv(records, ss);
    auto back = metrics::read_csv(ss);
    REQUIRE(back.has_value());
    REQUIRE(back->size() == 3);
    CHECK((*back)[0].value_ms == doctest::Approx(123.457).epsilon(1e-9));
    CHECK((*back)[2].detail == "note;with;commas");
    // a second round trip is exact
    std::stringstream ss2;
    metrics::write_csv(*back, ss2);
    auto again = metrics::read_csv(ss2);
    REQUIRE(again.has_value());
    CHECK(*again == *back);

    std::stringstream empty;
    metrics::write_csv({}, empty);
    CHECK(empty.str() == "run_id,metric,value_ms,detail\n");
    auto parsed = metrics::read_csv(empty);
    REQUIRE(parsed.has_value());
    CHECK(parsed->empty());

    std::stringstream bad("nonsense header\n");
    CHECK(!metrics::read_csv(bad));

    CHECK(!metrics::write_csv_file({}, "/nonexistent-dir/x.csv"));
}

TEST_CASE("percentiles: nearest rank") {
    std::vector<double> samples;
    for (int i = 1; i <= 100; ++i) samples.push_back(double(i));
    CHECK(metrics::percentile(samples, 50) == 50.0);
    CHECK(metrics::percentile(samples, 95) == 95.0);
    CHECK(metrics::percentile(samples, 99) == 99.0);
    CHECK(metrics::percentile(samples, 100) == 100.0);
    CHECK(metrics::percentile({42.0}, 50) == 42.0);
    CHECK_THROWS_AS(metrics::percentile({}, 50), std::invalid_argument);
    CHECK_THROWS_AS(metrics::percentile({1.0}, 0), std::invalid_argument);
}

TEST_CASE("bench_zkp: row shape and toy speed") {
    auto res = sim::bench_zkp(1, "toy", 7);
    CHECK(res.prove_ms.size() == 1);
    CHECK(res.verify_ms.size() == 1);
    CHECK(res.records.size() == 2);
    CHECK(res.records[0].metric == "prove_time");
    CHECK(res.records[1].metric == "verify_time");

    auto toy = sim::bench_zkp(40, "toy", 8);
    CHECK(metrics::percentile(toy.prove_ms, 95) < 1.0);
    CHECK(metrics::percentile(toy.verify_ms, 95) < 1.0);
}

TEST_SUITE_END();
