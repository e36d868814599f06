#include <doctest.h>

#include <algorithm>
#include <set>
#include <stdexcept>

#include "zkvpn/chain.hpp"
#include "zkvpn/sim.hpp"

using namespace zkvpn;
using namespace zkvpn::chain;

namespace {

const std::vector<Phase> kAllPhases = {Phase::Idle,        Phase::TempTunnel,
                                       Phase::LookupPending, Phase::Splicing,
                                       Phase::AwaitingProof, Phase::Authorized,
                                       Phase::Interrupted};

bool history_legal(const std::vector<std::pair<Phase, Phase>>& history) {
    for (const auto& [from, to] : history)
        if (!legal_transition(from, to)) return false;
    return true;
}

sim::SimConfig scenario_net(uint64_t seed, const std::string& group = "toy") {
    sim::SimConfig cfg;
    cfg.n_nodes = 24;
    cfg.seed = seed;
    cfg.group = group;
    cfg.latency = *sim::LatencyModel::parse("fixed:50");
    cfg.whitelist["alpha.example"] = 5;
    cfg.whitelist["beta.example"] = 9;
    return cfg;
}

sim::ScenarioOpts honest_opts(const std::string& domain = "alpha.example") {
    sim::ScenarioOpts opts;
    opts.client = 2;
    opts.relay = 3;
    opts.domain = domain;
    return opts;
}

std::vector<uint64_t> sorted(std::vector<uint64_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST_SUITE_BEGIN("chain");

TEST_CASE("phase transitions: legality table and enforcement") {
    // the only legal moves walk the chain or bail out to Interrupted
    std::set<std::pair<Phase, Phase>> legal = {
        {Phase::Idle, Phase::TempTunnel},
        {Phase::TempTunnel, Phase::LookupPending},
        {Phase::TempTunnel, Phase::Interrupted},
        {Phase::LookupPending, Phase::Splicing},
        {Phase::LookupPending, Phase::Interrupted},
        {Phase::Splicing, Phase::AwaitingProof},
        {Phase::Splicing, Phase::Interrupted},
        {Phase::AwaitingProof, Phase::Authorized},
        {Phase::AwaitingProof, Phase::Interrupted},
    };
    for (Phase from : kAllPhases) {
        for (Phase to : kAllPhases) {
            CHECK(legal_transition(from, to) == (legal.count({from, to}) > 0));
        }
    }

    // splice before the lookup response is a precondition violation
    ChainState st;
    CHECK_THROWS_AS(st.transition(Phase::Splicing), std::logic_error);
    st.transition(Phase::TempTunnel);
    CHECK_THROWS_AS(st.transition(Phase::Authorized), std::logic_error);
}

TEST_CASE("phase machine: exhaustive small traces stay legal") {
    // enumerate every phase sequence up to length 4; applying it either
    // throws at the first illegal hop or leaves only legal pairs behind
    size_t n = kAllPhases.size();
    for (size_t len = 1; len <= 4; ++len) {
        size_t combos = 1;
        for (size_t i = 0; i < len; ++i) combos *= n;
        for (size_t c = 0; c < combos; ++c) {
            ChainState st;
            size_t rest = c;
            for (size_t step = 0; step < len; ++step) {
                Phase target = kAllPhases[rest % n];
                rest /= n;
                bool expect_ok = legal_transition(st.phase, target);
                bool threw = false;
                try {
                    st.transition(target);
                } catch (const std::logic_error&) {
                    threw = true;
                }
                CHECK(expect_ok != threw);
                if (threw) break;
            }
            CHECK(history_legal(st.history));
        }
    }
}

TEST_CASE("phase machine: randomized trace fuzzing") {
    Drbg rng(81);
    for (int trace = 0; trace < 100000; ++trace) {
        ChainState st;
        int steps = 1 + int(rng.below(8));
        for (int i = 0; i < steps; ++i) {
            Phase target = kAllPhases[size_t(rng.below(kAllPhases.size()))];
            bool expect_ok = legal_transition(st.phase, target);
            try {
                st.transition(target);
                CHECK(expect_ok);
            } catch (const std::logic_error&) {
                CHECK(!expect_ok);
            }
        }
        CHECK(history_legal(st.history));
    }
}

TEST_CASE("tunnel codec: round trips and rejection") {
    Group grp = group_setup("toy");
    Drbg rng(82);
    TunnelMsg msg{TunnelKind::ClientHello, 42, 500001,
                  encode_client_hello(ClientHelloPayload{rng.bytes(11), rng.bytes(40)})};
    Bytes wire = encode_tunnel(msg);
    auto back = decode_tunnel(wire);
    REQUIRE(back.has_value());
    CHECK(back->kind == msg.kind);
    CHECK(back->session_id == msg.session_id);
    CHECK(back->dest_addr == msg.dest_addr);
    CHECK(back->payload == msg.payload);

    CHECK(!decode_tunnel(Bytes{}));
    Bytes bad = wire;
    bad[0] = 0x19;
    CHECK(!decode_tunnel(bad));
    Bytes trunc(wire.begin(), wire.end() - 2);
    CHECK(!decode_tunnel(trunc));

    auto kp = schnorr::keygen(grp, rng);
    auto ct = elgamal::encrypt(grp, Int(4), grp.pow(grp.g, 3), rng);
    ChainInfoPayload info{1007, ct.ct, schnorr::sign(grp, Bytes{1, 2}, kp.sk, rng), kp.pk};
    auto info2 = decode_chain_info(grp, encode_chain_info(grp, info));
    REQUIRE(info2.has_value());
    CHECK(info2->exit_addr == info.exit_addr);
    CHECK(info2->c_pkd == info.c_pkd);
    CHECK(info2->pk_r == info.pk_r);

    CHECK(decode_accept(encode_accept(123456789)) == uint64_t{123456789});
    CHECK(decode_app_data(encode_app_data(7)) == uint64_t{7});
}

TEST_CASE("log line format") {
    std::string line = log_line(12345, "n7", "recv", "client_hello", 3, Bytes{1, 2, 3});
    // time,node,direction,event_kind,session_id,payload_digest
    CHECK(line.substr(0, 29) == "12345,n7,recv,client_hello,3,");
    CHECK(line.size() == 29 + 16); // 16 hex chars of digest
}

TEST_CASE("honest scenario: authorized, continuous service, clean trace") {
    sim::World w(scenario_net(501));
    w.build();
    auto opts = honest_opts();
    auto res = w.run_scenario(opts);

    CHECK(res.final_phase == Phase::Authorized);
    CHECK(history_legal(res.phase_history));
    // the canonical path, in order
    std::vector<std::pair<Phase, Phase>> expect = {
        {Phase::Idle, Phase::TempTunnel},
        {Phase::TempTunnel, Phase::LookupPending},
        {Phase::LookupPending, Phase::Splicing},
        {Phase::Splicing, Phase::AwaitingProof},
        {Phase::AwaitingProof, Phase::Authorized},
    };
    CHECK(res.phase_history == expect);

    // service continuation: everything S emitted reached D
    CHECK(!res.appdata_sent.empty());
    CHECK(sorted(res.appdata_sent) == sorted(res.appdata_delivered));
    CHECK(res.appdata_dropped.empty());

    // metrics, one of each
    std::set<std::string> metric_names;
    for (const auto& r : res.records) metric_names.insert(r.metric);
    for (const char* name :
         {"lookup_duration", "splice_duration", "prove_time", "verify_time", "e2e_setup"})
        CHECK(metric_names.count(name) == 1);

    // e2e = lookup + splice + proof round trip, exactly, in sim time
    double lookup = 0, splice = 0, e2e = 0;
    for (const auto& r : res.records) {
        if (r.metric == "lookup_duration") lookup = r.value_ms;
        if (r.metric == "splice_duration") splice = r.value_ms;
        if (r.metric == "e2e_setup") e2e = r.value_ms;
    }
    CHECK(e2e >= lookup + splice);

    // D first saw the stream from X, then from A
    Addr dest = w.dest_addr_of(opts.domain);
    Addr x_addr = w.node_addr(opts.relay);
    std::vector<Addr> peers;
    for (const auto& o : w.observations(dest)) {
        if (o.session_id == res.session_id && (o.kind == "client_hello" || o.kind == "app_data")) {
            if (peers.empty() || peers.back() != o.from) peers.push_back(o.from);
        }
    }
    REQUIRE(peers.size() >= 2);
    CHECK(peers[0] == x_addr);
    CHECK(peers[1] == res.exit_addr);
    CHECK(res.exit_addr != x_addr);

    // the RST reached S during the splice
    bool s_got_rst = false;
    for (const auto& o : w.observations(w.node_addr(opts.client))) {
        if (o.session_id == res.session_id && o.kind == "tcp_rst") s_got_rst = true;
    }
    CHECK(s_got_rst);

    // A heard the responder's notification before the splice reached it
    uint64_t t_notify = 0, t_open = 0;
    for (const auto& o : w.observations(res.exit_addr)) {
        if (o.kind == "notify_provider" && t_notify == 0) t_notify = o.t_us;
        if (o.kind == "tunnel_open" && o.session_id == res.session_id && t_open == 0)
            t_open = o.t_us;
    }
    REQUIRE(t_notify > 0);
    REQUIRE(t_open > 0);
    CHECK(t_notify < t_open);

    // fresh encryption on the re-handshake: the two hellos X relayed differ
    std::vector<Bytes> hello_snis;
    for (const auto& o : w.observations(x_addr)) {
        if (o.session_id == res.session_id && o.kind == "client_hello") {
            auto msg = decode_tunnel(o.payload);
            REQUIRE(msg.has_value());
            auto hello = decode_client_hello(msg->payload);
            REQUIRE(hello.has_value());
            hello_snis.push_back(hello->c_sni_bytes);
        }
    }
    REQUIRE(hello_snis.size() == 2);
    CHECK(hello_snis[0] != hello_snis[1]);
}

TEST_CASE("unreachable relay: error, no traffic") {
    sim::World w(scenario_net(502));
    w.build();
    size_t log_before = w.event_log().size();
    auto opts = honest_opts();
    opts.relay_unreachable = true;
    auto res = w.run_scenario(opts);
    CHECK(res.start_error);
    CHECK(res.final_phase == Phase::Idle);
    CHECK(res.phase_history.empty());
    CHECK(w.event_log().size() == log_before);
}

TEST_CASE("two sessions from the same client are independent") {
    sim::World w(scenario_net(503));
    w.build();
    auto res1 = w.run_scenario(honest_opts("alpha.example"));
    auto res2 = w.run_scenario(honest_opts("beta.example"));
    CHECK(res1.session_id != res2.session_id);
    CHECK(res1.final_phase == Phase::Authorized);
    CHECK(res2.final_phase == Phase::Authorized);
}

TEST_CASE("exit tunnel failure: one retry succeeds, two failures interrupt") {
    {
        sim::World w(scenario_net(504));
        w.build();
        auto opts = honest_opts();
        opts.exit_tunnel_failures = 1;
        auto res = w.run_scenario(opts);
        CHECK(res.final_phase == Phase::Authorized);
    }
    {
        sim::World w(scenario_net(505));
        w.build();
        auto opts = honest_opts();
        opts.exit_tunnel_failures = 2;
        auto res = w.run_scenario(opts);
        CHECK(res.final_phase == Phase::Interrupted);
        CHECK(history_legal(res.phase_history));
        // the failure happened while splicing
        CHECK(res.phase_history.back() ==
              std::pair<Phase, Phase>{Phase::Splicing, Phase::Interrupted});
    }
}

TEST_CASE("dishonest client targeting another domain is rejected at the gate") {
    sim::World w(scenario_net(506));
    w.build();
    auto opts = honest_opts("alpha.example");
    opts.dishonest_domain = "beta.example";
    auto res = w.run_scenario(opts);
    CHECK(res.final_phase == Phase::Interrupted);
    CHECK(res.phase_history.back() ==
          std::pair<Phase, Phase>{Phase::AwaitingProof, Phase::Interrupted});
    // the gate blocked the re-handshake: neither destination ever received a
    // hello from the exit node
    for (const std::string domain : {"alpha.example", "beta.example"}) {
        for (const auto& o : w.observations(w.dest_addr_of(domain))) {
            if (o.session_id == res.session_id && o.kind == "client_hello")
                CHECK(o.from != res.exit_addr);
        }
    }
}

TEST_CASE("unannounced domain: not-found, interrupted at window expiry") {
    sim::World w(scenario_net(507));
    w.build();
    auto opts = honest_opts("nowhere.example");
    auto res = w.run_scenario(opts);
    CHECK(res.lookup_failed);
    CHECK(res.final_phase == Phase::Interrupted);
    // interrupted by the window deadline, not earlier
    CHECK(res.phase_history.back().second == Phase::Interrupted);
}

TEST_CASE("delayed proof: window expires, unauthorized traffic dropped") {
    sim::World w(scenario_net(508));
    w.build();
    auto opts = honest_opts();
    opts.prove_delay_s = 60; // far beyond T = 30
    auto res = w.run_scenario(opts);
    CHECK(res.final_phase == Phase::Interrupted);
    // no appdata made it past the window
    for (uint64_t seq : res.appdata_delivered)
        CHECK(std::find(res.appdata_dropped.begin(), res.appdata_dropped.end(), seq) ==
              res.appdata_dropped.end());
}

TEST_CASE("delayed lookup: appdata past the deadline is dropped, not forwarded") {
    sim::World w(scenario_net(509));
    w.build();
    auto opts = honest_opts();
    opts.lookup_delay_s = 60; // the session is still unauthorized at T
    opts.appdata_total = 12;
    opts.appdata_period_s = 4;
    auto res = w.run_scenario(opts);
    CHECK(res.final_phase == Phase::Interrupted);
    CHECK(!res.appdata_dropped.empty());
    // pre-deadline traffic was forwarded, post-deadline traffic dropped
    for (uint64_t seq : res.appdata_dropped) {
        CHECK(std::find(res.appdata_delivered.begin(), res.appdata_delivered.end(), seq) ==
              res.appdata_delivered.end());
    }
    CHECK(!res.appdata_delivered.empty());
    // interrupted is absorbing: everything sent is either delivered or dropped,
    // and the split point is the window deadline
    uint64_t max_delivered = *std::max_element(res.appdata_delivered.begin(),
                                               res.appdata_delivered.end());
    uint64_t min_dropped = *std::min_element(res.appdata_dropped.begin(),
                                             res.appdata_dropped.end());
    CHECK(max_delivered < min_dropped);
}

TEST_CASE("gate rejects when the responder key was never notified") {
    sim::World w(scenario_net(510));
    w.build();
    auto opts = honest_opts();
    opts.drop_notify = true;
    auto res = w.run_scenario(opts);
    CHECK(res.final_phase == Phase::Interrupted);
    CHECK(res.phase_history.back() ==
          std::pair<Phase, Phase>{Phase::AwaitingProof, Phase::Interrupted});
}

TEST_CASE("honest scenario verifies end to end in the std256 group") {
    sim::SimConfig cfg = scenario_net(511, "std256");
    cfg.n_nodes = 12;
    sim::World w(cfg);
    w.build();
    auto res = w.run_scenario(honest_opts());
    CHECK(res.final_phase == Phase::Authorized);
    // and the proof timings were measured for real
    bool has_prove = false, has_verify = false;
    for (const auto& r : res.records) {
        if (r.metric == "prove_time") has_prove = r.value_ms > 0;
        if (r.metric == "verify_time") has_verify = r.value_ms > 0;
    }
    CHECK(has_prove);
    CHECK(has_verify);
}

TEST_SUITE_END();
