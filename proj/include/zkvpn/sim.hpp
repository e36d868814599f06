#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zkvpn/attest.hpp"
#include "zkvpn/chain.hpp"
#include "zkvpn/dht.hpp"
#include "zkvpn/metrics.hpp"
#include "zkvpn/rng.hpp"

namespace zkvpn {
namespace sim {

using Addr = dht::Addr;

// --- configuration -----------------------------------------------------------

struct LatencyModel {
    enum class Kind { Fixed, Uniform };
    Kind kind = Kind::Fixed;
    uint64_t fixed_ms = 50;
    uint64_t lo_ms = 10;
    uint64_t hi_ms = 200;

    uint64_t draw_us(Drbg& rng) const;
    uint64_t max_us() const;
    std::string str() const;
    // "fixed:<ms>" or "uniform:<lo>:<hi>"
    static std::optional<LatencyModel> parse(const std::string& text);
};

struct SimConfig {
    uint32_t n_nodes = 64;
    uint64_t seed = 1;
    LatencyModel latency;
    double loss_rate = 0.0;
    std::map<std::string, uint32_t> whitelist; // domain -> provider node index
    std::string group = "std256";
    uint64_t window_t_s = 30; // attestation window T
    uint64_t ttl_s = 1800;    // whitelist entry TTL; re-published at ttl/2
    size_t k = 8;
    size_t alpha = 3;
    size_t r_rep = 3;

    // throws std::invalid_argument on malformed text or invalid fields
    static SimConfig from_json(const std::string& text);
    std::string to_json() const;
    void validate() const;
};

// --- observation log -----------------------------------------------------------

enum class Layer { Dht, Tunnel };

struct Observation {
    uint64_t t_us;
    Layer layer;
    std::string kind;
    Addr from;
    uint64_t session_id; // 0 for dht traffic
    Bytes payload;
};

// --- scenarios -----------------------------------------------------------------

struct ScenarioOpts {
    uint32_t client = 0; // node index of S
    uint32_t relay = 1;  // node index of X
    std::string domain;
    uint64_t appdata_period_s = 4;
    size_t appdata_total = 6;      // AppData events S emits over the session
    uint64_t lookup_delay_s = 0;   // stall before starting the lookup
    uint64_t prove_delay_s = 0;    // stall between RST and re-handshake
    int exit_tunnel_failures = 0;  // injected refusals on the X->A leg
    bool relay_unreachable = false;
    bool drop_notify = false; // suppress NOTIFY delivery to A (gate must reject)
    // dishonest client: encrypt the SNI for another domain while presenting
    // the looked-up domain's C_pkD (forces the sigma-protocol reject path)
    std::optional<std::string> dishonest_domain;
};

struct ScenarioResult {
    uint64_t session_id = 0;
    chain::Phase final_phase = chain::Phase::Idle;
    std::vector<std::pair<chain::Phase, chain::Phase>> phase_history;
    std::vector<metrics::Record> records;
    bool start_error = false;   // relay unreachable
    bool lookup_failed = false; // not-found or max rounds
    Addr exit_addr = 0;         // A, once the lookup resolved
    uint64_t window_deadline_us = 0;
    // forwarding accounting for the service-continuation checks
    std::vector<uint64_t> appdata_sent;      // seq, stamped by S
    std::vector<uint64_t> appdata_delivered; // seq, recorded at D
    std::vector<uint64_t> appdata_dropped;   // seq, dropped by X after the window
    uint64_t t_started_us = 0;
    uint64_t t_finished_us = 0;
    size_t lookup_rounds = 0;
    size_t lookup_legs = 0; // one-way message legs on the lookup critical path
};

struct LookupSample {
    bool ok = false;
    uint64_t duration_us = 0;
    size_t rounds = 0;
    size_t legs = 0;
    Addr provider = 0;
    dht::Key key{}; // the queried key
};

struct PrivacyReport {
    bool ok = true;
    std::vector<std::string> violations;
};

// --- world ---------------------------------------------------------------------

// Deterministic discrete-event network: DHT nodes (which also play client,
// relay and exit roles) plus one destination actor per whitelisted domain.
// All randomness flows from the config seed; events are totally ordered by
// (timestamp, sequence number).
class World {
public:
    explicit World(const SimConfig& cfg);
    ~World();

    World(const World&) = delete;
    World& operator=(const World&) = delete;

    // joins all nodes, announces every whitelist entry, settles routing
    void build();

    ScenarioResult run_scenario(const ScenarioOpts& opts);
    std::vector<LookupSample> bench_lookup(size_t n_queries);

    // audits the most recent scenario's traffic (see README for the exact
    // rules; requires the std256 group so byte patterns are unambiguous)
    PrivacyReport audit_scenario(const ScenarioResult& result, const ScenarioOpts& opts) const;

    uint64_t now_us() const;
    const Group& group() const;
    const SimConfig& config() const;
    const std::vector<std::string>& event_log() const;
    const std::vector<Observation>& observations(Addr addr) const;
    std::string node_name(Addr addr) const;

    Addr node_addr(uint32_t index) const;
    Addr dest_addr_of(const std::string& domain) const;
    const dht::Node& dht_node(uint32_t index) const;
    const Int& domain_public_key(const std::string& domain) const;

    // brute-force oracle: every provider currently storing the key, found by
    // scanning all nodes' stores directly
    std::set<Addr> global_providers(const dht::Key& key) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// --- standard run: one honest session per whitelisted domain ---------------------

// What `sim run` executes: builds the network from the config, then runs one
// end-to-end session per whitelist entry with deterministically chosen
// client and relay (the nodes after the provider, cyclically). Requires
// n_nodes >= 3 when the whitelist is nonempty.
struct SimRunOutput {
    std::string events_text; // the full event log, one line per event
    std::vector<metrics::Record> records;
    std::vector<ScenarioResult> scenarios;
    bool all_authorized = true;
};

SimRunOutput run_standard_scenarios(const SimConfig& cfg);

// --- zkp benchmark (no network, wall-clock) --------------------------------------

struct ZkpBenchResult {
    std::vector<double> prove_ms;
    std::vector<double> verify_ms;
    std::vector<metrics::Record> records;
};

ZkpBenchResult bench_zkp(size_t iters, const std::string& group_label, uint64_t seed);

} // namespace sim
} // namespace zkvpn
