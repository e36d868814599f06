#include "zkvpn/sim.hpp"

#include <algorithm>
#include <chrono>
#include <queue>
#include <stdexcept>

#include <json.hpp>

namespace zkvpn {
namespace sim {

using nlohmann::json;

// --- LatencyModel -------------------------------------------------------------

uint64_t LatencyModel::draw_us(Drbg& rng) const {
    if (kind == Kind::Fixed) return fixed_ms * 1000;
    return rng.between(lo_ms, hi_ms) * 1000;
}

uint64_t LatencyModel::max_us() const {
    return (kind == Kind::Fixed ? fixed_ms : hi_ms) * 1000;
}

std::string LatencyModel::str() const {
    if (kind == Kind::Fixed) return "fixed:" + std::to_string(fixed_ms);
    return "uniform:" + std::to_string(lo_ms) + ":" + std::to_string(hi_ms);
}

std::optional<LatencyModel> LatencyModel::parse(const std::string& text) {
    LatencyModel m;
    if (text.rfind("fixed:", 0) == 0) {
        m.kind = Kind::Fixed;
        try {
            m.fixed_ms = std::stoull(text.substr(6));
        } catch (const std::exception&) {
            return std::nullopt;
        }
        return m;
    }
    if (text.rfind("uniform:", 0) == 0) {
        std::string rest = text.substr(8);
        size_t colon = rest.find(':');
        if (colon == std::string::npos) return std::nullopt;
        try {
            m.kind = Kind::Uniform;
            m.lo_ms = std::stoull(rest.substr(0, colon));
            m.hi_ms = std::stoull(rest.substr(colon + 1));
        } catch (const std::exception&) {
            return std::nullopt;
        }
        if (m.lo_ms > m.hi_ms) return std::nullopt;
        return m;
    }
    return std::nullopt;
}

// --- SimConfig ------------------------------------------------------------------

void SimConfig::validate() const {
    if (n_nodes < 1) throw std::invalid_argument("config: n_nodes must be >= 1");
    if (loss_rate < 0.0 || loss_rate >= 1.0)
        throw std::invalid_argument("config: loss_rate must be in [0, 1)");
    if (group != "toy" && group != "std256")
        throw std::invalid_argument("config: unknown group label " + group);
    if (ttl_s == 0) throw std::invalid_argument("config: ttl_s must be positive");
    if (window_t_s == 0) throw std::invalid_argument("config: window_t_s must be positive");
    if (k == 0 || alpha == 0 || r_rep == 0)
        throw std::invalid_argument("config: k, alpha, r_rep must be positive");
    for (const auto& [domain, provider] : whitelist) {
        if (domain.empty()) throw std::invalid_argument("config: empty whitelist domain");
        if (provider >= n_nodes)
            throw std::invalid_argument("config: provider index out of range for " + domain);
    }
}

SimConfig SimConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid json: ") + e.what());
    }
    static const std::set<std::string> known = {"n_nodes",   "seed",  "latency", "loss_rate",
                                                "whitelist", "group", "window_t_s", "ttl_s",
                                                "k",         "alpha", "r_rep"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw std::invalid_argument("config: unknown field " + it.key());
    }
    SimConfig cfg;
    try {
        if (j.contains("n_nodes")) cfg.n_nodes = j.at("n_nodes").get<uint32_t>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
        if (j.contains("latency")) {
            auto m = LatencyModel::parse(j.at("latency").get<std::string>());
            if (!m) throw std::invalid_argument("config: bad latency spec");
            cfg.latency = *m;
        }
        if (j.contains("loss_rate")) cfg.loss_rate = j.at("loss_rate").get<double>();
        if (j.contains("group")) cfg.group = j.at("group").get<std::string>();
        if (j.contains("window_t_s")) cfg.window_t_s = j.at("window_t_s").get<uint64_t>();
        if (j.contains("ttl_s")) cfg.ttl_s = j.at("ttl_s").get<uint64_t>();
        if (j.contains("k")) cfg.k = j.at("k").get<size_t>();
        if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<size_t>();
        if (j.contains("r_rep")) cfg.r_rep = j.at("r_rep").get<size_t>();
        if (j.contains("whitelist")) {
            for (auto it = j.at("whitelist").begin(); it != j.at("whitelist").end(); ++it)
                cfg.whitelist[it.key()] = it.value().get<uint32_t>();
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: bad field type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string SimConfig::to_json() const {
    json j;
    j["n_nodes"] = n_nodes;
    j["seed"] = seed;
    j["latency"] = latency.str();
    j["loss_rate"] = loss_rate;
    j["group"] = group;
    j["window_t_s"] = window_t_s;
    j["ttl_s"] = ttl_s;
    j["k"] = k;
    j["alpha"] = alpha;
    j["r_rep"] = r_rep;
    j["whitelist"] = json::object();
    for (const auto& [domain, provider] : whitelist) j["whitelist"][domain] = provider;
    return j.dump(2);
}

// --- World::Impl -----------------------------------------------------------------

namespace {

constexpr Addr kNodeAddrBase = 1000;
constexpr Addr kDestAddrBase = 500000;
constexpr uint64_t kParkTimeoutUs = 10ull * 1000000;
constexpr uint64_t kKeepaliveSeq = 0;

std::string dht_kind_name(const dht::Message& msg) {
    if (std::holds_alternative<dht::Ping>(msg)) return "ping";
    if (std::holds_alternative<dht::Store>(msg)) return "store";
    if (const auto* fn = std::get_if<dht::FindNode>(&msg))
        return fn->is_response ? "find_node_resp" : "find_node_req";
    if (std::holds_alternative<dht::FindValue>(msg)) return "find_value";
    if (std::holds_alternative<dht::ValueResponse>(msg)) return "value_response";
    return "notify_provider";
}

bool bytes_contain(const Bytes& haystack, const Bytes& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
           haystack.end();
}

} // namespace

struct World::Impl {
    enum class TimerKind {
        WindowDeadline,
        AppDataTick,
        LookupStart,
        ProveStart,
        ParkTimeout,
        Republish,
        AnnounceRetry,
        JoinNode,
        StabilizeNode,
        RefreshNode,
        StartAnnounce,
        BenchLookup,
    };

    struct Event {
        uint64_t t = 0;
        uint64_t seq = 0;
        enum class Type { Net, RpcTimeout, Timer } type = Type::Net;
        // Net
        Addr from = 0, to = 0;
        Layer layer = Layer::Dht;
        Bytes bytes;
        // RpcTimeout
        uint32_t owner_idx = 0;
        uint64_t rpc_id = 0;
        // Timer
        TimerKind timer = TimerKind::WindowDeadline;
        uint64_t a = 0;
        std::string s;
    };

    struct EventOrder {
        bool operator()(const Event& x, const Event& y) const {
            if (x.t != y.t) return x.t > y.t;
            return x.seq > y.seq;
        }
    };

    struct TaskRec {
        enum class Purpose { Join, Announce, Session, Bench } purpose = Purpose::Join;
        uint32_t owner_idx = 0;
        std::unique_ptr<dht::LookupTask> task;
        dht::WhitelistEntry announce_entry{};
        uint64_t session_id = 0;
        uint64_t bench_id = 0;
        bool completed = false;
    };

    struct ClientSession {
        ScenarioOpts opts;
        uint64_t session_id = 0;
        Addr self = 0, relay = 0, dest = 0;
        std::string domain;
        Int pk_d;
        elgamal::Keypair eph;
        bool have_info = false;
        Addr exit_addr = 0;
        elgamal::Ciphertext c_pkd;
        schnorr::Signature sig_r;
        Int pk_r;
        uint64_t next_seq = 1;
        size_t appdata_emitted = 0;
        bool rst_seen = false;
        bool torn_down = false;
        bool rehs_established = false;
        bool ticks_active = false;
        uint64_t t_lookup_start = 0;
        uint64_t t_value_at_x = 0;
        uint64_t t_rst_at_s = 0;
    };

    struct RelaySession {
        uint64_t session_id = 0;
        Addr self = 0, client = 0, exit = 0;
        uint64_t deadline = 0;
        bool spliced = false;
        bool authorized = false;
        bool closed = false;
        bool teardown_sent = false;
        int open_attempts = 0;
    };

    struct ExitSession {
        uint64_t session_id = 0;
        Addr self = 0, relay = 0;
        bool authorized = false;
        bool closed = false;
        bool pass_through = true;
        std::optional<std::tuple<Addr, Bytes, Addr>> parked; // from, payload, dest
        int refusals_left = 0;
    };

    struct DestActor {
        Addr addr = 0;
        std::string name;
        elgamal::Keypair keys;
        struct Stream {
            Addr peer = 0;
            bool alive = false;
        };
        std::map<uint64_t, Stream> streams;
        std::map<uint64_t, std::vector<uint64_t>> received_seqs;
    };

    // --- members --------------------------------------------------------------

    SimConfig cfg;
    Group grp;
    dht::Params dparams;
    Drbg crypto_rng, latency_rng, loss_rng, choice_rng;

    std::priority_queue<Event, std::vector<Event>, EventOrder> queue;
    uint64_t seq_counter = 0;
    uint64_t now = 0;
    bool built = false;

    std::vector<std::unique_ptr<dht::Node>> nodes;
    std::map<std::string, DestActor> dests;
    std::map<Addr, std::string> dest_by_addr;

    std::vector<std::unique_ptr<TaskRec>> tasks;
    uint64_t rpc_counter = 0;

    uint64_t session_counter = 0;
    std::map<uint64_t, chain::ChainState> chains;
    std::map<uint64_t, ClientSession> client_sessions;
    std::map<uint64_t, RelaySession> relay_sessions;
    std::map<uint64_t, ExitSession> exit_sessions;

    std::map<Addr, std::vector<std::pair<Int, uint64_t>>> notified_keys;

    struct BenchRec {
        uint64_t start = 0;
        Addr surrogate = 0;
        size_t rounds = 0;
        size_t legs = 0;
        dht::Key key{};
        std::optional<LookupSample> sample;
    };
    std::map<uint64_t, BenchRec> bench;
    uint64_t bench_counter = (1ull << 40);

    std::vector<std::string> log;
    std::map<Addr, std::vector<Observation>> obs;
    std::vector<Observation> no_obs;

    ScenarioResult* current = nullptr;
    const ScenarioOpts* active_opts = nullptr;
    int pending_exit_refusals = 0;

    // --- setup ----------------------------------------------------------------

    explicit Impl(const SimConfig& c)
        : cfg(c),
          grp(group_setup(c.group)),
          crypto_rng(c.seed, "crypto"),
          latency_rng(c.seed, "latency"),
          loss_rng(c.seed, "loss"),
          choice_rng(c.seed, "choice") {
        cfg.validate();
        dparams.k = cfg.k;
        dparams.alpha = cfg.alpha;
        dparams.r_rep = cfg.r_rep;
        dparams.ttl_us = cfg.ttl_s * 1000000ull;
        dparams.query_timeout_us = 4 * cfg.latency.max_us() + 100000;
    }

    Addr node_addr(uint32_t idx) const { return kNodeAddrBase + idx; }
    uint32_t node_index(Addr addr) const { return addr - kNodeAddrBase; }
    bool is_node(Addr addr) const {
        return addr >= kNodeAddrBase && addr < kNodeAddrBase + nodes.size();
    }

    std::string name_of(Addr addr) const {
        if (is_node(addr)) return "n" + std::to_string(node_index(addr));
        auto it = dest_by_addr.find(addr);
        if (it != dest_by_addr.end()) return "d_" + it->second;
        return "a" + std::to_string(addr);
    }

    void schedule(uint64_t t, Event ev) {
        ev.t = t;
        ev.seq = ++seq_counter;
        queue.push(std::move(ev));
    }

    void schedule_timer(uint64_t t, TimerKind kind, uint64_t arg, std::string sarg = "") {
        Event ev;
        ev.type = Event::Type::Timer;
        ev.timer = kind;
        ev.a = arg;
        ev.s = std::move(sarg);
        schedule(t, std::move(ev));
    }

    DestActor& dest_for_domain(const std::string& domain) {
        auto it = dests.find(domain);
        if (it != dests.end()) return it->second;
        DestActor d;
        d.addr = kDestAddrBase + uint32_t(dests.size());
        d.name = domain;
        d.keys = elgamal::keygen(grp, crypto_rng);
        dest_by_addr[d.addr] = domain;
        return dests.emplace(domain, std::move(d)).first->second;
    }

    std::string classify(Layer layer, const Bytes& bytes, uint64_t& session_out) const {
        session_out = 0;
        if (layer == Layer::Dht) {
            auto msg = dht::decode_message(grp, bytes);
            if (!msg) return "malformed";
            return dht_kind_name(*msg);
        }
        auto msg = chain::decode_tunnel(bytes);
        if (!msg) return "malformed";
        session_out = msg->session_id;
        return chain::tunnel_kind_name(msg->kind);
    }

    void send(Addr from, Addr to, Layer layer, const Bytes& bytes) {
        uint64_t session = 0;
        std::string kind = classify(layer, bytes, session);
        log.push_back(chain::log_line(now, name_of(from), "send", kind, session, bytes));
        if (to != from && cfg.loss_rate > 0.0 && loss_rng.unit_real() < cfg.loss_rate)
            return; // lost in transit
        uint64_t latency = to == from ? 0 : cfg.latency.draw_us(latency_rng);
        Event ev;
        ev.type = Event::Type::Net;
        ev.from = from;
        ev.to = to;
        ev.layer = layer;
        ev.bytes = bytes;
        schedule(now + latency, std::move(ev));
    }

    void send_dht(Addr from, Addr to, const dht::Message& msg) {
        send(from, to, Layer::Dht, dht::encode_message(grp, msg));
    }

    void send_tunnel(Addr from, Addr to, const chain::TunnelMsg& msg) {
        send(from, to, Layer::Tunnel, chain::encode_tunnel(msg));
    }

    void flush_dht(uint32_t from_idx, const std::vector<dht::Outbound>& outs) {
        for (const auto& o : outs) send_dht(node_addr(from_idx), o.to, o.msg);
    }

    void flush_task_timeouts(TaskRec& rec) {
        for (auto [rpc, deadline] : rec.task->take_new_timeouts()) {
            Event ev;
            ev.type = Event::Type::RpcTimeout;
            ev.owner_idx = rec.owner_idx;
            ev.rpc_id = rpc;
            schedule(deadline, std::move(ev));
        }
    }

    void advance_until(uint64_t t_end) {
        while (!queue.empty() && queue.top().t <= t_end) {
            Event ev = queue.top();
            queue.pop();
            now = ev.t;
            dispatch(ev);
        }
        now = std::max(now, t_end);
    }

    // --- dispatch -----------------------------------------------------------------

    void dispatch(const Event& ev) {
        switch (ev.type) {
            case Event::Type::Net:
                deliver(ev.from, ev.to, ev.layer, ev.bytes);
                break;
            case Event::Type::RpcTimeout:
                on_rpc_timeout(ev.owner_idx, ev.rpc_id);
                break;
            case Event::Type::Timer:
                on_timer(ev.timer, ev.a, ev.s);
                break;
        }
    }

    void deliver(Addr from, Addr to, Layer layer, const Bytes& bytes) {
        uint64_t session = 0;
        std::string kind = classify(layer, bytes, session);
        log.push_back(chain::log_line(now, name_of(to), "recv", kind, session, bytes));
        obs[to].push_back(Observation{now, layer, kind, from, session, bytes});
        if (layer == Layer::Dht)
            handle_dht(from, to, bytes);
        else
            handle_tunnel(from, to, bytes);
    }

    // --- dht layer ------------------------------------------------------------------

    void handle_dht(Addr from, Addr to, const Bytes& bytes) {
        (void)from;
        if (!is_node(to)) return;
        uint32_t idx = node_index(to);
        dht::Node& node = *nodes[idx];
        auto decoded = dht::decode_message(grp, bytes);
        if (!decoded) return;

        if (const auto* ping = std::get_if<dht::Ping>(&*decoded)) {
            flush_dht(idx, node.handle_ping(*ping, now));
            return;
        }
        if (const auto* store = std::get_if<dht::Store>(&*decoded)) {
            node.handle_store(*store, now);
            return;
        }
        if (const auto* fn = std::get_if<dht::FindNode>(&*decoded)) {
            if (!fn->is_response) {
                dht::FindNode resp = node.handle_find_node(*fn, now);
                send_dht(to, fn->sender_addr, dht::Message{resp});
            } else {
                route_find_node_response(idx, *fn);
            }
            return;
        }
        if (const auto* fv = std::get_if<dht::FindValue>(&*decoded)) {
            flush_dht(idx, node.handle_find_value(*fv, now, crypto_rng));
            return;
        }
        if (const auto* vr = std::get_if<dht::ValueResponse>(&*decoded)) {
            on_value_response(to, *vr);
            return;
        }
        if (const auto* np = std::get_if<dht::NotifyProvider>(&*decoded)) {
            if (active_opts && active_opts->drop_notify) return;
            on_notify_provider(to, *np);
            return;
        }
    }

    void route_find_node_response(uint32_t idx, const dht::FindNode& resp) {
        nodes[idx]->observe(resp.sender_id, resp.sender_addr, now);
        for (auto& rec : tasks) {
            if (rec->owner_idx != idx || rec->completed) continue;
            if (!rec->task->owns_rpc(resp.rpc_id)) continue;
            flush_dht(idx, rec->task->on_response(resp, now, rpc_counter));
            flush_task_timeouts(*rec);
            post_process(*rec);
            return;
        }
    }

    void on_rpc_timeout(uint32_t owner_idx, uint64_t rpc_id) {
        for (auto& rec : tasks) {
            if (rec->owner_idx != owner_idx || rec->completed) continue;
            if (!rec->task->owns_rpc(rpc_id)) continue;
            flush_dht(owner_idx, rec->task->on_timeout(rpc_id, now, rpc_counter));
            flush_task_timeouts(*rec);
            post_process(*rec);
            return;
        }
    }

    void post_process(TaskRec& rec) {
        if (!rec.task->done() || rec.completed) return;
        rec.completed = true;
        uint32_t idx = rec.owner_idx;
        switch (rec.purpose) {
            case TaskRec::Purpose::Join:
                break;
            case TaskRec::Purpose::Announce: {
                for (const auto& t : rec.task->closest_result(dparams.r_rep)) {
                    if (t.addr == node_addr(idx)) {
                        nodes[idx]->store_local(rec.announce_entry);
                    } else {
                        send_dht(node_addr(idx), t.addr,
                                 dht::Message{dht::Store{nodes[idx]->id(), node_addr(idx),
                                                         rec.announce_entry}});
                    }
                }
                break;
            }
            case TaskRec::Purpose::Session: {
                size_t rounds = rec.task->rounds();
                bool local = rec.task->value_request_local();
                if (current) {
                    current->lookup_rounds = rounds;
                    current->lookup_legs = 2 * rounds + (local ? 1 : 2);
                }
                if (rec.task->failed()) {
                    if (current) current->lookup_failed = true;
                    break;
                }
                if (local) {
                    auto req = rec.task->local_value_request();
                    if (req)
                        flush_dht(idx, nodes[idx]->handle_find_value(*req, now, crypto_rng));
                }
                break;
            }
            case TaskRec::Purpose::Bench: {
                auto it = bench.find(rec.bench_id);
                if (it == bench.end()) break;
                BenchRec& br = it->second;
                br.rounds = rec.task->rounds();
                bool local = rec.task->value_request_local();
                bool to_self = local && br.surrogate == node_addr(idx);
                br.legs = 2 * br.rounds + (local ? (to_self ? 0 : 1) : 2);
                if (rec.task->failed()) {
                    br.sample = LookupSample{false, 0, br.rounds, br.legs, 0, br.key};
                    break;
                }
                if (local) {
                    auto req = rec.task->local_value_request();
                    if (req)
                        flush_dht(idx, nodes[idx]->handle_find_value(*req, now, crypto_rng));
                }
                break;
            }
        }
    }

    void on_value_response(Addr at, const dht::ValueResponse& vr) {
        auto bit = bench.find(vr.lookup_id);
        if (bit != bench.end()) {
            BenchRec& br = bit->second;
            if (!br.sample)
                br.sample = LookupSample{vr.found, now - br.start, br.rounds, br.legs,
                                         vr.provider_addr, br.key};
            return;
        }
        auto rit = relay_sessions.find(vr.lookup_id);
        if (rit == relay_sessions.end() || rit->second.self != at || rit->second.closed) return;
        RelaySession& rs = rit->second;
        auto cit = client_sessions.find(vr.lookup_id);
        if (cit == client_sessions.end()) return;
        ClientSession& cs = cit->second;

        if (!vr.found) {
            if (current) current->lookup_failed = true;
            return; // the session starves and the window expires
        }
        cs.t_value_at_x = now;
        if (current) {
            current->records.push_back(metrics::make_record(
                run_id(cs.session_id), "lookup_duration", double(now - cs.t_lookup_start) / 1000.0,
                "legs=" + std::to_string(current->lookup_legs) +
                    ";rounds=" + std::to_string(current->lookup_rounds)));
            current->exit_addr = vr.provider_addr;
        }
        chain_transition(vr.lookup_id, chain::Phase::Splicing);
        rs.exit = vr.provider_addr;

        chain::ChainInfoPayload info{vr.provider_addr, vr.c_pkd, vr.sig_r, vr.pk_r};
        send_tunnel(at, rs.client,
                    chain::TunnelMsg{chain::TunnelKind::ChainInfo, rs.session_id, cs.dest,
                                     chain::encode_chain_info(grp, info)});
        rs.open_attempts = 1;
        send_tunnel(at, rs.exit,
                    chain::TunnelMsg{chain::TunnelKind::TunnelOpen, rs.session_id, cs.dest, {}});
    }

    void on_notify_provider(Addr at, const dht::NotifyProvider& np) {
        notified_keys[at].emplace_back(np.pk_r, np.valid_until);
        for (auto& [sid, es] : exit_sessions) {
            if (es.self == at && es.parked && !es.closed) {
                auto [from, payload, dest] = *es.parked;
                es.parked.reset();
                gate(es, from, payload, dest);
            }
        }
    }

    // --- tunnel layer ------------------------------------------------------------

    void handle_tunnel(Addr from, Addr to, const Bytes& bytes) {
        auto msg = chain::decode_tunnel(bytes);
        if (!msg) return;
        auto dit = dest_by_addr.find(to);
        if (dit != dest_by_addr.end()) {
            dest_handle(dests.at(dit->second), from, *msg);
            return;
        }
        uint64_t sid = msg->session_id;
        if (auto it = relay_sessions.find(sid);
            it != relay_sessions.end() && it->second.self == to) {
            relay_handle(it->second, from, *msg);
            return;
        }
        if (auto it = client_sessions.find(sid);
            it != client_sessions.end() && it->second.self == to) {
            client_handle(it->second, from, *msg);
            return;
        }
        if (auto it = exit_sessions.find(sid); it != exit_sessions.end() && it->second.self == to) {
            exit_handle(it->second, from, *msg);
            return;
        }
        if (msg->kind == chain::TunnelKind::TunnelOpen && is_node(to)) {
            // first leg: S opening toward its relay
            if (auto cit = client_sessions.find(sid);
                cit != client_sessions.end() && cit->second.relay == to &&
                cit->second.self == from) {
                RelaySession rs;
                rs.session_id = sid;
                rs.self = to;
                rs.client = from;
                rs.deadline = now + cfg.window_t_s * 1000000ull;
                relay_sessions[sid] = rs;
                schedule_timer(rs.deadline, TimerKind::WindowDeadline, sid);
                send_tunnel(to, from,
                            chain::TunnelMsg{chain::TunnelKind::TunnelAccept, sid, msg->dest_addr,
                                             chain::encode_accept(rs.deadline)});
                return;
            }
            // second leg: a relay opening toward the chosen exit node
            ExitSession es;
            es.session_id = sid;
            es.self = to;
            es.relay = from;
            es.refusals_left = pending_exit_refusals;
            pending_exit_refusals = 0;
            auto [it, inserted] = exit_sessions.emplace(sid, std::move(es));
            if (inserted) exit_handle(it->second, from, *msg);
        }
    }

    // --- client S ---------------------------------------------------------------

    void client_handle(ClientSession& cs, Addr from, const chain::TunnelMsg& msg) {
        (void)from;
        chain::ChainState& st = chains.at(cs.session_id);
        switch (msg.kind) {
            case chain::TunnelKind::TunnelAccept: {
                if (st.phase != chain::Phase::Idle) return;
                auto deadline = chain::decode_accept(msg.payload);
                if (deadline) {
                    st.window_deadline = *deadline;
                    if (current) current->window_deadline_us = *deadline;
                }
                chain_transition(cs.session_id, chain::Phase::TempTunnel);
                // unauthorized traffic starts flowing immediately
                send_initial_hello(cs);
                start_appdata_ticks(cs);
                if (cs.opts.lookup_delay_s > 0) {
                    schedule_timer(now + cs.opts.lookup_delay_s * 1000000, TimerKind::LookupStart,
                                   cs.session_id);
                } else {
                    start_lookup(cs);
                }
                return;
            }
            case chain::TunnelKind::ChainInfo: {
                auto info = chain::decode_chain_info(grp, msg.payload);
                if (!info) return;
                cs.have_info = true;
                cs.exit_addr = info->exit_addr;
                cs.c_pkd = info->c_pkd;
                cs.sig_r = info->sig_r;
                cs.pk_r = info->pk_r;
                return;
            }
            case chain::TunnelKind::TcpRst: {
                if (st.phase != chain::Phase::Splicing) return;
                cs.rst_seen = true;
                cs.t_rst_at_s = now;
                chain_transition(cs.session_id, chain::Phase::AwaitingProof);
                if (current) {
                    current->records.push_back(
                        metrics::make_record(run_id(cs.session_id), "splice_duration",
                                             double(now - cs.t_value_at_x) / 1000.0, ""));
                }
                if (cs.opts.prove_delay_s > 0) {
                    schedule_timer(now + cs.opts.prove_delay_s * 1000000, TimerKind::ProveStart,
                                   cs.session_id);
                } else {
                    rehandshake(cs);
                }
                return;
            }
            case chain::TunnelKind::ServerHello: {
                if (cs.rst_seen) cs.rehs_established = true;
                return;
            }
            case chain::TunnelKind::Teardown: {
                cs.torn_down = true;
                if (st.phase != chain::Phase::Interrupted &&
                    st.phase != chain::Phase::Authorized && st.phase != chain::Phase::Idle)
                    chain_transition(cs.session_id, chain::Phase::Interrupted);
                return;
            }
            default:
                return; // downstream traffic needs no client action
        }
    }

    Bytes sni_ct_bytes(const attest::SniCiphertext& ct) const {
        return Writer(tag::kSniCiphertext)
            .field(grp.encode_element(ct.u))
            .field(grp.encode_element(ct.w))
            .take();
    }

    void send_initial_hello(ClientSession& cs) {
        auto enc = attest::encrypt_sni(grp, cs.domain, cs.pk_d, crypto_rng);
        chain::ClientHelloPayload payload{sni_ct_bytes(enc.ct), {}};
        send_tunnel(cs.self, cs.relay,
                    chain::TunnelMsg{chain::TunnelKind::ClientHello, cs.session_id, cs.dest,
                                     chain::encode_client_hello(payload)});
    }

    void start_lookup(ClientSession& cs) {
        chain::ChainState& st = chains.at(cs.session_id);
        if (st.phase != chain::Phase::TempTunnel) return;
        chain_transition(cs.session_id, chain::Phase::LookupPending);
        cs.eph = elgamal::keygen(grp, crypto_rng);
        cs.t_lookup_start = now;

        uint32_t idx = node_index(cs.self);
        auto rec = std::make_unique<TaskRec>();
        rec->purpose = TaskRec::Purpose::Session;
        rec->owner_idx = idx;
        rec->session_id = cs.session_id;
        dht::Key key = dht::domain_key(cs.domain);
        // S excludes its relay from the lookup path so X never sees the key
        rec->task = std::make_unique<dht::LookupTask>(
            dht::LookupTask::Kind::Value, key, dparams, nodes[idx]->id(), cs.self,
            nodes[idx]->table().closest(key, dparams.k), std::set<Addr>{cs.relay});
        rec->task->set_value_request(cs.relay, cs.eph.pk, cs.session_id);
        flush_dht(idx, rec->task->start(now, rpc_counter));
        flush_task_timeouts(*rec);
        post_process(*rec);
        tasks.push_back(std::move(rec));
    }

    void rehandshake(ClientSession& cs) {
        chain::ChainState& st = chains.at(cs.session_id);
        if (st.phase != chain::Phase::AwaitingProof) return;
        if (!cs.have_info) {
            interrupt_session(cs.session_id);
            return;
        }
        Bytes bundle, c_sni_bytes;
        try {
            std::tie(bundle, c_sni_bytes) = build_bundle(cs);
        } catch (const std::exception&) {
            interrupt_session(cs.session_id);
            return;
        }
        st.attestation = bundle;
        // the hello must carry the very ciphertext the proof speaks about
        chain::ClientHelloPayload payload{c_sni_bytes, bundle};
        send_tunnel(cs.self, cs.relay,
                    chain::TunnelMsg{chain::TunnelKind::ClientHello, cs.session_id, cs.dest,
                                     chain::encode_client_hello(payload)});
    }

    std::pair<Bytes, Bytes> build_bundle(ClientSession& cs) {
        attest::SniEncryption enc;
        if (cs.opts.dishonest_domain) {
            const DestActor& other = dest_for_domain(*cs.opts.dishonest_domain);
            enc = attest::encrypt_sni(grp, other.name, other.keys.pk, crypto_rng);
        } else {
            enc = attest::encrypt_sni(grp, cs.domain, cs.pk_d, crypto_rng);
        }
        attest::Witness w;
        w.e = cs.eph.sk;
        w.r = enc.r;
        w.m = enc.m;
        w.alpha = crypto_rng.scalar(grp.q);
        w.beta = crypto_rng.scalar(grp.q);
        w.gamma = crypto_rng.scalar(grp.q);
        Int t = grp.mod_q(w.e * w.r);
        attest::Statement st = attest::build_statement(
            grp, cs.eph.pk, cs.c_pkd, cs.sig_r, cs.pk_r, enc.ct,
            pedersen::commit(grp, w.e, w.alpha), pedersen::commit(grp, w.r, w.beta),
            pedersen::commit(grp, t, w.gamma));

        attest::Proof proof;
        if (cs.opts.dishonest_domain) {
            // a cheating client cannot pass the prover's self-check, so it
            // runs the sigma pieces directly and hopes
            attest::Nonces k = attest::sample_nonces(grp, crypto_rng);
            auto a = attest::announce(st, k);
            proof = attest::Proof{a, attest::respond(grp, w, k, attest::challenge_of(st, a))};
        } else {
            auto t0 = std::chrono::steady_clock::now();
            proof = attest::prove(st, w, crypto_rng);
            auto t1 = std::chrono::steady_clock::now();
            if (current) {
                double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
                current->records.push_back(
                    metrics::make_record(run_id(cs.session_id), "prove_time", ms, ""));
            }
        }
        return {attest::encode_bundle(st, proof), sni_ct_bytes(enc.ct)};
    }

    void start_appdata_ticks(ClientSession& cs) {
        if (cs.ticks_active) return;
        cs.ticks_active = true;
        schedule_timer(now + cs.opts.appdata_period_s * 1000000, TimerKind::AppDataTick,
                       cs.session_id);
    }

    void on_appdata_tick(uint64_t sid) {
        auto it = client_sessions.find(sid);
        if (it == client_sessions.end()) return;
        ClientSession& cs = it->second;
        if (cs.torn_down || cs.appdata_emitted >= cs.opts.appdata_total) {
            cs.ticks_active = false;
            return;
        }
        // the TLS stream is live before the RST and again after the
        // re-handshake completed; S knows nothing about the relay's clock
        bool stream_alive = !cs.rst_seen || cs.rehs_established;
        if (stream_alive) {
            uint64_t seq = cs.next_seq++;
            ++cs.appdata_emitted;
            if (current) current->appdata_sent.push_back(seq);
            send_tunnel(cs.self, cs.relay,
                        chain::TunnelMsg{chain::TunnelKind::AppData, sid, cs.dest,
                                         chain::encode_app_data(seq)});
        }
        schedule_timer(now + cs.opts.appdata_period_s * 1000000, TimerKind::AppDataTick, sid);
    }

    // --- relay X ------------------------------------------------------------------

    void relay_handle(RelaySession& rs, Addr from, const chain::TunnelMsg& msg) {
        if (rs.closed) {
            if (from == rs.client) {
                if (msg.kind == chain::TunnelKind::AppData && current) {
                    auto seq = chain::decode_app_data(msg.payload);
                    if (seq && *seq != kKeepaliveSeq) current->appdata_dropped.push_back(*seq);
                }
                if (!rs.teardown_sent) {
                    rs.teardown_sent = true;
                    send_tunnel(rs.self, rs.client,
                                chain::TunnelMsg{chain::TunnelKind::Teardown, rs.session_id, 0,
                                                 {}});
                }
            }
            return;
        }
        bool from_client = from == rs.client;
        bool from_exit_leg = rs.exit != 0 && from == rs.exit;

        if (from_exit_leg) {
            switch (msg.kind) {
                case chain::TunnelKind::TunnelAccept:
                    // splice: install the forwarding rule and push the
                    // in-flight stream bytes through the new leg
                    rs.spliced = true;
                    send_tunnel(rs.self, rs.exit,
                                chain::TunnelMsg{chain::TunnelKind::AppData, rs.session_id,
                                                 msg.dest_addr,
                                                 chain::encode_app_data(kKeepaliveSeq)});
                    return;
                case chain::TunnelKind::TunnelRefuse:
                    if (rs.open_attempts < 2) {
                        ++rs.open_attempts;
                        send_tunnel(rs.self, rs.exit,
                                    chain::TunnelMsg{chain::TunnelKind::TunnelOpen, rs.session_id,
                                                     msg.dest_addr, {}});
                    } else {
                        interrupt_session(rs.session_id);
                    }
                    return;
                case chain::TunnelKind::Authorized:
                    rs.authorized = true;
                    return;
                case chain::TunnelKind::Teardown:
                    if (!rs.authorized) interrupt_session(rs.session_id);
                    return;
                default:
                    // server-to-client traffic relayed back to S
                    send_tunnel(rs.self, rs.client, msg);
                    return;
            }
        }

        if (from_client && msg.kind == chain::TunnelKind::Teardown) {
            interrupt_session(rs.session_id);
            return;
        }
        if (from_client) {
            // the attestation window: unauthorized traffic is dropped once T expires
            if (!rs.authorized && now >= rs.deadline) {
                if (msg.kind == chain::TunnelKind::AppData && current) {
                    auto seq = chain::decode_app_data(msg.payload);
                    if (seq && *seq != kKeepaliveSeq) current->appdata_dropped.push_back(*seq);
                }
                interrupt_session(rs.session_id);
                return;
            }
            Addr next = rs.spliced ? rs.exit : msg.dest_addr;
            send_tunnel(rs.self, next, msg);
            return;
        }

        // pre-splice downstream traffic from the destination
        send_tunnel(rs.self, rs.client, msg);
    }

    void on_window_deadline(uint64_t sid) {
        auto it = relay_sessions.find(sid);
        if (it == relay_sessions.end() || it->second.closed || it->second.authorized) return;
        interrupt_session(sid, false);
    }

    // --- exit A --------------------------------------------------------------------

    void exit_handle(ExitSession& es, Addr from, const chain::TunnelMsg& msg) {
        if (es.closed) return;
        bool from_relay = from == es.relay;
        bool from_dest = dest_by_addr.count(from) > 0;

        switch (msg.kind) {
            case chain::TunnelKind::TunnelOpen: {
                if (!from_relay) return;
                if (es.refusals_left > 0) {
                    --es.refusals_left;
                    send_tunnel(es.self, es.relay,
                                chain::TunnelMsg{chain::TunnelKind::TunnelRefuse, es.session_id,
                                                 msg.dest_addr, {}});
                    return;
                }
                send_tunnel(es.self, es.relay,
                            chain::TunnelMsg{chain::TunnelKind::TunnelAccept, es.session_id,
                                             msg.dest_addr, {}});
                return;
            }
            case chain::TunnelKind::AppData: {
                if (from_relay) {
                    if (es.authorized || es.pass_through) send_tunnel(es.self, msg.dest_addr, msg);
                    return;
                }
                if (from_dest) send_tunnel(es.self, es.relay, msg);
                return;
            }
            case chain::TunnelKind::ClientHello: {
                if (!from_relay) return;
                es.pass_through = false;
                gate(es, from, msg.payload, msg.dest_addr);
                return;
            }
            case chain::TunnelKind::ServerHello:
            case chain::TunnelKind::TcpRst: {
                if (from_dest) send_tunnel(es.self, es.relay, msg);
                return;
            }
            case chain::TunnelKind::Teardown: {
                es.closed = true;
                return;
            }
            default:
                return;
        }
    }

    // the gate: signature by a notified, unexpired responder key plus the
    // zero-knowledge proof; either both hold or the chain is interrupted
    void gate(ExitSession& es, Addr from, const Bytes& hello_payload, Addr dest) {
        uint64_t sid = es.session_id;
        auto hello = chain::decode_client_hello(hello_payload);
        if (!hello || hello->bundle.empty()) {
            gate_reject(es, "missing bundle");
            return;
        }
        auto bundle = attest::decode_bundle(hello->bundle);
        if (!bundle) {
            gate_reject(es, "malformed bundle");
            return;
        }
        const attest::Statement& st = bundle->first;
        // the proof must speak about the ciphertext in this very ClientHello
        Bytes st_sni = Writer(tag::kSniCiphertext)
                           .field(grp.encode_element(st.c_sni.u))
                           .field(grp.encode_element(st.c_sni.w))
                           .take();
        if (st_sni != hello->c_sni_bytes) {
            gate_reject(es, "sni mismatch");
            return;
        }
        bool notified = false;
        for (const auto& [pk, until] : notified_keys[es.self]) {
            if (pk == st.pk_r && until > now) {
                notified = true;
                break;
            }
        }
        if (!notified) {
            if (!es.parked) {
                es.parked = std::make_tuple(from, hello_payload, dest);
                schedule_timer(now + kParkTimeoutUs, TimerKind::ParkTimeout, sid);
                return;
            }
            gate_reject(es, "not notified");
            return;
        }
        auto t0 = std::chrono::steady_clock::now();
        bool ok = attest::verify(st, bundle->second);
        auto t1 = std::chrono::steady_clock::now();
        if (current) {
            double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            current->records.push_back(metrics::make_record(run_id(sid), "verify_time", ms, ""));
        }
        if (!ok) {
            gate_reject(es, "proof rejected");
            return;
        }
        es.authorized = true;
        chain_transition(sid, chain::Phase::Authorized);
        if (current) {
            auto cit = client_sessions.find(sid);
            if (cit != client_sessions.end()) {
                current->records.push_back(
                    metrics::make_record(run_id(sid), "e2e_setup",
                                         double(now - cit->second.t_lookup_start) / 1000.0, ""));
            }
        }
        send_tunnel(es.self, es.relay, chain::TunnelMsg{chain::TunnelKind::Authorized, sid, 0, {}});
        // forward the re-handshake to the destination, bundle stripped
        chain::ClientHelloPayload forwarded{hello->c_sni_bytes, {}};
        send_tunnel(es.self, dest,
                    chain::TunnelMsg{chain::TunnelKind::ClientHello, sid, dest,
                                     chain::encode_client_hello(forwarded)});
    }

    void gate_reject(ExitSession& es, const char* why) {
        (void)why;
        es.closed = true;
        send_tunnel(es.self, es.relay,
                    chain::TunnelMsg{chain::TunnelKind::Teardown, es.session_id, 0, {}});
        interrupt_session(es.session_id);
    }

    void on_park_timeout(uint64_t sid) {
        auto it = exit_sessions.find(sid);
        if (it == exit_sessions.end() || it->second.closed) return;
        if (it->second.parked) {
            it->second.parked.reset();
            gate_reject(it->second, "responder key never notified");
        }
    }

    // --- destination D -------------------------------------------------------------

    void dest_handle(DestActor& d, Addr from, const chain::TunnelMsg& msg) {
        uint64_t sid = msg.session_id;
        switch (msg.kind) {
            case chain::TunnelKind::ClientHello: {
                auto hello = chain::decode_client_hello(msg.payload);
                if (!hello) return;
                Reader r(hello->c_sni_bytes);
                auto t = r.tag();
                auto fu = r.field();
                auto fw = r.field();
                if (!t || *t != tag::kSniCiphertext || !fu || !fw) return;
                auto u = grp.decode_element(*fu);
                auto w = grp.decode_element(*fw);
                if (!u || !w) return;
                attest::SniCiphertext ct{*u, *w};
                auto match = attest::domain_decrypt_sni_check(grp, ct, d.keys.sk, {d.name});
                if (!match) {
                    send_tunnel(d.addr, from,
                                chain::TunnelMsg{chain::TunnelKind::TcpRst, sid, d.addr, {}});
                    return;
                }
                d.streams[sid] = DestActor::Stream{from, true};
                send_tunnel(d.addr, from,
                            chain::TunnelMsg{chain::TunnelKind::ServerHello, sid, d.addr, {}});
                return;
            }
            case chain::TunnelKind::AppData: {
                auto stream = d.streams.find(sid);
                if (stream != d.streams.end() && stream->second.alive &&
                    stream->second.peer != from) {
                    // endpoint changed mid-stream: reset toward the new socket
                    stream->second.alive = false;
                    send_tunnel(d.addr, from,
                                chain::TunnelMsg{chain::TunnelKind::TcpRst, sid, d.addr, {}});
                    return;
                }
                if (stream == d.streams.end() || !stream->second.alive) return;
                auto seq = chain::decode_app_data(msg.payload);
                if (seq && *seq != kKeepaliveSeq) {
                    d.received_seqs[sid].push_back(*seq);
                    if (current) current->appdata_delivered.push_back(*seq);
                }
                return;
            }
            default:
                return;
        }
    }

    // --- session bookkeeping --------------------------------------------------------

    std::string run_id(uint64_t sid) const { return "s" + std::to_string(sid); }

    void chain_transition(uint64_t sid, chain::Phase to) {
        auto it = chains.find(sid);
        if (it == chains.end()) return;
        it->second.transition(to);
        if (current && current->session_id == sid) {
            current->phase_history = it->second.history;
            current->final_phase = it->second.phase;
        }
    }

    // notify_client=false leaves the first leg up; S learns when its next
    // packet is dropped (the teardown rides on the drop)
    void interrupt_session(uint64_t sid, bool notify_client = true) {
        auto it = chains.find(sid);
        if (it == chains.end()) return;
        chain::ChainState& st = it->second;
        if (st.phase == chain::Phase::Interrupted || st.phase == chain::Phase::Authorized ||
            st.phase == chain::Phase::Idle)
            return;
        chain_transition(sid, chain::Phase::Interrupted);
        auto rit = relay_sessions.find(sid);
        if (rit != relay_sessions.end() && !rit->second.closed) {
            RelaySession& rs = rit->second;
            rs.closed = true;
            if (notify_client) {
                rs.teardown_sent = true;
                send_tunnel(rs.self, rs.client,
                            chain::TunnelMsg{chain::TunnelKind::Teardown, sid, 0, {}});
            }
            if (rs.exit != 0)
                send_tunnel(rs.self, rs.exit,
                            chain::TunnelMsg{chain::TunnelKind::Teardown, sid, 0, {}});
        }
    }

    // --- timers ----------------------------------------------------------------------

    void on_timer(TimerKind kind, uint64_t arg, const std::string& sarg) {
        switch (kind) {
            case TimerKind::WindowDeadline:
                on_window_deadline(arg);
                break;
            case TimerKind::AppDataTick:
                on_appdata_tick(arg);
                break;
            case TimerKind::LookupStart: {
                auto it = client_sessions.find(arg);
                if (it != client_sessions.end()) {
                    const chain::ChainState& st = chains.at(arg);
                    if (st.phase == chain::Phase::TempTunnel) start_lookup(it->second);
                }
                break;
            }
            case TimerKind::ProveStart: {
                auto it = client_sessions.find(arg);
                if (it != client_sessions.end()) {
                    const chain::ChainState& st = chains.at(arg);
                    if (st.phase == chain::Phase::AwaitingProof) rehandshake(it->second);
                }
                break;
            }
            case TimerKind::ParkTimeout:
                on_park_timeout(arg);
                break;
            case TimerKind::Republish:
                republish(uint32_t(arg));
                break;
            case TimerKind::AnnounceRetry:
            case TimerKind::StartAnnounce:
                start_announce(uint32_t(arg), sarg);
                break;
            case TimerKind::JoinNode:
                join_node(uint32_t(arg));
                break;
            case TimerKind::StabilizeNode:
                stabilize_node(uint32_t(arg));
                break;
            case TimerKind::RefreshNode:
                refresh_node(uint32_t(arg));
                break;
            case TimerKind::BenchLookup:
                start_bench_lookup(arg);
                break;
        }
    }

    // --- build -------------------------------------------------------------------------

    void create_nodes() {
        for (uint32_t i = 0; i < cfg.n_nodes; ++i) {
            uint64_t nonce = crypto_rng.next_u64();
            nodes.push_back(std::make_unique<dht::Node>(
                grp, node_addr(i), nonce, dparams, crypto_rng.fork("node-" + std::to_string(i))));
        }
    }

    void join_node(uint32_t i) {
        // introduce ourselves to the bootstrap node, then look up our own id
        send_dht(node_addr(i), node_addr(0), dht::Message{dht::Ping{nodes[i]->id(), node_addr(i)}});
        auto rec = std::make_unique<TaskRec>();
        rec->purpose = TaskRec::Purpose::Join;
        rec->owner_idx = i;
        std::vector<dht::Contact> seeds{{nodes[0]->id(), node_addr(0), now}};
        rec->task =
            std::make_unique<dht::LookupTask>(dht::LookupTask::Kind::Closest, nodes[i]->id(),
                                              dparams, nodes[i]->id(), node_addr(i), seeds);
        flush_dht(i, rec->task->start(now, rpc_counter));
        flush_task_timeouts(*rec);
        post_process(*rec);
        tasks.push_back(std::move(rec));
    }

    void stabilize_node(uint32_t i) {
        start_refresh_lookup(i, nodes[i]->id());
    }

    // bucket refresh: walking toward a key inserts the responders met at
    // every distance scale into the walker's table
    void refresh_node(uint32_t i) {
        Bytes raw = choice_rng.bytes(32);
        dht::Key target;
        std::copy(raw.begin(), raw.end(), target.begin());
        start_refresh_lookup(i, target);
    }

    void start_refresh_lookup(uint32_t i, const dht::Key& target) {
        auto rec = std::make_unique<TaskRec>();
        rec->purpose = TaskRec::Purpose::Join;
        rec->owner_idx = i;
        rec->task = std::make_unique<dht::LookupTask>(
            dht::LookupTask::Kind::Closest, target, dparams, nodes[i]->id(), node_addr(i),
            nodes[i]->table().closest(target, dparams.k));
        flush_dht(i, rec->task->start(now, rpc_counter));
        flush_task_timeouts(*rec);
        post_process(*rec);
        tasks.push_back(std::move(rec));
    }

    void start_announce(uint32_t provider_idx, const std::string& domain) {
        const DestActor& d = dest_for_domain(domain);
        dht::Key key = dht::domain_key(domain);
        dht::WhitelistEntry entry{key, node_addr(provider_idx), d.keys.pk, now + dparams.ttl_us};
        auto seeds = nodes[provider_idx]->table().closest(key, dparams.k);
        if (seeds.empty() && cfg.n_nodes > 1) {
            schedule_timer(now + 1000000, TimerKind::AnnounceRetry, provider_idx, domain);
            return;
        }
        auto rec = std::make_unique<TaskRec>();
        rec->purpose = TaskRec::Purpose::Announce;
        rec->owner_idx = provider_idx;
        rec->announce_entry = entry;
        rec->task =
            std::make_unique<dht::LookupTask>(dht::LookupTask::Kind::Closest, key, dparams,
                                              nodes[provider_idx]->id(), node_addr(provider_idx),
                                              seeds);
        flush_dht(provider_idx, rec->task->start(now, rpc_counter));
        flush_task_timeouts(*rec);
        post_process(*rec);
        tasks.push_back(std::move(rec));
    }

    void republish(uint32_t provider_idx) {
        for (const auto& [domain, provider] : cfg.whitelist) {
            if (provider == provider_idx) start_announce(provider_idx, domain);
        }
        schedule_timer(now + dparams.ttl_us / 2, TimerKind::Republish, provider_idx);
    }

    void build() {
        if (built) return;
        create_nodes();
        uint64_t t = now;
        for (uint32_t i = 1; i < cfg.n_nodes; ++i) {
            t += 200000; // joins staggered 200 ms apart
            schedule_timer(t, TimerKind::JoinNode, i);
        }
        advance_until(t + 15000000);
        t = now;
        for (uint32_t i = 0; i < cfg.n_nodes; ++i) {
            t += 100000;
            schedule_timer(t, TimerKind::StabilizeNode, i);
        }
        advance_until(t + 15000000);
        t = now;
        for (uint32_t i = 0; i < cfg.n_nodes; ++i) {
            t += 100000;
            schedule_timer(t, TimerKind::RefreshNode, i);
        }
        advance_until(t + 15000000);
        t = now;
        for (const auto& [domain, provider] : cfg.whitelist) {
            dest_for_domain(domain); // fix destination actors and keys up front
            t += 100000;
            schedule_timer(t, TimerKind::StartAnnounce, provider, domain);
        }
        advance_until(t + 15000000);
        std::set<uint32_t> providers;
        for (const auto& [domain, provider] : cfg.whitelist) providers.insert(provider);
        for (uint32_t p : providers)
            schedule_timer(now + dparams.ttl_us / 2, TimerKind::Republish, p);
        built = true;
    }

    // --- scenario ------------------------------------------------------------------------

    ScenarioResult run_scenario(const ScenarioOpts& opts) {
        if (!built) build();
        ScenarioResult result;
        uint64_t sid = ++session_counter;
        result.session_id = sid;
        result.t_started_us = now;
        current = &result;

        chain::ChainState st;
        st.session_id = sid;
        st.client = node_addr(opts.client);
        st.relay = opts.relay_unreachable ? 0 : node_addr(opts.relay);
        chains[sid] = st;

        if (opts.relay_unreachable) {
            result.start_error = true;
            result.final_phase = chain::Phase::Idle;
            result.t_finished_us = now;
            current = nullptr;
            return result;
        }

        ClientSession cs;
        cs.opts = opts;
        cs.session_id = sid;
        cs.self = node_addr(opts.client);
        cs.relay = node_addr(opts.relay);
        cs.domain = opts.domain;
        DestActor& d = dest_for_domain(opts.domain);
        cs.dest = d.addr;
        cs.pk_d = d.keys.pk; // the published ESNI key, known to every client
        chains[sid].dest = d.addr;
        client_sessions[sid] = cs;
        pending_exit_refusals = opts.exit_tunnel_failures;
        active_opts = &opts;

        send_tunnel(cs.self, cs.relay,
                    chain::TunnelMsg{chain::TunnelKind::TunnelOpen, sid, cs.dest, {}});

        uint64_t horizon = now + (cfg.window_t_s + opts.lookup_delay_s + opts.prove_delay_s +
                                  opts.appdata_period_s * opts.appdata_total + 60) *
                                     1000000ull;
        advance_until(horizon);

        const chain::ChainState& final_st = chains.at(sid);
        result.final_phase = final_st.phase;
        result.phase_history = final_st.history;
        result.t_finished_us = now;
        current = nullptr;
        active_opts = nullptr;
        return result;
    }

    // --- bench ----------------------------------------------------------------------------

    void start_bench_lookup(uint64_t bench_id) {
        auto it = bench.find(bench_id);
        if (it == bench.end()) return;
        BenchRec& br = it->second;
        br.start = now;

        std::vector<std::string> domains;
        for (const auto& [domain, provider] : cfg.whitelist) domains.push_back(domain);
        if (domains.empty()) return;
        const std::string& domain = domains[size_t(choice_rng.below(domains.size()))];
        uint32_t initiator = uint32_t(choice_rng.below(cfg.n_nodes));
        dht::Key key = dht::domain_key(domain);
        br.key = key;

        auto rec = std::make_unique<TaskRec>();
        rec->purpose = TaskRec::Purpose::Bench;
        rec->owner_idx = initiator;
        rec->bench_id = bench_id;
        std::set<Addr> exclude;
        if (br.surrogate != node_addr(initiator)) exclude.insert(br.surrogate);
        rec->task = std::make_unique<dht::LookupTask>(
            dht::LookupTask::Kind::Value, key, dparams, nodes[initiator]->id(),
            node_addr(initiator), nodes[initiator]->table().closest(key, dparams.k), exclude);
        Drbg eph_rng = crypto_rng.fork("bench-eph-" + std::to_string(bench_id));
        rec->task->set_value_request(br.surrogate, elgamal::keygen(grp, eph_rng).pk, bench_id);
        flush_dht(initiator, rec->task->start(now, rpc_counter));
        flush_task_timeouts(*rec);
        post_process(*rec);
        tasks.push_back(std::move(rec));
    }

    std::vector<LookupSample> bench_lookup(size_t n_queries) {
        if (!built) build();
        std::vector<uint64_t> ids;
        uint64_t t = now;
        for (size_t i = 0; i < n_queries; ++i) {
            uint64_t id = ++bench_counter;
            BenchRec br;
            uint32_t surrogate = uint32_t(choice_rng.below(cfg.n_nodes));
            br.surrogate = node_addr(surrogate);
            bench[id] = br;
            ids.push_back(id);
            t += 500000; // stagger 500 ms apart
            schedule_timer(t, TimerKind::BenchLookup, id);
        }
        advance_until(t + 30000000);
        std::vector<LookupSample> out;
        for (uint64_t id : ids) {
            const BenchRec& br = bench.at(id);
            out.push_back(
                br.sample.value_or(LookupSample{false, 0, br.rounds, br.legs, 0, br.key}));
        }
        return out;
    }

    // --- privacy audit -----------------------------------------------------------------------

    PrivacyReport audit_scenario(const ScenarioResult& result, const ScenarioOpts& opts) const {
        PrivacyReport report;
        auto violation = [&](const std::string& what) {
            report.ok = false;
            report.violations.push_back(what);
        };
        if (grp.element_bytes < 8) {
            violation("audit requires the std256 group (byte patterns too short in toy)");
            return report;
        }
        const std::string& domain = opts.domain;
        Bytes domain_bytes = to_bytes(domain);
        dht::Key key = dht::domain_key(domain);
        Bytes key_bytes(key.begin(), key.end());
        auto dit = dests.find(domain);
        Bytes pk_d_bytes = dit != dests.end() ? grp.encode_element(dit->second.keys.pk) : Bytes{};
        Bytes m_bytes = grp.encode_scalar(attest::encode_sni_name(grp, domain));
        Addr s_addr = node_addr(opts.client);
        Addr x_addr = node_addr(opts.relay);

        for (const auto& [addr, observations] : obs) {
            bool is_x = addr == x_addr;
            bool is_s = addr == s_addr;
            for (const Observation& o : observations) {
                if (o.t_us < result.t_started_us || o.t_us > result.t_finished_us) continue;
                std::string where = name_of(addr) + " " + o.kind + " t=" + std::to_string(o.t_us);
                // the domain string never travels, to anyone
                if (bytes_contain(o.payload, domain_bytes))
                    violation("domain plaintext at " + where);
                // neither does the encoded SNI exponent
                if (bytes_contain(o.payload, m_bytes)) violation("sni exponent at " + where);
                // H(domain) and pk_D: X must never see them at all; others
                // only within the DHT's own routing/storage duty
                bool routing_duty = !is_x && (o.kind == "find_node_req" ||
                                              o.kind == "find_value" || o.kind == "store");
                if (!routing_duty && !is_s) {
                    if (bytes_contain(o.payload, key_bytes)) violation("hashed domain at " + where);
                    if (!pk_d_bytes.empty() && bytes_contain(o.payload, pk_d_bytes))
                        violation("domain public key at " + where);
                }
                // VALUE requests carry the relay's address, never the client's
                if (o.kind == "find_value" && o.layer == Layer::Dht) {
                    auto msg = dht::decode_message(grp, o.payload);
                    if (msg) {
                        const auto& fv = std::get<dht::FindValue>(*msg);
                        if (fv.lookup_id == result.session_id && fv.reply_to != x_addr)
                            violation("value request not routed to X at " + where);
                        if (fv.reply_to == s_addr)
                            violation("value request exposes S at " + where);
                    }
                }
            }
        }
        return report;
    }

    std::set<Addr> global_providers(const dht::Key& key) const {
        std::set<Addr> out;
        for (const auto& node : nodes) {
            auto it = node->stored().find(key);
            if (it == node->stored().end()) continue;
            for (const auto& entry : it->second) {
                if (entry.expires_at > now) out.insert(entry.provider_addr);
            }
        }
        return out;
    }
};

// --- World façade ---------------------------------------------------------------------

World::World(const SimConfig& cfg) : impl_(std::make_unique<Impl>(cfg)) {}
World::~World() = default;

void World::build() { impl_->build(); }

ScenarioResult World::run_scenario(const ScenarioOpts& opts) { return impl_->run_scenario(opts); }

std::vector<LookupSample> World::bench_lookup(size_t n_queries) {
    return impl_->bench_lookup(n_queries);
}

PrivacyReport World::audit_scenario(const ScenarioResult& result, const ScenarioOpts& opts) const {
    return impl_->audit_scenario(result, opts);
}

uint64_t World::now_us() const { return impl_->now; }
const Group& World::group() const { return impl_->grp; }
const SimConfig& World::config() const { return impl_->cfg; }
const std::vector<std::string>& World::event_log() const { return impl_->log; }

const std::vector<Observation>& World::observations(Addr addr) const {
    auto it = impl_->obs.find(addr);
    if (it == impl_->obs.end()) return impl_->no_obs;
    return it->second;
}

std::string World::node_name(Addr addr) const { return impl_->name_of(addr); }
Addr World::node_addr(uint32_t index) const { return impl_->node_addr(index); }

Addr World::dest_addr_of(const std::string& domain) const {
    auto it = impl_->dests.find(domain);
    return it == impl_->dests.end() ? 0 : it->second.addr;
}

const dht::Node& World::dht_node(uint32_t index) const { return *impl_->nodes.at(index); }

const Int& World::domain_public_key(const std::string& domain) const {
    return impl_->dests.at(domain).keys.pk;
}

std::set<Addr> World::global_providers(const dht::Key& key) const {
    return impl_->global_providers(key);
}

// --- standard scenarios ----------------------------------------------------------------

SimRunOutput run_standard_scenarios(const SimConfig& cfg) {
    if (!cfg.whitelist.empty() && cfg.n_nodes < 3)
        throw std::invalid_argument("sim run: scenarios need at least 3 nodes");
    World world(cfg);
    world.build();
    SimRunOutput out;
    for (const auto& [domain, provider] : cfg.whitelist) {
        ScenarioOpts opts;
        opts.domain = domain;
        opts.client = (provider + 1) % cfg.n_nodes;
        opts.relay = (provider + 2) % cfg.n_nodes;
        ScenarioResult res = world.run_scenario(opts);
        out.all_authorized = out.all_authorized && res.final_phase == chain::Phase::Authorized;
        for (const auto& r : res.records) out.records.push_back(r);
        out.scenarios.push_back(std::move(res));
    }
    std::string text;
    for (const std::string& line : world.event_log()) {
        text += line;
        text += '\n';
    }
    out.events_text = std::move(text);
    return out;
}

// --- zkp bench -----------------------------------------------------------------------

ZkpBenchResult bench_zkp(size_t iters, const std::string& group_label, uint64_t seed) {
    Group grp = group_setup(group_label);
    Drbg rng(seed, "bench-zkp");
    ZkpBenchResult out;
    for (size_t i = 0; i < iters; ++i) {
        auto inst = attest::sample_instance(grp, rng, "bench" + std::to_string(i) + ".example");
        auto t0 = std::chrono::steady_clock::now();
        attest::Proof proof = attest::prove(inst.st, inst.w, rng);
        auto t1 = std::chrono::steady_clock::now();
        bool ok = attest::verify(inst.st, proof);
        auto t2 = std::chrono::steady_clock::now();
        if (!ok) throw std::logic_error("bench_zkp: honest proof rejected");
        double prove_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        double verify_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
        out.prove_ms.push_back(prove_ms);
        out.verify_ms.push_back(verify_ms);
        std::string id = "zkp" + std::to_string(i);
        out.records.push_back(metrics::make_record(id, "prove_time", prove_ms, group_label));
        out.records.push_back(metrics::make_record(id, "verify_time", verify_ms, group_label));
    }
    return out;
}

} // namespace sim
} // namespace zkvpn
