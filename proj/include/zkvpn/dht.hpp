#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "zkvpn/elgamal.hpp"
#include "zkvpn/encoding.hpp"
#include "zkvpn/group.hpp"
#include "zkvpn/rng.hpp"
#include "zkvpn/schnorr.hpp"
#include "zkvpn/sha256.hpp"

namespace zkvpn {
namespace dht {

using Addr = uint32_t;
using Key = Digest;    // 256-bit identifier space
using NodeId = Digest; // hash(address || join-nonce)

NodeId make_node_id(Addr addr, uint64_t join_nonce);
Key domain_key(const std::string& domain); // H(lowercase domain name)

// bitwise XOR interpreted as a big-endian integer
Key xor_distance(const Key& a, const Key& b);
bool distance_less(const Key& a, const Key& b);
// index of the highest differing bit (0 = least significant); -1 when equal
int bucket_index(const Key& distance);

struct Contact {
    NodeId id;
    Addr addr;
    uint64_t last_seen;
};

struct ContactInfo {
    NodeId id;
    Addr addr;

    bool operator==(const ContactInfo&) const = default;
};

// 256 k-buckets, most recently seen in front, stalest evicted when full.
// The node's own id is never stored.
class RoutingTable {
public:
    RoutingTable(NodeId self, size_t k) : self_(self), k_(k) {}

    void update(const NodeId& id, Addr addr, uint64_t now);
    std::vector<Contact> closest(const Key& target, size_t n) const;
    std::vector<Contact> all_contacts() const;
    size_t size() const;
    const std::vector<Contact>& bucket(size_t i) const { return buckets_[i]; }
    const NodeId& self() const { return self_; }

private:
    NodeId self_;
    size_t k_;
    std::array<std::vector<Contact>, 256> buckets_;
};

struct WhitelistEntry {
    Key key;            // H(domain)
    Addr provider_addr; // exit node carrying this domain
    Int pk_d;
    uint64_t expires_at; // sim-time microseconds

    bool operator==(const WhitelistEntry&) const = default;
};

// --- wire messages ----------------------------------------------------------
//
// Canonical encoding per message (tag, then length-prefixed fields in the
// order written below). FIND_NODE doubles as its own reply, flagged by dir;
// the contacts field packs 36-byte (id || be32 addr) records. FIND_VALUE
// deliberately carries a reply_to address instead of the sender's.

struct Ping {
    NodeId sender_id;
    Addr sender_addr;
};

struct Store {
    NodeId sender_id;
    Addr sender_addr;
    WhitelistEntry entry;
};

struct FindNode {
    bool is_response;
    uint64_t rpc_id;
    NodeId sender_id;
    Addr sender_addr;
    Key target;
    std::vector<ContactInfo> contacts; // responses only
};

struct FindValue {
    uint64_t lookup_id;
    Addr reply_to; // X's address, never the initiator's
    Key target;
    Int pk_eg;
};

struct ValueResponse {
    uint64_t lookup_id;
    bool found;
    Addr provider_addr;
    elgamal::Ciphertext c_pkd;
    schnorr::Signature sig_r;
    Int pk_r;
};

struct NotifyProvider {
    Int pk_r;
    uint64_t valid_until;
};

using Message = std::variant<Ping, Store, FindNode, FindValue, ValueResponse, NotifyProvider>;

Bytes encode_message(const Group& grp, const Message& msg);
std::optional<Message> decode_message(const Group& grp, const Bytes& data);

struct Outbound {
    Addr to;
    Message msg;
};

// --- node -------------------------------------------------------------------

struct Params {
    size_t k = 8;
    size_t alpha = 3;
    size_t r_rep = 3;
    uint64_t ttl_us = 1800ull * 1000000;          // whitelist entry lifetime
    uint64_t notify_window_us = 120ull * 1000000; // NotifyProvider validity
    size_t max_rounds = 32;
    uint64_t query_timeout_us = 2000ull * 1000; // per-query timeout
};

// DHT state machine of one node. Handlers mutate local state and return the
// messages to send; delivery, latency and loss belong to the caller (the
// simulator's event loop in production, a synchronous bus in tests).
class Node {
public:
    Node(const Group& grp, Addr addr, uint64_t join_nonce, const Params& params, Drbg key_rng);

    const NodeId& id() const { return id_; }
    Addr addr() const { return addr_; }
    const schnorr::Keypair& signing_keys() const { return sig_kp_; }
    RoutingTable& table() { return table_; }
    const RoutingTable& table() const { return table_; }
    const Params& params() const { return params_; }

    void observe(const NodeId& id, Addr addr, uint64_t now);

    std::vector<Outbound> handle_ping(const Ping& msg, uint64_t now);
    // ack is the return value; expired entries are rejected
    bool handle_store(const Store& msg, uint64_t now);
    FindNode handle_find_node(const FindNode& req, uint64_t now);
    std::vector<Outbound> handle_find_value(const FindValue& msg, uint64_t now, Drbg& rng);

    void store_local(const WhitelistEntry& entry);
    size_t expire_entries(uint64_t now);

    const std::map<Key, std::vector<WhitelistEntry>>& stored() const { return store_; }

private:
    const Group& grp_;
    Addr addr_;
    NodeId id_;
    Params params_;
    schnorr::Keypair sig_kp_;
    RoutingTable table_;
    std::map<Key, std::vector<WhitelistEntry>> store_;
};

// --- iterative lookup -------------------------------------------------------

// Initiator-side state machine for one iterative lookup. A round queries the
// alpha closest unqueried candidates and waits for them all; the lookup
// converges when every candidate in the current top-k has been queried. For
// Kind::Value the terminal FIND_VALUE goes to the closest responsive node
// (handled locally when that is the initiator itself) and the response is
// routed to reply_to, never back here.
class LookupTask {
public:
    enum class Kind { Closest, Value };

    LookupTask(Kind kind, Key target, const Params& params, NodeId self_id, Addr self_addr,
               std::vector<Contact> seeds, std::set<Addr> exclude = {});

    void set_value_request(Addr reply_to, const Int& pk_eg, uint64_t lookup_id);

    std::vector<Outbound> start(uint64_t now, uint64_t& rpc_counter);
    std::vector<Outbound> on_response(const FindNode& resp, uint64_t now, uint64_t& rpc_counter);
    std::vector<Outbound> on_timeout(uint64_t rpc_id, uint64_t now, uint64_t& rpc_counter);

    bool owns_rpc(uint64_t rpc_id) const { return pending_.count(rpc_id) > 0; }
    bool done() const { return done_; }
    bool failed() const { return failed_; }
    // value lookups: true when the FIND_VALUE targets the initiator itself
    bool value_request_local() const { return value_local_; }
    std::optional<FindValue> local_value_request() const { return local_request_; }
    size_t rounds() const { return rounds_; }
    const Key& target() const { return target_; }
    std::vector<ContactInfo> closest_result(size_t n) const;
    // (rpc_id, deadline) pairs for queries issued since the last call
    std::vector<std::pair<uint64_t, uint64_t>> take_new_timeouts();

private:
    struct Candidate {
        ContactInfo contact;
        bool queried = false;
        bool responded = false;
        bool unreachable = false;
    };

    void add_candidate(const ContactInfo& c);
    std::vector<Outbound> advance(uint64_t now, uint64_t& rpc_counter);
    std::vector<Outbound> finish(uint64_t now);
    bool round_settled() const;
    bool converged() const;

    Kind kind_;
    Key target_;
    Params params_;
    NodeId self_id_;
    Addr self_addr_;
    std::set<Addr> exclude_;
    std::vector<Candidate> candidates_; // kept sorted by distance to target
    std::map<uint64_t, Addr> pending_;  // rpc_id -> queried addr
    std::vector<std::pair<uint64_t, uint64_t>> new_timeouts_;
    size_t rounds_ = 0;
    bool done_ = false;
    bool failed_ = false;
    bool value_local_ = false;
    std::optional<FindValue> local_request_;
    Addr value_reply_to_ = 0;
    Int value_pk_eg_;
    uint64_t value_lookup_id_ = 0;
};

} // namespace dht
} // namespace zkvpn
