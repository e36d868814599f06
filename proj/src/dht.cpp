#include "zkvpn/dht.hpp"

#include <algorithm>

namespace zkvpn {
namespace dht {

NodeId make_node_id(Addr addr, uint64_t join_nonce) {
    Bytes material = to_bytes("node-id");
    append_be32(material, addr);
    append_be64(material, join_nonce);
    return sha256(material);
}

Key domain_key(const std::string& domain) { return sha256(to_bytes(domain)); }

Key xor_distance(const Key& a, const Key& b) {
    Key out;
    for (size_t i = 0; i < out.size(); ++i) out[i] = uint8_t(a[i] ^ b[i]);
    return out;
}

bool distance_less(const Key& a, const Key& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

int bucket_index(const Key& distance) {
    for (size_t i = 0; i < distance.size(); ++i) {
        if (distance[i] == 0) continue;
        int msb = 7;
        while (((distance[i] >> msb) & 1) == 0) --msb;
        return int(8 * (distance.size() - 1 - i)) + msb;
    }
    return -1;
}

// --- RoutingTable -----------------------------------------------------------

void RoutingTable::update(const NodeId& id, Addr addr, uint64_t now) {
    int idx = bucket_index(xor_distance(self_, id));
    if (idx < 0) return; // own id is never stored
    auto& bucket = buckets_[size_t(idx)];
    auto it = std::find_if(bucket.begin(), bucket.end(),
                           [&](const Contact& c) { return c.id == id; });
    if (it != bucket.end()) {
        bucket.erase(it);
        bucket.insert(bucket.begin(), Contact{id, addr, now});
        return;
    }
    if (bucket.size() >= k_) {
        // evict the least recently seen (back of the list)
        bucket.pop_back();
    }
    bucket.insert(bucket.begin(), Contact{id, addr, now});
}

std::vector<Contact> RoutingTable::all_contacts() const {
    std::vector<Contact> out;
    for (const auto& bucket : buckets_) out.insert(out.end(), bucket.begin(), bucket.end());
    return out;
}

std::vector<Contact> RoutingTable::closest(const Key& target, size_t n) const {
    std::vector<Contact> out = all_contacts();
    std::sort(out.begin(), out.end(), [&](const Contact& a, const Contact& b) {
        return distance_less(xor_distance(a.id, target), xor_distance(b.id, target));
    });
    if (out.size() > n) out.resize(n);
    return out;
}

size_t RoutingTable::size() const {
    size_t n = 0;
    for (const auto& bucket : buckets_) n += bucket.size();
    return n;
}

// --- message codec ----------------------------------------------------------

namespace {

Bytes key_bytes(const Key& k) { return Bytes(k.begin(), k.end()); }

std::optional<Key> key_from(const Bytes& b) {
    if (b.size() != 32) return std::nullopt;
    Key k;
    std::copy(b.begin(), b.end(), k.begin());
    return k;
}

Bytes contacts_bytes(const std::vector<ContactInfo>& contacts) {
    Bytes out;
    for (const auto& c : contacts) {
        out.insert(out.end(), c.id.begin(), c.id.end());
        append_be32(out, c.addr);
    }
    return out;
}

std::optional<std::vector<ContactInfo>> contacts_from(const Bytes& b) {
    if (b.size() % 36 != 0) return std::nullopt;
    std::vector<ContactInfo> out;
    for (size_t i = 0; i < b.size(); i += 36) {
        ContactInfo c;
        std::copy(b.begin() + i, b.begin() + i + 32, c.id.begin());
        c.addr = (uint32_t(b[i + 32]) << 24) | (uint32_t(b[i + 33]) << 16) |
                 (uint32_t(b[i + 34]) << 8) | uint32_t(b[i + 35]);
        out.push_back(c);
    }
    return out;
}

} // namespace

Bytes encode_message(const Group& grp, const Message& msg) {
    if (const auto* m = std::get_if<Ping>(&msg)) {
        return Writer(tag::kPing).field(key_bytes(m->sender_id)).field_u32(m->sender_addr).take();
    }
    if (const auto* m = std::get_if<Store>(&msg)) {
        return Writer(tag::kStore)
            .field(key_bytes(m->sender_id))
            .field_u32(m->sender_addr)
            .field(key_bytes(m->entry.key))
            .field_u32(m->entry.provider_addr)
            .field(grp.encode_element(m->entry.pk_d))
            .field_u64(m->entry.expires_at)
            .take();
    }
    if (const auto* m = std::get_if<FindNode>(&msg)) {
        return Writer(tag::kFindNode)
            .field_u8(m->is_response ? 1 : 0)
            .field_u64(m->rpc_id)
            .field(key_bytes(m->sender_id))
            .field_u32(m->sender_addr)
            .field(key_bytes(m->target))
            .field(contacts_bytes(m->contacts))
            .take();
    }
    if (const auto* m = std::get_if<FindValue>(&msg)) {
        return Writer(tag::kFindValue)
            .field_u64(m->lookup_id)
            .field_u32(m->reply_to)
            .field(key_bytes(m->target))
            .field(grp.encode_element(m->pk_eg))
            .take();
    }
    if (const auto* m = std::get_if<ValueResponse>(&msg)) {
        Writer w(tag::kValueResponse);
        w.field_u64(m->lookup_id).field_u8(m->found ? 1 : 0).field_u32(m->provider_addr);
        if (m->found) {
            w.field(elgamal::encode(grp, m->c_pkd))
                .field(schnorr::encode(grp, m->sig_r))
                .field(grp.encode_element(m->pk_r));
        } else {
            w.field(Bytes{}).field(Bytes{}).field(Bytes{});
        }
        return w.take();
    }
    const auto& m = std::get<NotifyProvider>(msg);
    return Writer(tag::kNotifyProvider)
        .field(grp.encode_element(m.pk_r))
        .field_u64(m.valid_until)
        .take();
}

std::optional<Message> decode_message(const Group& grp, const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t) return std::nullopt;
    switch (*t) {
        case tag::kPing: {
            auto id = r.field();
            auto addr = r.field_u32();
            if (!id || !addr || !r.exhausted()) return std::nullopt;
            auto key = key_from(*id);
            if (!key) return std::nullopt;
            return Message{Ping{*key, *addr}};
        }
        case tag::kStore: {
            auto id = r.field();
            auto addr = r.field_u32();
            auto key = r.field();
            auto provider = r.field_u32();
            auto pk_d = r.field();
            auto expires = r.field_u64();
            if (!id || !addr || !key || !provider || !pk_d || !expires || !r.exhausted())
                return std::nullopt;
            auto sender = key_from(*id);
            auto k = key_from(*key);
            auto pk = grp.decode_element(*pk_d);
            if (!sender || !k || !pk) return std::nullopt;
            return Message{Store{*sender, *addr, WhitelistEntry{*k, *provider, *pk, *expires}}};
        }
        case tag::kFindNode: {
            auto dir = r.field_u8();
            auto rpc = r.field_u64();
            auto id = r.field();
            auto addr = r.field_u32();
            auto target = r.field();
            auto contacts = r.field();
            if (!dir || !rpc || !id || !addr || !target || !contacts || !r.exhausted())
                return std::nullopt;
            auto sender = key_from(*id);
            auto tk = key_from(*target);
            auto cs = contacts_from(*contacts);
            if (!sender || !tk || !cs || *dir > 1) return std::nullopt;
            return Message{FindNode{*dir == 1, *rpc, *sender, *addr, *tk, *cs}};
        }
        case tag::kFindValue: {
            auto lookup = r.field_u64();
            auto reply_to = r.field_u32();
            auto target = r.field();
            auto pk_eg = r.field();
            if (!lookup || !reply_to || !target || !pk_eg || !r.exhausted()) return std::nullopt;
            auto tk = key_from(*target);
            auto pk = grp.decode_element(*pk_eg);
            if (!tk || !pk) return std::nullopt;
            return Message{FindValue{*lookup, *reply_to, *tk, *pk}};
        }
        case tag::kValueResponse: {
            auto lookup = r.field_u64();
            auto found = r.field_u8();
            auto provider = r.field_u32();
            auto ct = r.field();
            auto sig = r.field();
            auto pk_r = r.field();
            if (!lookup || !found || !provider || !ct || !sig || !pk_r || !r.exhausted())
                return std::nullopt;
            if (*found > 1) return std::nullopt;
            ValueResponse out;
            out.lookup_id = *lookup;
            out.found = *found == 1;
            out.provider_addr = *provider;
            if (out.found) {
                auto c = elgamal::decode(grp, *ct);
                auto s = schnorr::decode(grp, *sig);
                auto pk = grp.decode_element(*pk_r);
                if (!c || !s || !pk) return std::nullopt;
                out.c_pkd = *c;
                out.sig_r = *s;
                out.pk_r = *pk;
            } else if (!ct->empty() || !sig->empty() || !pk_r->empty()) {
                return std::nullopt;
            }
            return Message{out};
        }
        case tag::kNotifyProvider: {
            auto pk_r = r.field();
            auto valid = r.field_u64();
            if (!pk_r || !valid || !r.exhausted()) return std::nullopt;
            auto pk = grp.decode_element(*pk_r);
            if (!pk) return std::nullopt;
            return Message{NotifyProvider{*pk, *valid}};
        }
        default:
            return std::nullopt;
    }
}

// --- Node -------------------------------------------------------------------

Node::Node(const Group& grp, Addr addr, uint64_t join_nonce, const Params& params, Drbg key_rng)
    : grp_(grp),
      addr_(addr),
      id_(make_node_id(addr, join_nonce)),
      params_(params),
      sig_kp_(schnorr::keygen(grp, key_rng)),
      table_(id_, params.k) {}

void Node::observe(const NodeId& id, Addr addr, uint64_t now) {
    if (id == id_) return;
    table_.update(id, addr, now);
}

std::vector<Outbound> Node::handle_ping(const Ping& msg, uint64_t now) {
    observe(msg.sender_id, msg.sender_addr, now);
    return {};
}

bool Node::handle_store(const Store& msg, uint64_t now) {
    observe(msg.sender_id, msg.sender_addr, now);
    if (msg.entry.expires_at <= now) return false;
    store_local(msg.entry);
    return true;
}

void Node::store_local(const WhitelistEntry& entry) {
    auto& entries = store_[entry.key];
    // re-publication replaces the entry for the same provider
    entries.erase(std::remove_if(entries.begin(), entries.end(),
                                 [&](const WhitelistEntry& e) {
                                     return e.provider_addr == entry.provider_addr;
                                 }),
                  entries.end());
    entries.push_back(entry);
}

FindNode Node::handle_find_node(const FindNode& req, uint64_t now) {
    observe(req.sender_id, req.sender_addr, now);
    FindNode resp;
    resp.is_response = true;
    resp.rpc_id = req.rpc_id;
    resp.sender_id = id_;
    resp.sender_addr = addr_;
    resp.target = req.target;
    for (const Contact& c : table_.closest(req.target, params_.k))
        resp.contacts.push_back(ContactInfo{c.id, c.addr});
    return resp;
}

std::vector<Outbound> Node::handle_find_value(const FindValue& msg, uint64_t now, Drbg& rng) {
    // deliberately no observe(): a VALUE request carries no requester address
    expire_entries(now);
    std::vector<Outbound> out;
    auto it = store_.find(msg.target);
    if (it == store_.end() || it->second.empty()) {
        out.push_back({msg.reply_to, ValueResponse{msg.lookup_id, false, 0, {}, {}, Int(0)}});
        return out;
    }
    // uniform pick among the stored entries for this key
    const WhitelistEntry& entry = it->second[size_t(rng.below(it->second.size()))];
    auto enc = elgamal::encrypt(grp_, entry.pk_d, msg.pk_eg, rng);
    auto sig = schnorr::sign(grp_, elgamal::encode(grp_, enc.ct), sig_kp_.sk, rng);
    out.push_back({msg.reply_to, ValueResponse{msg.lookup_id, true, entry.provider_addr, enc.ct,
                                               sig, sig_kp_.pk}});
    out.push_back(
        {entry.provider_addr, NotifyProvider{sig_kp_.pk, now + params_.notify_window_us}});
    return out;
}

size_t Node::expire_entries(uint64_t now) {
    size_t purged = 0;
    for (auto it = store_.begin(); it != store_.end();) {
        auto& entries = it->second;
        size_t before = entries.size();
        entries.erase(std::remove_if(entries.begin(), entries.end(),
                                     [&](const WhitelistEntry& e) { return e.expires_at <= now; }),
                      entries.end());
        purged += before - entries.size();
        if (entries.empty())
            it = store_.erase(it);
        else
            ++it;
    }
    return purged;
}

// --- LookupTask ---------------------------------------------------------------

LookupTask::LookupTask(Kind kind, Key target, const Params& params, NodeId self_id, Addr self_addr,
                       std::vector<Contact> seeds, std::set<Addr> exclude)
    : kind_(kind),
      target_(target),
      params_(params),
      self_id_(self_id),
      self_addr_(self_addr),
      exclude_(std::move(exclude)) {
    for (const Contact& c : seeds) add_candidate(ContactInfo{c.id, c.addr});
}

void LookupTask::set_value_request(Addr reply_to, const Int& pk_eg, uint64_t lookup_id) {
    value_reply_to_ = reply_to;
    value_pk_eg_ = pk_eg;
    value_lookup_id_ = lookup_id;
}

void LookupTask::add_candidate(const ContactInfo& c) {
    if (c.id == self_id_ || c.addr == self_addr_) return;
    if (exclude_.count(c.addr)) return;
    for (const Candidate& existing : candidates_)
        if (existing.contact.addr == c.addr) return;
    Candidate cand{c, false, false, false};
    auto pos = std::lower_bound(candidates_.begin(), candidates_.end(), cand,
                                [&](const Candidate& a, const Candidate& b) {
                                    return distance_less(xor_distance(a.contact.id, target_),
                                                         xor_distance(b.contact.id, target_));
                                });
    candidates_.insert(pos, cand);
}

bool LookupTask::round_settled() const { return pending_.empty(); }

bool LookupTask::converged() const {
    size_t considered = 0;
    for (const Candidate& c : candidates_) {
        if (c.unreachable) continue;
        if (!c.queried || !c.responded) return false;
        if (++considered >= params_.k) break;
    }
    return true;
}

std::vector<Outbound> LookupTask::start(uint64_t now, uint64_t& rpc_counter) {
    return advance(now, rpc_counter);
}

std::vector<Outbound> LookupTask::advance(uint64_t now, uint64_t& rpc_counter) {
    if (done_) return {};
    if (converged()) return finish(now);
    if (rounds_ >= params_.max_rounds) {
        done_ = true;
        failed_ = true;
        return {};
    }
    std::vector<Outbound> out;
    size_t issued = 0;
    for (Candidate& c : candidates_) {
        if (issued >= params_.alpha) break;
        if (c.queried || c.unreachable) continue;
        c.queried = true;
        uint64_t rpc = ++rpc_counter;
        pending_[rpc] = c.contact.addr;
        new_timeouts_.emplace_back(rpc, now + params_.query_timeout_us);
        out.push_back({c.contact.addr, FindNode{false, rpc, self_id_, self_addr_, target_, {}}});
        ++issued;
    }
    if (issued == 0) return finish(now);
    ++rounds_;
    return out;
}

std::vector<Outbound> LookupTask::finish(uint64_t) {
    done_ = true;
    if (kind_ == Kind::Closest) return {};

    // terminal VALUE request to the closest responsive node (or ourselves)
    const Candidate* best = nullptr;
    for (const Candidate& c : candidates_) {
        if (c.responded && !c.unreachable) {
            best = &c;
            break;
        }
    }
    FindValue req{value_lookup_id_, value_reply_to_, target_, value_pk_eg_};
    bool self_closer = best == nullptr || distance_less(xor_distance(self_id_, target_),
                                                        xor_distance(best->contact.id, target_));
    if (self_closer) {
        value_local_ = true;
        local_request_ = req;
        return {};
    }
    return {{best->contact.addr, req}};
}

std::vector<Outbound> LookupTask::on_response(const FindNode& resp, uint64_t now,
                                              uint64_t& rpc_counter) {
    auto it = pending_.find(resp.rpc_id);
    if (it == pending_.end() || done_) return {};
    Addr from = it->second;
    pending_.erase(it);
    for (Candidate& c : candidates_) {
        if (c.contact.addr == from) {
            c.responded = true;
            break;
        }
    }
    for (const ContactInfo& c : resp.contacts) add_candidate(c);
    if (round_settled()) return advance(now, rpc_counter);
    return {};
}

std::vector<Outbound> LookupTask::on_timeout(uint64_t rpc_id, uint64_t now,
                                             uint64_t& rpc_counter) {
    auto it = pending_.find(rpc_id);
    if (it == pending_.end() || done_) return {};
    Addr from = it->second;
    pending_.erase(it);
    for (Candidate& c : candidates_) {
        if (c.contact.addr == from) {
            c.unreachable = true;
            break;
        }
    }
    if (round_settled()) return advance(now, rpc_counter);
    return {};
}

std::vector<ContactInfo> LookupTask::closest_result(size_t n) const {
    std::vector<ContactInfo> out;
    out.push_back(ContactInfo{self_id_, self_addr_});
    for (const Candidate& c : candidates_)
        if (c.responded && !c.unreachable) out.push_back(c.contact);
    std::sort(out.begin(), out.end(), [&](const ContactInfo& a, const ContactInfo& b) {
        return distance_less(xor_distance(a.id, target_), xor_distance(b.id, target_));
    });
    if (out.size() > n) out.resize(n);
    return out;
}

std::vector<std::pair<uint64_t, uint64_t>> LookupTask::take_new_timeouts() {
    return std::exchange(new_timeouts_, {});
}

} // namespace dht
} // namespace zkvpn
