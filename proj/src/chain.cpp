#include "zkvpn/chain.hpp"

#include <stdexcept>

#include "zkvpn/sha256.hpp"

namespace zkvpn {
namespace chain {

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Idle: return "Idle";
        case Phase::TempTunnel: return "TempTunnel";
        case Phase::LookupPending: return "LookupPending";
        case Phase::Splicing: return "Splicing";
        case Phase::AwaitingProof: return "AwaitingProof";
        case Phase::Authorized: return "Authorized";
        case Phase::Interrupted: return "Interrupted";
    }
    return "?";
}

bool legal_transition(Phase from, Phase to) {
    switch (from) {
        case Phase::Idle:
            return to == Phase::TempTunnel;
        case Phase::TempTunnel:
            return to == Phase::LookupPending || to == Phase::Interrupted;
        case Phase::LookupPending:
            return to == Phase::Splicing || to == Phase::Interrupted;
        case Phase::Splicing:
            return to == Phase::AwaitingProof || to == Phase::Interrupted;
        case Phase::AwaitingProof:
            return to == Phase::Authorized || to == Phase::Interrupted;
        case Phase::Authorized:
        case Phase::Interrupted:
            return false; // terminal
    }
    return false;
}

void ChainState::transition(Phase to) {
    if (!legal_transition(phase, to)) {
        throw std::logic_error(std::string("illegal phase transition ") + phase_name(phase) +
                               " -> " + phase_name(to));
    }
    history.emplace_back(phase, to);
    phase = to;
}

const char* tunnel_kind_name(TunnelKind k) {
    switch (k) {
        case TunnelKind::TunnelOpen: return "tunnel_open";
        case TunnelKind::TunnelAccept: return "tunnel_accept";
        case TunnelKind::TunnelRefuse: return "tunnel_refuse";
        case TunnelKind::ClientHello: return "client_hello";
        case TunnelKind::ServerHello: return "server_hello";
        case TunnelKind::TcpRst: return "tcp_rst";
        case TunnelKind::AppData: return "app_data";
        case TunnelKind::ChainInfo: return "chain_info";
        case TunnelKind::Authorized: return "authorized";
        case TunnelKind::Teardown: return "teardown";
    }
    return "?";
}

Bytes encode_tunnel(const TunnelMsg& msg) {
    return Writer(0x20)
        .field_u8(uint8_t(msg.kind))
        .field_u64(msg.session_id)
        .field_u32(msg.dest_addr)
        .field(msg.payload)
        .take();
}

std::optional<TunnelMsg> decode_tunnel(const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != 0x20) return std::nullopt;
    auto kind = r.field_u8();
    auto session = r.field_u64();
    auto dest = r.field_u32();
    auto payload = r.field();
    if (!kind || !session || !dest || !payload || !r.exhausted()) return std::nullopt;
    if (*kind > uint8_t(TunnelKind::Teardown)) return std::nullopt;
    return TunnelMsg{TunnelKind(*kind), *session, *dest, *payload};
}

Bytes encode_client_hello(const ClientHelloPayload& p) {
    return Writer(0x21).field(p.c_sni_bytes).field(p.bundle).take();
}

std::optional<ClientHelloPayload> decode_client_hello(const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != 0x21) return std::nullopt;
    auto c_sni = r.field();
    auto bundle = r.field();
    if (!c_sni || !bundle || !r.exhausted()) return std::nullopt;
    return ClientHelloPayload{*c_sni, *bundle};
}

Bytes encode_chain_info(const Group& grp, const ChainInfoPayload& p) {
    return Writer(0x22)
        .field_u32(p.exit_addr)
        .field(elgamal::encode(grp, p.c_pkd))
        .field(schnorr::encode(grp, p.sig_r))
        .field(grp.encode_element(p.pk_r))
        .take();
}

std::optional<ChainInfoPayload> decode_chain_info(const Group& grp, const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != 0x22) return std::nullopt;
    auto exit_addr = r.field_u32();
    auto c_pkd = r.field();
    auto sig = r.field();
    auto pk_r = r.field();
    if (!exit_addr || !c_pkd || !sig || !pk_r || !r.exhausted()) return std::nullopt;
    auto ct = elgamal::decode(grp, *c_pkd);
    auto s = schnorr::decode(grp, *sig);
    auto pk = grp.decode_element(*pk_r);
    if (!ct || !s || !pk) return std::nullopt;
    return ChainInfoPayload{*exit_addr, *ct, *s, *pk};
}

Bytes encode_accept(uint64_t window_deadline) {
    return Writer(0x23).field_u64(window_deadline).take();
}

std::optional<uint64_t> decode_accept(const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != 0x23) return std::nullopt;
    auto deadline = r.field_u64();
    if (!deadline || !r.exhausted()) return std::nullopt;
    return deadline;
}

Bytes encode_app_data(uint64_t seq) { return Writer(0x24).field_u64(seq).take(); }

std::optional<uint64_t> decode_app_data(const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != 0x24) return std::nullopt;
    auto seq = r.field_u64();
    if (!seq || !r.exhausted()) return std::nullopt;
    return seq;
}

std::string log_line(uint64_t t_us, const std::string& node, const char* direction,
                     const std::string& event_kind, uint64_t session_id, const Bytes& payload) {
    Digest d = sha256(payload);
    std::string digest = hex_encode(Bytes(d.begin(), d.begin() + 8));
    return std::to_string(t_us) + "," + node + "," + direction + "," + event_kind + "," +
           std::to_string(session_id) + "," + digest;
}

} // namespace chain
} // namespace zkvpn
