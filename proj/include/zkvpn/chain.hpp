#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zkvpn/dht.hpp"
#include "zkvpn/elgamal.hpp"
#include "zkvpn/encoding.hpp"
#include "zkvpn/schnorr.hpp"

namespace zkvpn {
namespace chain {

using Addr = dht::Addr;

// Session lifecycle of a tunnel chain S -> X -> A. Interrupted is absorbing.
enum class Phase {
    Idle,
    TempTunnel,
    LookupPending,
    Splicing,
    AwaitingProof,
    Authorized,
    Interrupted,
};

const char* phase_name(Phase p);
bool legal_transition(Phase from, Phase to);

// Authoritative per-session state, owned by the simulator's event loop.
// transition() refuses illegal moves and keeps the full history so traces
// can be model-checked afterwards.
struct ChainState {
    uint64_t session_id = 0;
    Phase phase = Phase::Idle;
    Addr client = 0; // S
    Addr relay = 0;  // X
    Addr exit = 0;   // A, known after the lookup
    Addr dest = 0;   // D
    uint64_t window_deadline = 0; // sim-time us; set on TempTunnel entry
    std::optional<Bytes> attestation; // bundle S sent during the re-handshake
    std::vector<std::pair<Phase, Phase>> history;

    // throws std::logic_error on an illegal move
    void transition(Phase to);
};

// --- tunnel-layer messages ---------------------------------------------------
//
// One envelope for everything the chain carries. dest_addr is the visible
// destination IP; hiding it is out of scope (the network layer sees it
// anyway). ClientHello payloads hold the encrypted SNI and, after the
// splice, the attestation bundle; plaintext SNI bytes never appear.

enum class TunnelKind : uint8_t {
    TunnelOpen = 0,
    TunnelAccept = 1,
    TunnelRefuse = 2,
    ClientHello = 3,
    ServerHello = 4,
    TcpRst = 5,
    AppData = 6,
    ChainInfo = 7,
    Authorized = 8,
    Teardown = 9,
};

const char* tunnel_kind_name(TunnelKind k);

struct TunnelMsg {
    TunnelKind kind;
    uint64_t session_id = 0;
    Addr dest_addr = 0; // 0 when not applicable
    Bytes payload;      // kind-specific composite, may be empty
};

// envelope: tag 0x20, fields kind, session_id, dest_addr, payload
Bytes encode_tunnel(const TunnelMsg& msg);
std::optional<TunnelMsg> decode_tunnel(const Bytes& data);

// ClientHello payload: tag 0x21, fields c_sni (composite), bundle (may be empty)
struct ClientHelloPayload {
    Bytes c_sni_bytes; // SniCiphertext composite
    Bytes bundle;      // statement+proof bundle, empty before the splice
};
Bytes encode_client_hello(const ClientHelloPayload& p);
std::optional<ClientHelloPayload> decode_client_hello(const Bytes& data);

// ChainInfo payload (X -> S): tag 0x22, fields exit_addr, c_pkd, sig_r, pk_r
struct ChainInfoPayload {
    Addr exit_addr;
    elgamal::Ciphertext c_pkd;
    schnorr::Signature sig_r;
    Int pk_r;
};
Bytes encode_chain_info(const Group& grp, const ChainInfoPayload& p);
std::optional<ChainInfoPayload> decode_chain_info(const Group& grp, const Bytes& data);

// TunnelAccept payload: tag 0x23, field window_deadline (us)
Bytes encode_accept(uint64_t window_deadline);
std::optional<uint64_t> decode_accept(const Bytes& data);

// AppData payload: tag 0x24, field seq
Bytes encode_app_data(uint64_t seq);
std::optional<uint64_t> decode_app_data(const Bytes& data);

// --- event log ---------------------------------------------------------------

// One line per event: time,node,direction,event_kind,session_id,payload_digest
std::string log_line(uint64_t t_us, const std::string& node, const char* direction,
                     const std::string& event_kind, uint64_t session_id, const Bytes& payload);

} // namespace chain
} // namespace zkvpn
