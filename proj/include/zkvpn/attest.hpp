#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "zkvpn/elgamal.hpp"
#include "zkvpn/group.hpp"
#include "zkvpn/pedersen.hpp"
#include "zkvpn/rng.hpp"
#include "zkvpn/schnorr.hpp"

namespace zkvpn {
namespace attest {

// Exponential-ElGamal encryption of an SNI: the name is carried as the
// exponent m = H("SNI-ENCODE", name), so "encrypted under pk_D" becomes an
// algebraic relation a sigma protocol can cover.
struct SniCiphertext {
    Int u; // g^r
    Int w; // g^m * pk_D^r

    bool operator==(const SniCiphertext&) const = default;
};

// Public statement of the attestation. By construction it can never hold
// pk_D, the SNI bytes, m, or the ephemeral secret key; sig_R over
// canonical(C_pkD) under pk_R is checked whenever a statement is built or
// decoded.
struct Statement {
    Group grp;
    Int pk_eg;                     // g^e, ephemeral ElGamal public key
    elgamal::Ciphertext c_pkd;     // Enc(pk_D, pk_eg)
    schnorr::Signature sig_r;      // over canonical(c_pkd)
    Int pk_r;                      // responder's signing key
    SniCiphertext c_sni;
    pedersen::Commitment com_e;    // g^e h^alpha
    pedersen::Commitment com_r;    // g^r h^beta
    pedersen::Commitment com_t;    // g^(e*r) h^gamma
};

struct Witness {
    Int e;     // ephemeral secret key, pk_eg = g^e
    Int r;     // SNI encryption randomness, u = g^r
    Int m;     // encoded SNI
    Int alpha; // blinding of com_e
    Int beta;  // blinding of com_r
    Int gamma; // blinding of com_t
};

// Proved statement, with t := e*r and delta := gamma - e*beta:
//   g^e = pk_eg
//   g^r = u
//   g^m * c2^r * c1^(-t) = w          (SNI encrypted under Dec(c_pkd, e))
//   com_e, com_r, com_t open to e, r, t
//   com_r^e * h^delta = com_t         (t really is the product e*r)
// AND-composed with one shared Fiat-Shamir challenge; reusing k_e, k_r, k_t
// across clauses is what ties the exponents together.
struct Responses {
    Int z_e, z_r, z_m, z_t, z_alpha, z_beta, z_gamma, z_delta;
};

struct Proof {
    std::array<Int, 7> a; // announcements A1..A7
    Responses z;
};

struct Nonces {
    Int k_e, k_r, k_m, k_t, k_alpha, k_beta, k_gamma, k_delta;
};

// --- SNI encryption -------------------------------------------------------

Int encode_sni_name(const Group& grp, const std::string& name);

struct SniEncryption {
    SniCiphertext ct;
    Int r;
    Int m;
};

// Throws std::invalid_argument on an empty name.
SniEncryption encrypt_sni(const Group& grp, const std::string& name, const Int& pk_d, Drbg& rng);
SniEncryption encrypt_sni_with(const Group& grp, const std::string& name, const Int& pk_d,
                               const Int& r);

// Destination-side check: w * u^(-sk_d) = g^m is matched against the
// candidates the destination actually serves.
std::optional<std::string> domain_decrypt_sni_check(const Group& grp, const SniCiphertext& ct,
                                                    const Int& sk_d,
                                                    const std::vector<std::string>& candidates);

// --- statement / proof ----------------------------------------------------

// Throws std::invalid_argument if sig_r does not verify over
// canonical(c_pkd) under pk_r.
Statement build_statement(const Group& grp, const Int& pk_eg, const elgamal::Ciphertext& c_pkd,
                          const schnorr::Signature& sig_r, const Int& pk_r,
                          const SniCiphertext& c_sni, const pedersen::Commitment& com_e,
                          const pedersen::Commitment& com_r, const pedersen::Commitment& com_t);

bool witness_consistent(const Statement& st, const Witness& w);

// Interactive sigma-protocol pieces. prove() composes them with the
// Fiat-Shamir challenge; tests use them directly for special-soundness and
// forgery experiments.
Nonces sample_nonces(const Group& grp, Drbg& rng);
std::array<Int, 7> announce(const Statement& st, const Nonces& k);
Responses respond(const Group& grp, const Witness& w, const Nonces& k, const Int& challenge);
Int challenge_of(const Statement& st, const std::array<Int, 7>& a);
bool equations_hold(const Statement& st, const std::array<Int, 7>& a, const Int& challenge,
                    const Responses& z);

// Throws std::invalid_argument on a witness inconsistent with the statement;
// self-verifies before returning.
Proof prove(const Statement& st, const Witness& w, Drbg& rng);

bool verify(const Statement& st, const Proof& proof);

// Sigma-protocol simulator: samples the responses, solves the verification
// equations for the announcements. The transcript satisfies equations_hold
// for the given challenge by construction.
Proof simulate(const Statement& st, const Int& challenge, Drbg& rng);

// Fresh honest instance with all secrets, for benchmarks and demos: domain
// keypair, ephemeral keypair, responder signature, SNI encryption,
// commitments.
struct SampleInstance {
    Statement st;
    Witness w;
    Int sk_d;
    Int pk_d;
    std::string sni;
};

SampleInstance sample_instance(const Group& grp, Drbg& rng, const std::string& sni);

// --- wire format ----------------------------------------------------------

// statement: tag 0x13, fields p,q,g,h, pk_eg, c_pkd, sig_r, pk_r, c_sni,
//            com_e, com_r, com_t
// proof:     tag 0x14, fields A1..A7, z_e, z_r, z_m, z_t, z_alpha, z_beta,
//            z_gamma, z_delta
// bundle:    tag 0x15, fields statement, proof
Bytes encode_statement(const Statement& st);
Bytes encode_proof(const Group& grp, const Proof& p);
Bytes encode_bundle(const Statement& st, const Proof& p);

// Decoders reject (nullopt) on malformed bytes, unknown group parameters,
// subgroup violations, or a statement whose sig_r does not verify.
std::optional<Statement> decode_statement(const Bytes& data);
std::optional<Proof> decode_proof(const Group& grp, const Bytes& data);
std::optional<std::pair<Statement, Proof>> decode_bundle(const Bytes& data);

} // namespace attest
} // namespace zkvpn
