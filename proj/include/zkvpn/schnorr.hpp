#pragma once

#include "zkvpn/encoding.hpp"
#include "zkvpn/group.hpp"
#include "zkvpn/rng.hpp"

namespace zkvpn {
namespace schnorr {

struct Keypair {
    Int sk;
    Int pk; // g^sk
};

struct Signature {
    Int challenge;
    Int response;

    bool operator==(const Signature&) const = default;
};

Keypair keygen(const Group& grp, Drbg& rng);

// Fiat-Shamir Schnorr: c = H("SCHNORR-SIG", params || pk || g^k || msg),
// z = k + c*sk mod q.
Signature sign(const Group& grp, const Bytes& msg, const Int& sk, Drbg& rng);
Signature sign_with_nonce(const Group& grp, const Bytes& msg, const Int& sk, const Int& nonce);

// Recomputes the challenge from g^z * pk^(-c); reject is a value, not an error.
bool verify(const Group& grp, const Bytes& msg, const Signature& sig, const Int& pk);

// tag 0x11: fields challenge, response
Bytes encode(const Group& grp, const Signature& sig);
std::optional<Signature> decode(const Group& grp, const Bytes& data);

} // namespace schnorr
} // namespace zkvpn
