#pragma once

#include "zkvpn/encoding.hpp"
#include "zkvpn/group.hpp"
#include "zkvpn/rng.hpp"

namespace zkvpn {
namespace elgamal {

struct Keypair {
    Int sk; // scalar in [1, q-1]
    Int pk; // g^sk
};

struct Ciphertext {
    Int c1; // g^s
    Int c2; // m * pk^s

    bool operator==(const Ciphertext&) const = default;
};

struct Encryption {
    Ciphertext ct;
    Int randomness; // s, returned for callers that need it as a witness
};

Keypair keygen(const Group& grp, Drbg& rng);

// m must be a subgroup element; throws std::invalid_argument otherwise.
Encryption encrypt(const Group& grp, const Int& m, const Int& pk, Drbg& rng);
Encryption encrypt_with_randomness(const Group& grp, const Int& m, const Int& pk, const Int& s);

// c2 * c1^(-sk); throws on elements outside the subgroup.
Int decrypt(const Group& grp, const Ciphertext& ct, const Int& sk);

// tag 0x10: fields c1, c2
Bytes encode(const Group& grp, const Ciphertext& ct);
std::optional<Ciphertext> decode(const Group& grp, const Bytes& data);

} // namespace elgamal
} // namespace zkvpn
