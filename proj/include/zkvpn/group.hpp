#pragma once

#include <optional>
#include <string>

#include <gmpxx.h>

#include "zkvpn/bytes.hpp"

namespace zkvpn {

using Int = mpz_class;

// Prime-order subgroup of Z_p^*: q prime, q | p-1, g and h of order q.
// h is derived from g by hashing counter values into the field and raising
// to the cofactor, so nobody knows log_g(h).
//
// Labels:
//   "toy"    p=23, q=11, g=2 - small enough to enumerate and hand-check
//   "std256" 2048-bit p, 256-bit q, embedded constants
struct Group {
    Int p;
    Int q;
    Int g;
    Int h;
    std::string label;
    size_t element_bytes; // fixed canonical width, ceil(bits(p)/8)
    size_t scalar_bytes;  // ceil(bits(q)/8)

    Int pow(const Int& base, const Int& exp) const;
    Int mul(const Int& a, const Int& b) const;
    Int inv(const Int& a) const;

    // subgroup membership: x in [1, p) and x^q = 1
    bool is_element(const Int& x) const;
    bool is_scalar(const Int& s) const { return s >= 0 && s < q; }

    Int mod_q(const Int& v) const;

    Bytes encode_element(const Int& x) const;
    Bytes encode_scalar(const Int& s) const;
    std::optional<Int> decode_element(const Bytes& b) const; // checks membership
    std::optional<Int> decode_scalar(const Bytes& b) const;  // checks range

    // group-parameter preamble (p, q, g, h as length-prefixed fields),
    // bound into every transcript hashed in this group
    Bytes params_bytes() const;

    bool operator==(const Group& other) const {
        return p == other.p && q == other.q && g == other.g && h == other.h;
    }
};

// Deterministic setup from a label; throws std::invalid_argument on an
// unknown label.
Group group_setup(const std::string& label);

// Fiat-Shamir style hashing into Z_q: SHA-256 over
// be32(|sep|) || sep || be32(counter) || transcript, top bits of the digest
// reduced by rejection sampling so the output is unbiased mod q.
Int hash_to_scalar(const Group& grp, const std::string& domain_separator, const Bytes& transcript);

// Minimal big-endian bytes of an arbitrary non-negative integer.
Bytes int_to_bytes(const Int& v);
Int bytes_to_int(const Bytes& b);

} // namespace zkvpn
