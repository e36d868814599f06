#include "zkvpn/elgamal.hpp"

#include <stdexcept>

namespace zkvpn {
namespace elgamal {

Keypair keygen(const Group& grp, Drbg& rng) {
    Keypair kp;
    kp.sk = rng.nonzero_scalar(grp.q);
    kp.pk = grp.pow(grp.g, kp.sk);
    return kp;
}

Encryption encrypt(const Group& grp, const Int& m, const Int& pk, Drbg& rng) {
    return encrypt_with_randomness(grp, m, pk, rng.nonzero_scalar(grp.q));
}

Encryption encrypt_with_randomness(const Group& grp, const Int& m, const Int& pk, const Int& s) {
    if (!grp.is_element(m)) throw std::invalid_argument("elgamal: message not in subgroup");
    Encryption out;
    out.randomness = s;
    out.ct.c1 = grp.pow(grp.g, s);
    out.ct.c2 = grp.mul(m, grp.pow(pk, s));
    return out;
}

Int decrypt(const Group& grp, const Ciphertext& ct, const Int& sk) {
    if (!grp.is_element(ct.c1) || !grp.is_element(ct.c2))
        throw std::invalid_argument("elgamal: ciphertext element outside subgroup");
    return grp.mul(ct.c2, grp.pow(ct.c1, -sk));
}

Bytes encode(const Group& grp, const Ciphertext& ct) {
    return Writer(tag::kElGamalCiphertext)
        .field(grp.encode_element(ct.c1))
        .field(grp.encode_element(ct.c2))
        .take();
}

std::optional<Ciphertext> decode(const Group& grp, const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != tag::kElGamalCiphertext) return std::nullopt;
    auto f1 = r.field();
    auto f2 = r.field();
    if (!f1 || !f2 || !r.exhausted()) return std::nullopt;
    auto c1 = grp.decode_element(*f1);
    auto c2 = grp.decode_element(*f2);
    if (!c1 || !c2) return std::nullopt;
    return Ciphertext{*c1, *c2};
}

} // namespace elgamal
} // namespace zkvpn
