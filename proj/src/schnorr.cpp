#include "zkvpn/schnorr.hpp"

namespace zkvpn {
namespace schnorr {

namespace {

Int challenge_of(const Group& grp, const Int& pk, const Int& commitment, const Bytes& msg) {
    Bytes transcript = grp.params_bytes();
    Bytes pk_b = grp.encode_element(pk);
    append_be32(transcript, uint32_t(pk_b.size()));
    append(transcript, pk_b);
    Bytes r_b = grp.encode_element(commitment);
    append_be32(transcript, uint32_t(r_b.size()));
    append(transcript, r_b);
    append_be32(transcript, uint32_t(msg.size()));
    append(transcript, msg);
    return hash_to_scalar(grp, "SCHNORR-SIG", transcript);
}

} // namespace

Keypair keygen(const Group& grp, Drbg& rng) {
    Keypair kp;
    kp.sk = rng.nonzero_scalar(grp.q);
    kp.pk = grp.pow(grp.g, kp.sk);
    return kp;
}

Signature sign(const Group& grp, const Bytes& msg, const Int& sk, Drbg& rng) {
    return sign_with_nonce(grp, msg, sk, rng.nonzero_scalar(grp.q));
}

Signature sign_with_nonce(const Group& grp, const Bytes& msg, const Int& sk, const Int& nonce) {
    Int commitment = grp.pow(grp.g, nonce);
    Signature sig;
    sig.challenge = challenge_of(grp, grp.pow(grp.g, sk), commitment, msg);
    sig.response = grp.mod_q(nonce + sig.challenge * sk);
    return sig;
}

bool verify(const Group& grp, const Bytes& msg, const Signature& sig, const Int& pk) {
    if (!grp.is_element(pk)) return false;
    if (!grp.is_scalar(sig.challenge) || !grp.is_scalar(sig.response)) return false;
    // g^z * pk^(-c) = g^(k + c*sk - c*sk) = g^k
    Int commitment = grp.mul(grp.pow(grp.g, sig.response), grp.pow(pk, -sig.challenge));
    return challenge_of(grp, pk, commitment, msg) == sig.challenge;
}

Bytes encode(const Group& grp, const Signature& sig) {
    return Writer(tag::kSignature)
        .field(grp.encode_scalar(sig.challenge))
        .field(grp.encode_scalar(sig.response))
        .take();
}

std::optional<Signature> decode(const Group& grp, const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != tag::kSignature) return std::nullopt;
    auto f1 = r.field();
    auto f2 = r.field();
    if (!f1 || !f2 || !r.exhausted()) return std::nullopt;
    auto c = grp.decode_scalar(*f1);
    auto z = grp.decode_scalar(*f2);
    if (!c || !z) return std::nullopt;
    return Signature{*c, *z};
}

} // namespace schnorr
} // namespace zkvpn
