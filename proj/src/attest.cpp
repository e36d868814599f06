#include "zkvpn/attest.hpp"

#include <stdexcept>

namespace zkvpn {
namespace attest {

namespace {

const Group& known_group(const std::string& label) {
    static const Group toy = group_setup("toy");
    static const Group std256 = group_setup("std256");
    if (label == "toy") return toy;
    return std256;
}

std::optional<Group> match_known_group(const Int& p, const Int& q, const Int& g, const Int& h) {
    for (const char* label : {"toy", "std256"}) {
        const Group& grp = known_group(label);
        if (grp.p == p && grp.q == q && grp.g == g && grp.h == h) return grp;
    }
    return std::nullopt;
}

} // namespace

Int encode_sni_name(const Group& grp, const std::string& name) {
    return hash_to_scalar(grp, "SNI-ENCODE", to_bytes(name));
}

SniEncryption encrypt_sni(const Group& grp, const std::string& name, const Int& pk_d, Drbg& rng) {
    return encrypt_sni_with(grp, name, pk_d, rng.nonzero_scalar(grp.q));
}

SniEncryption encrypt_sni_with(const Group& grp, const std::string& name, const Int& pk_d,
                               const Int& r) {
    if (name.empty()) throw std::invalid_argument("encrypt_sni: empty domain name");
    SniEncryption out;
    out.m = encode_sni_name(grp, name);
    out.r = r;
    out.ct.u = grp.pow(grp.g, r);
    out.ct.w = grp.mul(grp.pow(grp.g, out.m), grp.pow(pk_d, r));
    return out;
}

std::optional<std::string> domain_decrypt_sni_check(const Group& grp, const SniCiphertext& ct,
                                                    const Int& sk_d,
                                                    const std::vector<std::string>& candidates) {
    Int g_m = grp.mul(ct.w, grp.pow(ct.u, -sk_d));
    for (const auto& name : candidates) {
        if (grp.pow(grp.g, encode_sni_name(grp, name)) == g_m) return name;
    }
    return std::nullopt;
}

Statement build_statement(const Group& grp, const Int& pk_eg, const elgamal::Ciphertext& c_pkd,
                          const schnorr::Signature& sig_r, const Int& pk_r,
                          const SniCiphertext& c_sni, const pedersen::Commitment& com_e,
                          const pedersen::Commitment& com_r, const pedersen::Commitment& com_t) {
    if (!schnorr::verify(grp, elgamal::encode(grp, c_pkd), sig_r, pk_r))
        throw std::invalid_argument("build_statement: sig_r does not verify over c_pkd");
    return Statement{grp, pk_eg, c_pkd, sig_r, pk_r, c_sni, com_e, com_r, com_t};
}

bool witness_consistent(const Statement& st, const Witness& w) {
    const Group& grp = st.grp;
    if (grp.pow(grp.g, w.e) != st.pk_eg) return false;
    if (grp.pow(grp.g, w.r) != st.c_sni.u) return false;
    Int pk_d = grp.mul(st.c_pkd.c2, grp.pow(st.c_pkd.c1, -w.e));
    if (grp.mul(grp.pow(grp.g, w.m), grp.pow(pk_d, w.r)) != st.c_sni.w) return false;
    Int t = grp.mod_q(w.e * w.r);
    if (!pedersen::open(grp, st.com_e, w.e, w.alpha)) return false;
    if (!pedersen::open(grp, st.com_r, w.r, w.beta)) return false;
    if (!pedersen::open(grp, st.com_t, t, w.gamma)) return false;
    return true;
}

Nonces sample_nonces(const Group& grp, Drbg& rng) {
    Nonces k;
    k.k_e = rng.scalar(grp.q);
    k.k_r = rng.scalar(grp.q);
    k.k_m = rng.scalar(grp.q);
    k.k_t = rng.scalar(grp.q);
    k.k_alpha = rng.scalar(grp.q);
    k.k_beta = rng.scalar(grp.q);
    k.k_gamma = rng.scalar(grp.q);
    k.k_delta = rng.scalar(grp.q);
    return k;
}

std::array<Int, 7> announce(const Statement& st, const Nonces& k) {
    const Group& grp = st.grp;
    std::array<Int, 7> a;
    a[0] = grp.pow(grp.g, k.k_e);
    a[1] = grp.pow(grp.g, k.k_r);
    a[2] = grp.mul(grp.mul(grp.pow(grp.g, k.k_m), grp.pow(st.c_pkd.c2, k.k_r)),
                   grp.pow(st.c_pkd.c1, -k.k_t));
    a[3] = grp.mul(grp.pow(grp.g, k.k_e), grp.pow(grp.h, k.k_alpha));
    a[4] = grp.mul(grp.pow(grp.g, k.k_r), grp.pow(grp.h, k.k_beta));
    a[5] = grp.mul(grp.pow(grp.g, k.k_t), grp.pow(grp.h, k.k_gamma));
    a[6] = grp.mul(grp.pow(st.com_r.value, k.k_e), grp.pow(grp.h, k.k_delta));
    return a;
}

Responses respond(const Group& grp, const Witness& w, const Nonces& k, const Int& c) {
    Int t = grp.mod_q(w.e * w.r);
    Int delta = grp.mod_q(w.gamma - w.e * w.beta);
    Responses z;
    z.z_e = grp.mod_q(k.k_e + c * w.e);
    z.z_r = grp.mod_q(k.k_r + c * w.r);
    z.z_m = grp.mod_q(k.k_m + c * w.m);
    z.z_t = grp.mod_q(k.k_t + c * t);
    z.z_alpha = grp.mod_q(k.k_alpha + c * w.alpha);
    z.z_beta = grp.mod_q(k.k_beta + c * w.beta);
    z.z_gamma = grp.mod_q(k.k_gamma + c * w.gamma);
    z.z_delta = grp.mod_q(k.k_delta + c * delta);
    return z;
}

Int challenge_of(const Statement& st, const std::array<Int, 7>& a) {
    Bytes transcript = encode_statement(st);
    for (const Int& ai : a) {
        Bytes b = st.grp.encode_element(ai);
        append_be32(transcript, uint32_t(b.size()));
        append(transcript, b);
    }
    return hash_to_scalar(st.grp, "FS-CHALLENGE", transcript);
}

bool equations_hold(const Statement& st, const std::array<Int, 7>& a, const Int& c,
                    const Responses& z) {
    const Group& grp = st.grp;
    for (const Int& ai : a)
        if (!grp.is_element(ai)) return false;
    for (const Int* s : {&z.z_e, &z.z_r, &z.z_m, &z.z_t, &z.z_alpha, &z.z_beta, &z.z_gamma,
                         &z.z_delta})
        if (!grp.is_scalar(*s)) return false;

    // 1: g^z_e = A1 * pk_eg^c
    if (grp.pow(grp.g, z.z_e) != grp.mul(a[0], grp.pow(st.pk_eg, c))) return false;
    // 2: g^z_r = A2 * u^c
    if (grp.pow(grp.g, z.z_r) != grp.mul(a[1], grp.pow(st.c_sni.u, c))) return false;
    // 3: g^z_m * c2^z_r * c1^(-z_t) = A3 * w^c
    Int lhs = grp.mul(grp.mul(grp.pow(grp.g, z.z_m), grp.pow(st.c_pkd.c2, z.z_r)),
                      grp.pow(st.c_pkd.c1, -z.z_t));
    if (lhs != grp.mul(a[2], grp.pow(st.c_sni.w, c))) return false;
    // 4: g^z_e * h^z_alpha = A4 * com_e^c
    if (grp.mul(grp.pow(grp.g, z.z_e), grp.pow(grp.h, z.z_alpha)) !=
        grp.mul(a[3], grp.pow(st.com_e.value, c)))
        return false;
    // 5: g^z_r * h^z_beta = A5 * com_r^c
    if (grp.mul(grp.pow(grp.g, z.z_r), grp.pow(grp.h, z.z_beta)) !=
        grp.mul(a[4], grp.pow(st.com_r.value, c)))
        return false;
    // 6: g^z_t * h^z_gamma = A6 * com_t^c
    if (grp.mul(grp.pow(grp.g, z.z_t), grp.pow(grp.h, z.z_gamma)) !=
        grp.mul(a[5], grp.pow(st.com_t.value, c)))
        return false;
    // 7: com_r^z_e * h^z_delta = A7 * com_t^c
    if (grp.mul(grp.pow(st.com_r.value, z.z_e), grp.pow(grp.h, z.z_delta)) !=
        grp.mul(a[6], grp.pow(st.com_t.value, c)))
        return false;
    return true;
}

Proof prove(const Statement& st, const Witness& w, Drbg& rng) {
    if (!witness_consistent(st, w))
        throw std::invalid_argument("prove: witness inconsistent with statement");
    Proof p;
    Nonces k = sample_nonces(st.grp, rng);
    p.a = announce(st, k);
    Int c = challenge_of(st, p.a);
    p.z = respond(st.grp, w, k, c);
    if (!verify(st, p)) throw std::logic_error("prove: self-verification failed");
    return p;
}

bool verify(const Statement& st, const Proof& proof) {
    const Group& grp = st.grp;
    for (const Int* x : {&st.pk_eg, &st.c_pkd.c1, &st.c_pkd.c2, &st.pk_r, &st.c_sni.u,
                         &st.c_sni.w, &st.com_e.value, &st.com_r.value, &st.com_t.value})
        if (!grp.is_element(*x)) return false;
    return equations_hold(st, proof.a, challenge_of(st, proof.a), proof.z);
}

Proof simulate(const Statement& st, const Int& c, Drbg& rng) {
    const Group& grp = st.grp;
    Proof p;
    p.z.z_e = rng.scalar(grp.q);
    p.z.z_r = rng.scalar(grp.q);
    p.z.z_m = rng.scalar(grp.q);
    p.z.z_t = rng.scalar(grp.q);
    p.z.z_alpha = rng.scalar(grp.q);
    p.z.z_beta = rng.scalar(grp.q);
    p.z.z_gamma = rng.scalar(grp.q);
    p.z.z_delta = rng.scalar(grp.q);
    // solve each verification equation for A_i
    p.a[0] = grp.mul(grp.pow(grp.g, p.z.z_e), grp.pow(st.pk_eg, -c));
    p.a[1] = grp.mul(grp.pow(grp.g, p.z.z_r), grp.pow(st.c_sni.u, -c));
    p.a[2] = grp.mul(grp.mul(grp.mul(grp.pow(grp.g, p.z.z_m), grp.pow(st.c_pkd.c2, p.z.z_r)),
                             grp.pow(st.c_pkd.c1, -p.z.z_t)),
                     grp.pow(st.c_sni.w, -c));
    p.a[3] = grp.mul(grp.mul(grp.pow(grp.g, p.z.z_e), grp.pow(grp.h, p.z.z_alpha)),
                     grp.pow(st.com_e.value, -c));
    p.a[4] = grp.mul(grp.mul(grp.pow(grp.g, p.z.z_r), grp.pow(grp.h, p.z.z_beta)),
                     grp.pow(st.com_r.value, -c));
    p.a[5] = grp.mul(grp.mul(grp.pow(grp.g, p.z.z_t), grp.pow(grp.h, p.z.z_gamma)),
                     grp.pow(st.com_t.value, -c));
    p.a[6] = grp.mul(grp.mul(grp.pow(st.com_r.value, p.z.z_e), grp.pow(grp.h, p.z.z_delta)),
                     grp.pow(st.com_t.value, -c));
    return p;
}

SampleInstance sample_instance(const Group& grp, Drbg& rng, const std::string& sni) {
    SampleInstance inst;
    inst.sni = sni;
    auto domain_kp = elgamal::keygen(grp, rng);
    inst.sk_d = domain_kp.sk;
    inst.pk_d = domain_kp.pk;
    auto eph = elgamal::keygen(grp, rng);
    auto c_pkd = elgamal::encrypt(grp, domain_kp.pk, eph.pk, rng);
    auto responder = schnorr::keygen(grp, rng);
    auto sig = schnorr::sign(grp, elgamal::encode(grp, c_pkd.ct), responder.sk, rng);
    auto sni_enc = encrypt_sni(grp, sni, domain_kp.pk, rng);

    Witness w;
    w.e = eph.sk;
    w.r = sni_enc.r;
    w.m = sni_enc.m;
    w.alpha = rng.scalar(grp.q);
    w.beta = rng.scalar(grp.q);
    w.gamma = rng.scalar(grp.q);
    Int t = grp.mod_q(w.e * w.r);

    inst.st = build_statement(grp, eph.pk, c_pkd.ct, sig, responder.pk, sni_enc.ct,
                              pedersen::commit(grp, w.e, w.alpha),
                              pedersen::commit(grp, w.r, w.beta),
                              pedersen::commit(grp, t, w.gamma));
    inst.w = w;
    return inst;
}

Bytes encode_statement(const Statement& st) {
    const Group& grp = st.grp;
    return Writer(tag::kStatement)
        .field(int_to_bytes(grp.p))
        .field(int_to_bytes(grp.q))
        .field(int_to_bytes(grp.g))
        .field(int_to_bytes(grp.h))
        .field(grp.encode_element(st.pk_eg))
        .field(elgamal::encode(grp, st.c_pkd))
        .field(schnorr::encode(grp, st.sig_r))
        .field(grp.encode_element(st.pk_r))
        .field(Writer(tag::kSniCiphertext)
                   .field(grp.encode_element(st.c_sni.u))
                   .field(grp.encode_element(st.c_sni.w))
                   .take())
        .field(grp.encode_element(st.com_e.value))
        .field(grp.encode_element(st.com_r.value))
        .field(grp.encode_element(st.com_t.value))
        .take();
}

Bytes encode_proof(const Group& grp, const Proof& p) {
    Writer w(tag::kProof);
    for (const Int& ai : p.a) w.field(grp.encode_element(ai));
    for (const Int* s : {&p.z.z_e, &p.z.z_r, &p.z.z_m, &p.z.z_t, &p.z.z_alpha, &p.z.z_beta,
                         &p.z.z_gamma, &p.z.z_delta})
        w.field(grp.encode_scalar(*s));
    return w.take();
}

Bytes encode_bundle(const Statement& st, const Proof& p) {
    return Writer(tag::kBundle)
        .field(encode_statement(st))
        .field(encode_proof(st.grp, p))
        .take();
}

std::optional<Statement> decode_statement(const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != tag::kStatement) return std::nullopt;
    auto fp = r.field();
    auto fq = r.field();
    auto fg = r.field();
    auto fh = r.field();
    if (!fp || !fq || !fg || !fh) return std::nullopt;
    auto grp = match_known_group(bytes_to_int(*fp), bytes_to_int(*fq), bytes_to_int(*fg),
                                 bytes_to_int(*fh));
    if (!grp) return std::nullopt;

    auto f_pk_eg = r.field();
    auto f_c_pkd = r.field();
    auto f_sig = r.field();
    auto f_pk_r = r.field();
    auto f_sni = r.field();
    auto f_com_e = r.field();
    auto f_com_r = r.field();
    auto f_com_t = r.field();
    if (!f_pk_eg || !f_c_pkd || !f_sig || !f_pk_r || !f_sni || !f_com_e || !f_com_r || !f_com_t ||
        !r.exhausted())
        return std::nullopt;

    auto pk_eg = grp->decode_element(*f_pk_eg);
    auto c_pkd = elgamal::decode(*grp, *f_c_pkd);
    auto sig = schnorr::decode(*grp, *f_sig);
    auto pk_r = grp->decode_element(*f_pk_r);
    auto com_e = grp->decode_element(*f_com_e);
    auto com_r = grp->decode_element(*f_com_r);
    auto com_t = grp->decode_element(*f_com_t);
    if (!pk_eg || !c_pkd || !sig || !pk_r || !com_e || !com_r || !com_t) return std::nullopt;

    Reader rs(*f_sni);
    auto ts = rs.tag();
    if (!ts || *ts != tag::kSniCiphertext) return std::nullopt;
    auto fu = rs.field();
    auto fw = rs.field();
    if (!fu || !fw || !rs.exhausted()) return std::nullopt;
    auto u = grp->decode_element(*fu);
    auto w = grp->decode_element(*fw);
    if (!u || !w) return std::nullopt;

    if (!schnorr::verify(*grp, elgamal::encode(*grp, *c_pkd), *sig, *pk_r)) return std::nullopt;

    return Statement{*grp,
                     *pk_eg,
                     *c_pkd,
                     *sig,
                     *pk_r,
                     SniCiphertext{*u, *w},
                     pedersen::Commitment{*com_e},
                     pedersen::Commitment{*com_r},
                     pedersen::Commitment{*com_t}};
}

std::optional<Proof> decode_proof(const Group& grp, const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != tag::kProof) return std::nullopt;
    Proof p;
    for (auto& ai : p.a) {
        auto f = r.field();
        if (!f) return std::nullopt;
        auto x = grp.decode_element(*f);
        if (!x) return std::nullopt;
        ai = *x;
    }
    for (Int* s : {&p.z.z_e, &p.z.z_r, &p.z.z_m, &p.z.z_t, &p.z.z_alpha, &p.z.z_beta,
                   &p.z.z_gamma, &p.z.z_delta}) {
        auto f = r.field();
        if (!f) return std::nullopt;
        auto x = grp.decode_scalar(*f);
        if (!x) return std::nullopt;
        *s = *x;
    }
    if (!r.exhausted()) return std::nullopt;
    return p;
}

std::optional<std::pair<Statement, Proof>> decode_bundle(const Bytes& data) {
    Reader r(data);
    auto t = r.tag();
    if (!t || *t != tag::kBundle) return std::nullopt;
    auto f_st = r.field();
    auto f_pf = r.field();
    if (!f_st || !f_pf || !r.exhausted()) return std::nullopt;
    auto st = decode_statement(*f_st);
    if (!st) return std::nullopt;
    auto pf = decode_proof(st->grp, *f_pf);
    if (!pf) return std::nullopt;
    return std::make_pair(std::move(*st), std::move(*pf));
}

} // namespace attest
} // namespace zkvpn
