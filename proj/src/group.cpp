#include "zkvpn/group.hpp"

#include <stdexcept>

#include "zkvpn/sha256.hpp"

namespace zkvpn {

namespace {

// 2048-bit p = q*m + 1 and 256-bit prime q, found by a deterministic
// next-prime search seeded from SHA-256("zkvpn std256 group v1"); g = 2^m.
constexpr const char* kStd256P =
    "800000000000000000000000000000000000000000000000000000000000000000000000"
    "000000000000000000000000000000000000000000000000000000000000000000000000"
    "000000000000000000000000000000000000000000000000000000000000000000000000"
    "000000000000000000000000000000000000000000000000000000000000000000000000"
    "000000000000000000000000000000000000000000000000000000000000000000000000"
    "000000000000000000000000000000000000000000000000000000000000000000000000"
    "000000000000049de47ce07a597c945ce487841a792bfb38f3edad04250dd7af318015fb"
    "7c803b27";
constexpr const char* kStd256Q =
    "ab991893a86cfd5615877e04c548decaecd72c1a610301f3e6ba5dd9649fb4f5";
constexpr const char* kStd256G =
    "483876994f6681010913fc2674d9bfdc39cca836206ad7520a0eadafc3453ac276074ba2"
    "1262220bb36249c792856e7c74576e85e38d23f4c0a0c05051609550af5cb0fabd76ca1a"
    "0d6e6a17375bf102c23f4941a2b45bbf4f24e552a419790dc9ab0f93ad9d6d117834412d"
    "3638e45310d77f73d12acf344d83c18de45a7c89961b254ad93a9b1db48333e6cf5bdc6e"
    "ce669ab795a25433ee341fb19e8c51f563c97776643161ecc5667adeac022390928b76cb"
    "131b41247bf1c7eee5eaf9c67e34e35a2c4fd9238a5ff2ed58c670edcf2c00cc3c5ce71c"
    "c885c3a7f8e07cd0613f9c1c1c4cbc34fe28f93c7e16f676cbec283bffc8a19df20e304e"
    "26d88adb";

Bytes fixed_width(const Int& v, size_t width) {
    Bytes out(width, 0);
    size_t count = 0;
    if (v != 0) {
        size_t need = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
        if (need > width) throw std::invalid_argument("value too wide for canonical encoding");
        mpz_export(out.data() + (width - need), &count, 1, 1, 1, 0, v.get_mpz_t());
    }
    return out;
}

// Hash counter values to field elements and exponentiate to the cofactor
// until an order-q element distinct from 1 and g comes out.
Int derive_h(const Int& p, const Int& q, const Int& g) {
    Int cofactor = (p - 1) / q;
    for (uint32_t ctr = 0;; ++ctr) {
        Bytes material = to_bytes("hash-to-group");
        append_be32(material, ctr);
        append(material, int_to_bytes(g));
        Digest d = sha256(material);
        // widen the digest to cover p
        Bytes wide;
        size_t pbytes = (mpz_sizeinbase(p.get_mpz_t(), 2) + 7) / 8;
        uint32_t seg = 0;
        while (wide.size() < pbytes) {
            Bytes m2(d.begin(), d.end());
            append_be32(m2, seg++);
            Digest dd = sha256(m2);
            wide.insert(wide.end(), dd.begin(), dd.end());
        }
        Int x = bytes_to_int(wide) % p;
        if (x == 0) continue;
        Int cand;
        mpz_powm(cand.get_mpz_t(), x.get_mpz_t(), cofactor.get_mpz_t(), p.get_mpz_t());
        if (cand != 1 && cand != g) return cand;
    }
}

Group finish_setup(Int p, Int q, Int g, std::string label) {
    Group grp;
    grp.p = std::move(p);
    grp.q = std::move(q);
    grp.g = std::move(g);
    grp.label = std::move(label);
    grp.h = derive_h(grp.p, grp.q, grp.g);
    grp.element_bytes = (mpz_sizeinbase(grp.p.get_mpz_t(), 2) + 7) / 8;
    grp.scalar_bytes = (mpz_sizeinbase(grp.q.get_mpz_t(), 2) + 7) / 8;
    return grp;
}

} // namespace

Group group_setup(const std::string& label) {
    if (label == "toy") {
        return finish_setup(23, 11, 2, "toy");
    }
    if (label == "std256") {
        Int p, q, g;
        mpz_set_str(p.get_mpz_t(), kStd256P, 16);
        mpz_set_str(q.get_mpz_t(), kStd256Q, 16);
        mpz_set_str(g.get_mpz_t(), kStd256G, 16);
        return finish_setup(std::move(p), std::move(q), std::move(g), "std256");
    }
    throw std::invalid_argument("unknown group label: " + label);
}

Int Group::pow(const Int& base, const Int& exp) const {
    Int out;
    mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), p.get_mpz_t());
    return out;
}

Int Group::mul(const Int& a, const Int& b) const {
    Int out = a * b;
    mpz_mod(out.get_mpz_t(), out.get_mpz_t(), p.get_mpz_t());
    return out;
}

Int Group::inv(const Int& a) const {
    Int out;
    if (mpz_invert(out.get_mpz_t(), a.get_mpz_t(), p.get_mpz_t()) == 0)
        throw std::invalid_argument("not invertible mod p");
    return out;
}

bool Group::is_element(const Int& x) const {
    if (x <= 0 || x >= p) return false;
    return pow(x, q) == 1;
}

Int Group::mod_q(const Int& v) const {
    Int out;
    mpz_mod(out.get_mpz_t(), v.get_mpz_t(), q.get_mpz_t());
    return out;
}

Bytes Group::encode_element(const Int& x) const { return fixed_width(x, element_bytes); }

Bytes Group::encode_scalar(const Int& s) const { return fixed_width(s, scalar_bytes); }

std::optional<Int> Group::decode_element(const Bytes& b) const {
    if (b.size() != element_bytes) return std::nullopt;
    Int x = bytes_to_int(b);
    if (!is_element(x)) return std::nullopt;
    return x;
}

std::optional<Int> Group::decode_scalar(const Bytes& b) const {
    if (b.size() != scalar_bytes) return std::nullopt;
    Int s = bytes_to_int(b);
    if (!is_scalar(s)) return std::nullopt;
    return s;
}

Bytes Group::params_bytes() const {
    Bytes out;
    for (const Int* v : {&p, &q, &g, &h}) {
        Bytes raw = int_to_bytes(*v);
        append_be32(out, uint32_t(raw.size()));
        append(out, raw);
    }
    return out;
}

Int hash_to_scalar(const Group& grp, const std::string& domain_separator, const Bytes& transcript) {
    size_t qbits = mpz_sizeinbase(grp.q.get_mpz_t(), 2);
    size_t take = (qbits + 7) / 8;
    unsigned shift = unsigned(take * 8 - qbits);
    for (uint32_t ctr = 0;; ++ctr) {
        Bytes material;
        append_be32(material, uint32_t(domain_separator.size()));
        append(material, to_bytes(domain_separator));
        append_be32(material, ctr);
        append(material, transcript);
        Digest d = sha256(material);
        Bytes head(d.begin(), d.begin() + take);
        Int cand = bytes_to_int(head) >> shift;
        if (cand < grp.q) return cand;
    }
}

Bytes int_to_bytes(const Int& v) {
    if (v == 0) return Bytes{};
    size_t need = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
    Bytes out(need);
    size_t count = 0;
    mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
    return out;
}

Int bytes_to_int(const Bytes& b) {
    Int v;
    if (!b.empty()) mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
    return v;
}

} // namespace zkvpn
