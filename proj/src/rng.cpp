#include "zkvpn/rng.hpp"

#include <cstring>
#include <stdexcept>

namespace zkvpn {

Drbg::Drbg(uint64_t seed) {
    Bytes material;
    material.reserve(16);
    append(material, to_bytes("drbg-seed"));
    append_be64(material, seed);
    key_ = sha256(material);
}

Drbg::Drbg(uint64_t seed, const std::string& stream_label) : Drbg(seed) {
    *this = fork(stream_label);
}

Drbg Drbg::fork(const std::string& label) {
    Bytes material;
    material.insert(material.end(), key_.begin(), key_.end());
    append_be32(material, uint32_t(label.size()));
    append(material, to_bytes(label));
    Drbg child;
    child.key_ = sha256(material);
    return child;
}

void Drbg::next_block() {
    Bytes material;
    material.insert(material.end(), key_.begin(), key_.end());
    append_be64(material, counter_++);
    Digest d = sha256(material);
    std::memcpy(block_, d.data(), 32);
    block_used_ = 0;
}

void Drbg::fill(uint8_t* out, size_t len) {
    while (len > 0) {
        if (block_used_ == 32) next_block();
        size_t take = std::min(len, size_t(32) - block_used_);
        std::memcpy(out, block_ + block_used_, take);
        block_used_ += take;
        out += take;
        len -= take;
    }
}

Bytes Drbg::bytes(size_t len) {
    Bytes out(len);
    fill(out.data(), len);
    return out;
}

uint64_t Drbg::next_u64() {
    uint8_t b[8];
    fill(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | b[i];
    return v;
}

uint64_t Drbg::below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Drbg::below: n must be positive");
    // rejection sampling over the smallest power-of-two mask covering n
    uint64_t mask = n - 1;
    mask |= mask >> 1; mask |= mask >> 2; mask |= mask >> 4;
    mask |= mask >> 8; mask |= mask >> 16; mask |= mask >> 32;
    for (;;) {
        uint64_t v = next_u64() & mask;
        if (v < n) return v;
    }
}

uint64_t Drbg::between(uint64_t lo, uint64_t hi) {
    if (lo > hi) throw std::invalid_argument("Drbg::between: lo > hi");
    return lo + below(hi - lo + 1);
}

double Drbg::unit_real() {
    return double(next_u64() >> 11) * 0x1.0p-53;
}

mpz_class Drbg::scalar(const mpz_class& q) {
    size_t bits = mpz_sizeinbase(q.get_mpz_t(), 2);
    size_t nbytes = (bits + 7) / 8;
    unsigned shift = unsigned(nbytes * 8 - bits);
    for (;;) {
        Bytes raw = bytes(nbytes);
        mpz_class v;
        mpz_import(v.get_mpz_t(), raw.size(), 1, 1, 1, 0, raw.data());
        v >>= shift;
        if (v < q) return v;
    }
}

mpz_class Drbg::nonzero_scalar(const mpz_class& q) {
    for (;;) {
        mpz_class v = scalar(q);
        if (v != 0) return v;
    }
}

} // namespace zkvpn
