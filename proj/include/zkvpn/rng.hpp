#pragma once

#include <cstdint>
#include <string>

#include <gmpxx.h>

#include "zkvpn/bytes.hpp"
#include "zkvpn/sha256.hpp"

namespace zkvpn {

// Deterministic byte generator: SHA-256 in counter mode over a 32-byte key.
// Every random choice in the project (keys, nonces, latencies, losses) comes
// from one of these, so a run is fully determined by its seed.
class Drbg {
public:
    explicit Drbg(uint64_t seed);
    Drbg(uint64_t seed, const std::string& stream_label);

    void fill(uint8_t* out, size_t len);
    Bytes bytes(size_t len);
    uint64_t next_u64();
    // uniform in [0, n), n > 0
    uint64_t below(uint64_t n);
    // uniform integer in [lo, hi] inclusive
    uint64_t between(uint64_t lo, uint64_t hi);
    double unit_real(); // [0, 1)

    // uniform in [0, q) by rejection sampling on q's bit width
    mpz_class scalar(const mpz_class& q);
    // uniform in [1, q-1]
    mpz_class nonzero_scalar(const mpz_class& q);

    // independent child stream, labeled
    Drbg fork(const std::string& label);

private:
    Drbg() = default;
    void next_block();

    Digest key_{};
    uint64_t counter_ = 0;
    uint8_t block_[32];
    size_t block_used_ = 32;
};

} // namespace zkvpn
