#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "zkvpn/bytes.hpp"

namespace zkvpn {

using Digest = std::array<uint8_t, 32>;

// Streaming SHA-256 (FIPS 180-4). The project uses this single hash for
// node identifiers, Fiat-Shamir challenges, signatures and log digests.
class Sha256 {
public:
    Sha256();
    Sha256& update(const uint8_t* data, size_t len);
    Sha256& update(const Bytes& b) { return update(b.data(), b.size()); }
    Digest finish();

private:
    void compress(const uint8_t* block);

    uint32_t state_[8];
    uint64_t total_len_ = 0;
    uint8_t buf_[64];
    size_t buf_fill_ = 0;
};

Digest sha256(const Bytes& data);
Digest sha256(const uint8_t* data, size_t len);

} // namespace zkvpn
