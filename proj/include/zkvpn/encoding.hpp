#pragma once

#include <cstdint>
#include <optional>

#include "zkvpn/bytes.hpp"

namespace zkvpn {

// Canonical wire encoding, used bit-exactly for signing, Fiat-Shamir hashing
// and golden tests: one tag byte, then each field as a 4-byte big-endian
// length followed by the field bytes, in declared order. Group elements are
// fixed-width big-endian representatives in [0, p); scalars fixed-width
// big-endian in [0, q).
namespace tag {
// DHT messages
constexpr uint8_t kPing = 0x01;
constexpr uint8_t kStore = 0x02;
constexpr uint8_t kFindNode = 0x03;
constexpr uint8_t kFindValue = 0x04;
constexpr uint8_t kValueResponse = 0x05;
constexpr uint8_t kNotifyProvider = 0x06;
// crypto composites
constexpr uint8_t kElGamalCiphertext = 0x10;
constexpr uint8_t kSignature = 0x11;
constexpr uint8_t kSniCiphertext = 0x12;
constexpr uint8_t kStatement = 0x13;
constexpr uint8_t kProof = 0x14;
constexpr uint8_t kBundle = 0x15;
} // namespace tag

class Writer {
public:
    explicit Writer(uint8_t tag) { out_.push_back(tag); }

    Writer& field(const Bytes& b) {
        append_be32(out_, uint32_t(b.size()));
        append(out_, b);
        return *this;
    }
    Writer& field_u8(uint8_t v) { return field(Bytes{v}); }
    Writer& field_u32(uint32_t v) {
        Bytes b;
        append_be32(b, v);
        return field(b);
    }
    Writer& field_u64(uint64_t v) {
        Bytes b;
        append_be64(b, v);
        return field(b);
    }

    const Bytes& done() const { return out_; }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

// Checked reader over the same layout; every getter returns nullopt on
// truncation so malformed inputs turn into rejections, not exceptions.
class Reader {
public:
    explicit Reader(const Bytes& data) : data_(data) {}

    std::optional<uint8_t> tag() {
        if (pos_ != 0 || data_.empty()) return std::nullopt;
        pos_ = 1;
        return data_[0];
    }

    std::optional<Bytes> field() {
        if (pos_ + 4 > data_.size()) return std::nullopt;
        uint32_t len = (uint32_t(data_[pos_]) << 24) | (uint32_t(data_[pos_ + 1]) << 16) |
                       (uint32_t(data_[pos_ + 2]) << 8) | uint32_t(data_[pos_ + 3]);
        pos_ += 4;
        if (pos_ + len > data_.size()) return std::nullopt;
        Bytes out(data_.begin() + pos_, data_.begin() + pos_ + len);
        pos_ += len;
        return out;
    }

    std::optional<uint8_t> field_u8() {
        auto f = field();
        if (!f || f->size() != 1) return std::nullopt;
        return (*f)[0];
    }
    std::optional<uint32_t> field_u32() {
        auto f = field();
        if (!f || f->size() != 4) return std::nullopt;
        return (uint32_t((*f)[0]) << 24) | (uint32_t((*f)[1]) << 16) |
               (uint32_t((*f)[2]) << 8) | uint32_t((*f)[3]);
    }
    std::optional<uint64_t> field_u64() {
        auto f = field();
        if (!f || f->size() != 8) return std::nullopt;
        uint64_t v = 0;
        for (uint8_t b : *f) v = (v << 8) | b;
        return v;
    }

    bool exhausted() const { return pos_ == data_.size(); }

private:
    const Bytes& data_;
    size_t pos_ = 0;
};

} // namespace zkvpn
