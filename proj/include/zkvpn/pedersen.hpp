#pragma once

#include "zkvpn/group.hpp"

namespace zkvpn {
namespace pedersen {

struct Commitment {
    Int value; // g^v * h^b

    bool operator==(const Commitment&) const = default;
};

// Perfectly hiding, binding under discrete log as long as log_g(h) stays
// unknown (see Group's h derivation).
inline Commitment commit(const Group& grp, const Int& v, const Int& b) {
    return Commitment{grp.mul(grp.pow(grp.g, v), grp.pow(grp.h, b))};
}

inline bool open(const Group& grp, const Commitment& com, const Int& v, const Int& b) {
    return commit(grp, v, b) == com;
}

} // namespace pedersen
} // namespace zkvpn
