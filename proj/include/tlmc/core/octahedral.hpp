#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include "tlmc/core/vec.hpp"

namespace tlmc {

// Octahedral direction map onto [0,1]^2. The upper hemisphere (z >= 0)
// occupies the inner diamond, (0,0,1) sits at (0.5, 0.5), and the lower
// hemisphere is folded over the diagonals into the corners.
struct OctaUv {
    double u = 0.5, v = 0.5;
};

namespace detail {
inline double sign_not_zero(double v) { return v >= 0.0 ? 1.0 : -1.0; }
}  // namespace detail

inline OctaUv octa_encode(const Vec3& d) {
    double l1 = std::abs(d.x) + std::abs(d.y) + std::abs(d.z);
    double px = d.x / l1, py = d.y / l1;
    if (d.z < 0.0) {
        double fx = (1.0 - std::abs(py)) * detail::sign_not_zero(px);
        double fy = (1.0 - std::abs(px)) * detail::sign_not_zero(py);
        px = fx;
        py = fy;
    }
    return {0.5 * px + 0.5, 0.5 * py + 0.5};
}

inline Vec3 octa_decode(OctaUv uv) {
    double px = 2.0 * uv.u - 1.0, py = 2.0 * uv.v - 1.0;
    double z = 1.0 - std::abs(px) - std::abs(py);
    if (z < 0.0) {
        double fx = (1.0 - std::abs(py)) * detail::sign_not_zero(px);
        double fy = (1.0 - std::abs(px)) * detail::sign_not_zero(py);
        px = fx;
        py = fy;
    }
    return normalize(Vec3(px, py, z));
}

// 2 x 16-bit fixed point packing of an octahedral coordinate.
inline std::uint32_t octa_pack32(const Vec3& d) {
    OctaUv uv = octa_encode(d);
    auto q = [](double x) { return std::uint32_t(std::lround(std::clamp(x, 0.0, 1.0) * 65535.0)); };
    return q(uv.u) | (q(uv.v) << 16);
}

inline Vec3 octa_unpack32(std::uint32_t bits) {
    return octa_decode({double(bits & 0xFFFFu) / 65535.0, double(bits >> 16) / 65535.0});
}

}  // namespace tlmc
