#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/vec.hpp"

namespace tlmc {

// Real, orthonormal spherical harmonics without the Condon-Shortley phase.
// Coefficient (l, m) lives at index l*l + l + m. Y_1^{-1} ~ y, Y_1^0 ~ z, Y_1^1 ~ x.
inline constexpr int kMaxShBands = 8;

constexpr int sh_index(int l, int m) { return l * l + l + m; }
constexpr int sh_count(int bands) { return bands * bands; }

namespace detail {

struct ShNormalization {
    // sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!), times sqrt(2) for m > 0.
    std::array<double, kMaxShBands * kMaxShBands> k{};
    ShNormalization() {
        for (int l = 0; l < kMaxShBands; ++l) {
            for (int m = 0; m <= l; ++m) {
                double ratio = 1.0;
                for (int i = l - m + 1; i <= l + m; ++i) ratio /= double(i);
                double v = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * ratio);
                if (m > 0) v *= std::sqrt(2.0);
                k[sh_index(l, m)] = v;
            }
        }
    }
};

inline const ShNormalization& sh_normalization() {
    static const ShNormalization table;
    return table;
}

}  // namespace detail

// Writes bands^2 basis values for the unit direction d into out.
// Uses the (x + iy)^m form so the poles need no special casing.
template <class T>
inline void sh_eval(const Vec3& d, int bands, std::span<T> out) {
    const auto& K = detail::sh_normalization().k;
    const double z = d.z;
    double cm = 1.0, sm = 0.0;  // Re/Im of (x + iy)^m
    double pmm = 1.0;           // (2m-1)!!
    for (int m = 0; m < bands; ++m) {
        if (m > 0) {
            double c = cm * d.x - sm * d.y;
            double s = cm * d.y + sm * d.x;
            cm = c;
            sm = s;
            pmm *= double(2 * m - 1);
        }
        double p_lm2 = 0.0, p_lm1 = pmm;
        for (int l = m; l < bands; ++l) {
            double p;
            if (l == m) {
                p = pmm;
            } else if (l == m + 1) {
                p = z * (2.0 * m + 1.0) * pmm;
                p_lm2 = pmm;
                p_lm1 = p;
            } else {
                p = (z * (2.0 * l - 1.0) * p_lm1 - double(l + m - 1) * p_lm2) / double(l - m);
                p_lm2 = p_lm1;
                p_lm1 = p;
            }
            double kp = K[sh_index(l, m)] * p;
            if (m == 0) {
                out[sh_index(l, 0)] = T(kp);
            } else {
                out[sh_index(l, m)] = T(kp * cm);
                out[sh_index(l, -m)] = T(kp * sm);
            }
        }
    }
}

struct ShCoefficients {
    int bands = 0;
    std::vector<double> values;

    double at(int l, int m) const { return values[sh_index(l, m)]; }
};

inline ShCoefficients sh_eval_basis(const Vec3& dir, int bands) {
    if (bands < 1 || bands > kMaxShBands)
        throw ConfigError("spherical harmonics bands must be in [1, " + std::to_string(kMaxShBands) + "], got " +
                          std::to_string(bands));
    ShCoefficients c{bands, std::vector<double>(sh_count(bands))};
    sh_eval<double>(dir, bands, c.values);
    return c;
}

}  // namespace tlmc
