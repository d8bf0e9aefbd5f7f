#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/vec.hpp"

namespace tlmc {

// Orthonormal basis with `n` as the local +z axis.
struct Frame {
    Vec3 s, t, n;

    Frame() : s(1, 0, 0), t(0, 1, 0), n(0, 0, 1) {}
    explicit Frame(const Vec3& normal) : n(normal) {
        // Duff et al. 2017, branchless ONB.
        double sign = std::copysign(1.0, n.z);
        double a = -1.0 / (sign + n.z);
        double b = n.x * n.y * a;
        s = Vec3(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
        t = Vec3(b, sign + n.y * n.y * a, -n.y);
    }

    Vec3 to_local(const Vec3& v) const { return {dot(v, s), dot(v, t), dot(v, n)}; }
    Vec3 to_world(const Vec3& v) const { return v.x * s + v.y * t + v.z * n; }
};

struct DirectionSample {
    Vec3 dir;
    double pdf = 0;
};

inline double clamp_open01(double u) {
    constexpr double kLo = std::numeric_limits<double>::min();
    constexpr double kHi = 1.0 - 0x1.0p-53;
    return std::clamp(u, kLo, kHi);
}

// Concentric (Shirley-Chiu) disk mapping; u = (0,0) maps to the disk center.
inline std::pair<double, double> sample_concentric_disk(double u0, double u1) {
    double a = 2.0 * u0 - 1.0, b = 2.0 * u1 - 1.0;
    if (u0 == 0.0 && u1 == 0.0) return {0.0, 0.0};
    if (a == 0.0 && b == 0.0) return {0.0, 0.0};
    double r, phi;
    if (std::abs(a) > std::abs(b)) {
        r = a;
        phi = (kPi / 4.0) * (b / a);
    } else {
        r = b;
        phi = kPi / 2.0 - (kPi / 4.0) * (a / b);
    }
    return {r * std::cos(phi), r * std::sin(phi)};
}

inline double cosine_hemisphere_pdf(double cos_theta) { return cos_theta > 0 ? cos_theta * kInvPi : 0.0; }

// Cosine-weighted direction about frame.n. u = (0,0) is the pole.
inline DirectionSample sample_cosine_hemisphere(double u0, double u1, const Frame& frame) {
    Vec3 local;
    if (u0 == 0.0 && u1 == 0.0) {
        local = Vec3(0, 0, 1);
    } else {
        auto [dx, dy] = sample_concentric_disk(u0, u1);
        double z = std::sqrt(std::max(0.0, 1.0 - dx * dx - dy * dy));
        if (z <= 0.0) z = 1e-12;
        local = normalize(Vec3(dx, dy, z));
    }
    return {frame.to_world(local), cosine_hemisphere_pdf(local.z)};
}

inline Vec3 sample_uniform_sphere(double u0, double u1) {
    double z = 1.0 - 2.0 * u0;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = 2.0 * kPi * u1;
    return {r * std::cos(phi), r * std::sin(phi), z};
}
inline constexpr double uniform_sphere_pdf() { return kInv4Pi; }

inline Vec3 sample_uniform_hemisphere(double u0, double u1, const Frame& frame) {
    double z = u0;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = 2.0 * kPi * u1;
    return frame.to_world({r * std::cos(phi), r * std::sin(phi), z});
}

// Uniform barycentrics on a triangle.
inline std::pair<double, double> sample_uniform_triangle(double u0, double u1) {
    double su = std::sqrt(u0);
    return {1.0 - su, u1 * su};
}

struct MisWeight {
    double weight = 0;
    bool valid = true;
};

// One-sample balance heuristic for strategy a against strategy b.
inline MisWeight balance_heuristic(double pdf_a, int n_a, double pdf_b, int n_b) {
    double fa = n_a * pdf_a, fb = n_b * pdf_b;
    if (!(fa + fb > 0)) return {0.0, false};
    if (std::isinf(fa)) return {std::isinf(fb) ? 0.5 : 1.0, true};
    if (std::isinf(fb)) return {0.0, true};
    return {fa / (fa + fb), true};
}

// Piecewise-constant 1D distribution (inverse CDF sampling).
class Distribution1D {
public:
    Distribution1D() = default;
    explicit Distribution1D(std::span<const double> weights) : func_(weights.begin(), weights.end()), cdf_(weights.size() + 1) {
        cdf_[0] = 0;
        for (std::size_t i = 0; i < func_.size(); ++i) cdf_[i + 1] = cdf_[i] + std::max(0.0, func_[i]);
        total_ = cdf_.back();
        if (total_ > 0) {
            for (auto& c : cdf_) c /= total_;
        } else {
            for (std::size_t i = 0; i < cdf_.size(); ++i) cdf_[i] = double(i) / double(func_.size());
        }
    }

    std::size_t size() const { return func_.size(); }
    double total() const { return total_; }

    // Returns (bin index, continuous offset in [0,1) within the domain, discrete probability of the bin).
    struct Sample {
        std::size_t index;
        double offset;
        double prob;
    };
    Sample sample(double u) const {
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = std::size_t(std::clamp<std::ptrdiff_t>(it - cdf_.begin() - 1, 0, std::ptrdiff_t(func_.size()) - 1));
        double width = cdf_[i + 1] - cdf_[i];
        double du = width > 0 ? (u - cdf_[i]) / width : 0.5;
        return {i, (double(i) + std::clamp(du, 0.0, 1.0)) / double(func_.size()), width};
    }
    double prob(std::size_t i) const { return cdf_[i + 1] - cdf_[i]; }

private:
    std::vector<double> func_;
    std::vector<double> cdf_;
    double total_ = 0;
};

// Spherical Fibonacci lattice point i of n (z from +1 toward -1).
inline Vec3 spherical_fibonacci(int i, int n) {
    if (n <= 1) return {0, 0, 1};
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    double z = 1.0 - (2.0 * i + 1.0) / double(n);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = 2.0 * kPi * std::fmod(double(i) / golden, 1.0);
    return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace tlmc
