#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>

namespace tlmc {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInvPi = 1.0 / std::numbers::pi;
inline constexpr double kInv4Pi = 0.25 / std::numbers::pi;

template <class T>
struct Vec3T {
    T x{}, y{}, z{};

    constexpr Vec3T() = default;
    constexpr Vec3T(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}
    constexpr explicit Vec3T(T v) : x(v), y(v), z(v) {}
    template <class U>
    constexpr explicit Vec3T(const Vec3T<U>& o) : x(T(o.x)), y(T(o.y)), z(T(o.z)) {}

    constexpr T operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3T operator-() const { return {-x, -y, -z}; }
    constexpr Vec3T& operator+=(const Vec3T& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3T& operator-=(const Vec3T& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3T& operator*=(const Vec3T& o) { x *= o.x; y *= o.y; z *= o.z; return *this; }
    constexpr Vec3T& operator*=(T s) { x *= s; y *= s; z *= s; return *this; }
    constexpr Vec3T& operator/=(T s) { x /= s; y /= s; z /= s; return *this; }

    friend constexpr Vec3T operator+(Vec3T a, const Vec3T& b) { return a += b; }
    friend constexpr Vec3T operator-(Vec3T a, const Vec3T& b) { return a -= b; }
    friend constexpr Vec3T operator*(Vec3T a, const Vec3T& b) { return a *= b; }
    friend constexpr Vec3T operator*(Vec3T a, T s) { return a *= s; }
    friend constexpr Vec3T operator*(T s, Vec3T a) { return a *= s; }
    friend constexpr Vec3T operator/(Vec3T a, T s) { return a /= s; }
    friend constexpr Vec3T operator/(const Vec3T& a, const Vec3T& b) { return {a.x / b.x, a.y / b.y, a.z / b.z}; }
    friend constexpr bool operator==(const Vec3T& a, const Vec3T& b) = default;

    friend std::ostream& operator<<(std::ostream& os, const Vec3T& v) {
        return os << '(' << v.x << ", " << v.y << ", " << v.z << ')';
    }
};

using Vec3 = Vec3T<double>;
using Vec3f = Vec3T<float>;

// Linear RGB. Shares the vector algebra; kept as a distinct name at API boundaries.
using Rgb = Vec3T<double>;

template <class T> constexpr T dot(const Vec3T<T>& a, const Vec3T<T>& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
template <class T> constexpr Vec3T<T> cross(const Vec3T<T>& a, const Vec3T<T>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
template <class T> inline T length(const Vec3T<T>& v) { return std::sqrt(dot(v, v)); }
template <class T> constexpr T length_squared(const Vec3T<T>& v) { return dot(v, v); }
template <class T> inline Vec3T<T> normalize(const Vec3T<T>& v) { return v / length(v); }
template <class T> constexpr Vec3T<T> min(const Vec3T<T>& a, const Vec3T<T>& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
template <class T> constexpr Vec3T<T> max(const Vec3T<T>& a, const Vec3T<T>& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}
template <class T> constexpr T max_component(const Vec3T<T>& v) { return std::max(v.x, std::max(v.y, v.z)); }
template <class T> constexpr T min_component(const Vec3T<T>& v) { return std::min(v.x, std::min(v.y, v.z)); }
template <class T> constexpr T average(const Vec3T<T>& v) { return (v.x + v.y + v.z) / T(3); }
template <class T> inline bool is_finite(const Vec3T<T>& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}
template <class T> constexpr bool is_black(const Vec3T<T>& v) { return v.x == 0 && v.y == 0 && v.z == 0; }

inline double luminance(const Rgb& c) { return 0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z; }

inline Vec3 reflect(const Vec3& wo, const Vec3& n) { return 2.0 * dot(wo, n) * n - wo; }

// Angle between two unit vectors, stable near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
    if (dot(a, b) < 0) return kPi - 2.0 * std::asin(std::min(1.0, length(a + b) * 0.5));
    return 2.0 * std::asin(std::min(1.0, length(b - a) * 0.5));
}

struct Ray {
    Vec3 origin;
    Vec3 dir;
    double t_max = std::numeric_limits<double>::infinity();
};

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity()};

    void expand(const Vec3& p) { lo = min(lo, p); hi = max(hi, p); }
    void expand(const Aabb& b) { lo = min(lo, b.lo); hi = max(hi, b.hi); }
    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return 0.5 * (lo + hi); }
    bool empty() const { return lo.x > hi.x; }
    double diagonal() const { return empty() ? 0.0 : length(extent()); }
    int longest_axis() const {
        Vec3 e = extent();
        return (e.x >= e.y && e.x >= e.z) ? 0 : (e.y >= e.z ? 1 : 2);
    }
    double surface_area() const {
        if (empty()) return 0.0;
        Vec3 e = extent();
        return 2.0 * (e.x * e.y + e.y * e.z + e.z * e.x);
    }
    // Position mapped to [0,1]^3, clamped.
    Vec3 normalized(const Vec3& p) const {
        Vec3 e = extent();
        auto f = [](double v, double l, double s) { return s > 0 ? std::clamp((v - l) / s, 0.0, 1.0) : 0.5; };
        return {f(p.x, lo.x, e.x), f(p.y, lo.y, e.y), f(p.z, lo.z, e.z)};
    }
};

}  // namespace tlmc
