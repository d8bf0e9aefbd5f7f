#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "tlmc/core/vec.hpp"

namespace tlmc {

struct Triangle {
    Vec3 p0, p1, p2;
    int material = 0;
    int object = -1;

    Vec3 normal() const { return normalize(cross(p1 - p0, p2 - p0)); }
    double area() const { return 0.5 * length(cross(p1 - p0, p2 - p0)); }
    Aabb bounds() const {
        Aabb b;
        b.expand(p0);
        b.expand(p1);
        b.expand(p2);
        return b;
    }
    Vec3 centroid() const { return (p0 + p1 + p2) / 3.0; }
};

struct Sphere {
    Vec3 center;
    double radius = 1;
    int material = 0;
    int object = -1;

    Aabb bounds() const {
        Aabb b;
        b.expand(center - Vec3(radius));
        b.expand(center + Vec3(radius));
        return b;
    }
};

// Raw hit produced by the acceleration structure.
struct PrimitiveHit {
    double t = 0;
    std::uint32_t prim = 0;  // triangles first, then spheres
    double b1 = 0, b2 = 0;   // triangle barycentrics
};

// Moller-Trumbore, both faces.
inline bool intersect_triangle(const Triangle& tri, const Ray& ray, double t_min, double t_max, double& t, double& b1,
                               double& b2) {
    Vec3 e1 = tri.p1 - tri.p0, e2 = tri.p2 - tri.p0;
    Vec3 pvec = cross(ray.dir, e2);
    double det = dot(e1, pvec);
    if (det == 0.0 || !std::isfinite(det)) return false;
    double inv = 1.0 / det;
    Vec3 tvec = ray.origin - tri.p0;
    double u = dot(tvec, pvec) * inv;
    if (u < 0.0 || u > 1.0) return false;
    Vec3 qvec = cross(tvec, e1);
    double v = dot(ray.dir, qvec) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    double tt = dot(e2, qvec) * inv;
    if (!(tt > t_min && tt < t_max)) return false;
    t = tt;
    b1 = u;
    b2 = v;
    return true;
}

inline bool intersect_sphere(const Sphere& s, const Ray& ray, double t_min, double t_max, double& t) {
    Vec3 oc = ray.origin - s.center;
    double b = dot(oc, ray.dir);
    double c = dot(oc, oc) - s.radius * s.radius;
    // Numerically stable form via the closest-approach distance.
    Vec3 perp = oc - b * ray.dir;
    double disc = s.radius * s.radius - dot(perp, perp);
    if (disc < 0.0) return false;
    double sq = std::sqrt(disc);
    double q = b > 0 ? -b - sq : -b + sq;
    double t0 = c / q, t1 = q;
    if (q == 0.0) t0 = t1 = 0.0;
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_min && t0 < t_max) {
        t = t0;
        return true;
    }
    if (t1 > t_min && t1 < t_max) {
        t = t1;
        return true;
    }
    return false;
}

inline bool intersect_aabb(const Aabb& b, const Vec3& origin, const Vec3& inv_dir, double t_min, double t_max) {
    for (int a = 0; a < 3; ++a) {
        double t0 = (b.lo[a] - origin[a]) * inv_dir[a];
        double t1 = (b.hi[a] - origin[a]) * inv_dir[a];
        if (t0 > t1) std::swap(t0, t1);
        // NaN-safe: comparisons with NaN keep previous bounds
        t_min = t0 > t_min ? t0 : t_min;
        t_max = t1 < t_max ? t1 : t_max;
        if (t_min > t_max) return false;
    }
    return true;
}

}  // namespace tlmc
