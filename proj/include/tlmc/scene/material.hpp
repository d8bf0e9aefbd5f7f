#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tlmc/core/error.hpp"
#include "tlmc/core/sampling.hpp"
#include "tlmc/core/vec.hpp"

namespace tlmc {

enum class MaterialKind { Lambert, RoughConductor, Mirror };

inline const char* to_string(MaterialKind k) {
    switch (k) {
        case MaterialKind::Lambert: return "lambert";
        case MaterialKind::RoughConductor: return "rough-conductor";
        case MaterialKind::Mirror: return "mirror";
    }
    return "?";
}

struct Material {
    std::string name;
    MaterialKind kind = MaterialKind::Lambert;
    Rgb albedo{0.5};
    double roughness = 1.0;  // linear roughness; GGX alpha = roughness^2
    Rgb emission{0.0};

    bool is_delta() const { return kind == MaterialKind::Mirror; }
    bool is_emissive() const { return !is_black(emission); }
    // Roughness used as a network feature and by the glossiness cutoff.
    double feature_roughness() const {
        switch (kind) {
            case MaterialKind::Lambert: return 1.0;
            case MaterialKind::RoughConductor: return roughness;
            case MaterialKind::Mirror: return 0.0;
        }
        return 1.0;
    }
};

// Shading-point record handed to BSDFs, NEE and the neural caches.
struct Interaction {
    Vec3 position;
    Vec3 geometric_normal;  // oriented towards wo
    Vec3 shading_normal;    // oriented towards wo
    Vec3 wo;                // unit, pointing away from the surface
    double u = 0, v = 0;
    int material = -1;
    std::uint32_t prim = 0;
    bool front_face = true;  // wo on the side the winding normal points to
    bool is_delta = false;
    double t = 0;
};

struct BsdfSample {
    Vec3 wi;
    Rgb f{0.0};       // BSDF value (zero for delta lobes)
    Rgb weight{0.0};  // f * cos / pdf
    double pdf = 0;   // solid-angle pdf; +inf for delta lobes
    bool is_delta = false;
    bool valid = false;
};

namespace ggx {

inline double alpha_from_roughness(double roughness) { return std::max(roughness * roughness, 1e-4); }

inline double D(double cos_h, double alpha) {
    if (cos_h <= 0) return 0;
    double a2 = alpha * alpha;
    double c2 = cos_h * cos_h;
    double d = c2 * (a2 - 1.0) + 1.0;
    return a2 / (kPi * d * d);
}

inline double G1(double cos_v, double alpha) {
    if (cos_v <= 0) return 0;
    double a2 = alpha * alpha;
    return 2.0 * cos_v / (cos_v + std::sqrt(a2 + (1.0 - a2) * cos_v * cos_v));
}

inline Rgb fresnel_schlick(const Rgb& f0, double cos_d) {
    double m = std::pow(std::clamp(1.0 - cos_d, 0.0, 1.0), 5.0);
    return f0 + (Rgb(1.0) - f0) * m;
}

}  // namespace ggx

// Local-frame BSDF routines. Directions are in the shading frame (z = normal).
class Bsdf {
public:
    Bsdf(const Material& m, const Interaction& it) : mat_(m), frame_(it.shading_normal), ng_(it.geometric_normal), wo_(it.wo) {}

    bool is_delta() const { return mat_.is_delta(); }
    const Frame& frame() const { return frame_; }

    Rgb eval(const Vec3& wi) const {
        if (mat_.is_delta()) return Rgb(0.0);
        Vec3 lo = frame_.to_local(wo_), li = frame_.to_local(wi);
        if (lo.z <= 0 || li.z <= 0 || dot(wi, ng_) <= 0) return Rgb(0.0);
        return eval_local(lo, li);
    }

    double pdf(const Vec3& wi) const {
        if (mat_.is_delta()) throw UnsupportedError("pdf of a delta lobe is not defined");
        Vec3 lo = frame_.to_local(wo_), li = frame_.to_local(wi);
        if (lo.z <= 0 || li.z <= 0 || dot(wi, ng_) <= 0) return 0.0;
        return pdf_local(lo, li);
    }

    BsdfSample sample(double u0, double u1) const {
        BsdfSample s;
        Vec3 lo = frame_.to_local(wo_);
        if (lo.z <= 0) return s;
        switch (mat_.kind) {
            case MaterialKind::Mirror: {
                Vec3 li(-lo.x, -lo.y, lo.z);
                s.wi = frame_.to_world(li);
                s.is_delta = true;
                s.pdf = std::numeric_limits<double>::infinity();
                s.weight = mat_.albedo;
                s.valid = dot(s.wi, ng_) > 0;
                return s;
            }
            case MaterialKind::Lambert: {
                DirectionSample d = sample_cosine_hemisphere(u0, u1, Frame());
                Vec3 li = d.dir;
                s.wi = frame_.to_world(li);
                break;
            }
            case MaterialKind::RoughConductor: {
                double alpha = ggx::alpha_from_roughness(mat_.roughness);
                double t2 = alpha * alpha * u0 / std::max(1.0 - u0, 1e-300);
                double cos_h = 1.0 / std::sqrt(1.0 + t2);
                double sin_h = std::sqrt(std::max(0.0, 1.0 - cos_h * cos_h));
                double phi = 2.0 * kPi * u1;
                Vec3 h(sin_h * std::cos(phi), sin_h * std::sin(phi), cos_h);
                Vec3 li = 2.0 * dot(lo, h) * h - lo;
                s.wi = frame_.to_world(li);
                break;
            }
        }
        Vec3 li = frame_.to_local(s.wi);
        if (li.z <= 0 || dot(s.wi, ng_) <= 0) return s;
        s.pdf = pdf_local(lo, li);
        if (!(s.pdf > 0)) return s;
        s.f = eval_local(lo, li);
        s.weight = s.f * (li.z / s.pdf);
        s.valid = true;
        return s;
    }

private:
    Rgb eval_local(const Vec3& lo, const Vec3& li) const {
        switch (mat_.kind) {
            case MaterialKind::Lambert: return mat_.albedo * kInvPi;
            case MaterialKind::RoughConductor: {
                double alpha = ggx::alpha_from_roughness(mat_.roughness);
                Vec3 h = normalize(lo + li);
                double d = ggx::D(h.z, alpha);
                double g = ggx::G1(lo.z, alpha) * ggx::G1(li.z, alpha);
                Rgb f = ggx::fresnel_schlick(mat_.albedo, dot(li, h));
                return f * (d * g / (4.0 * lo.z * li.z));
            }
            case MaterialKind::Mirror: return Rgb(0.0);
        }
        return Rgb(0.0);
    }

    double pdf_local(const Vec3& lo, const Vec3& li) const {
        switch (mat_.kind) {
            case MaterialKind::Lambert: return cosine_hemisphere_pdf(li.z);
            case MaterialKind::RoughConductor: {
                double alpha = ggx::alpha_from_roughness(mat_.roughness);
                Vec3 h = normalize(lo + li);
                double od = dot(lo, h);
                if (od <= 0) return 0.0;
                return ggx::D(h.z, alpha) * h.z / (4.0 * od);
            }
            case MaterialKind::Mirror: return 0.0;
        }
        return 0.0;
    }

    const Material& mat_;
    Frame frame_;
    Vec3 ng_;
    Vec3 wo_;
};

}  // namespace tlmc
