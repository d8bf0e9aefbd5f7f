#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/rng.hpp"
#include "tlmc/core/sampling.hpp"
#include "tlmc/scene/bvh.hpp"
#include "tlmc/scene/environment.hpp"
#include "tlmc/scene/geometry.hpp"
#include "tlmc/scene/material.hpp"

namespace tlmc {

struct Camera {
    Vec3 position{0, 1, 3.5};
    Vec3 look_at{0, 1, 0};
    Vec3 up{0, 1, 0};
    double fov_degrees = 40.0;  // vertical
    int width = 64;
    int height = 64;

    // Primary ray through continuous raster position (px, py), py = 0 at the top row.
    Ray generate_ray(double px, double py) const {
        Vec3 forward = normalize(look_at - position);
        Vec3 right = normalize(cross(forward, up));
        Vec3 true_up = cross(right, forward);
        double tan_half = std::tan(0.5 * fov_degrees * kPi / 180.0);
        double aspect = double(width) / double(height);
        double sx = (2.0 * px / width - 1.0) * tan_half * aspect;
        double sy = (1.0 - 2.0 * py / height) * tan_half;
        return {position, normalize(forward + sx * right + sy * true_up)};
    }
};

// Rigid translation applied to an object from `frame` onwards (until the next key).
struct AnimationKey {
    int frame = 0;
    Vec3 translation{0.0};
};

struct ObjectRecord {
    std::string name;
    std::vector<std::uint32_t> triangles;
    std::vector<std::uint32_t> spheres;
    std::vector<AnimationKey> keys;  // sorted by frame
};

struct LightSample {
    Vec3 position;
    Vec3 normal;
    Rgb radiance{0.0};
    double pdf_area = 0;  // includes the selection probability
};

// Immutable during a frame; set_frame() is the only mutation.
class Scene {
public:
    Scene() = default;
    Scene(const Scene& o) { *this = o; }
    Scene& operator=(const Scene& o) {
        if (this == &o) return *this;
        camera = o.camera;
        materials = o.materials;
        environment = o.environment;
        objects = o.objects;
        source_hash = o.source_hash;
        base_triangles_ = o.base_triangles_;
        base_spheres_ = o.base_spheres_;
        frame_ = -1;
        set_frame(o.frame_ < 0 ? 0 : o.frame_);
        return *this;
    }

    Camera camera;
    std::vector<Material> materials;
    Environment environment;
    std::vector<ObjectRecord> objects;
    std::uint64_t source_hash = 0;

    void add_triangle(const Triangle& t) { base_triangles_.push_back(t); }
    void add_sphere(const Sphere& s) { base_spheres_.push_back(s); }
    std::size_t triangle_count() const { return base_triangles_.size(); }
    std::size_t sphere_count() const { return base_spheres_.size(); }

    // Validates invariants and builds acceleration + light structures for frame 0.
    void finalize() {
        for (std::size_t i = 0; i < base_triangles_.size(); ++i) check_material(base_triangles_[i].material, "triangle", i);
        for (std::size_t i = 0; i < base_spheres_.size(); ++i) {
            check_material(base_spheres_[i].material, "sphere", i);
            if (materials[base_spheres_[i].material].is_emissive())
                throw ConfigError("sphere " + object_name(base_spheres_[i].object) +
                                  ": emissive spheres are not supported, use quads or triangles");
            if (!(base_spheres_[i].radius > 0))
                throw ConfigError("sphere " + object_name(base_spheres_[i].object) + ": radius must be positive");
        }
        for (const auto& m : materials) {
            if (m.kind == MaterialKind::RoughConductor && !(m.roughness > 0))
                throw ConfigError("material " + m.name + ": rough-conductor roughness must be > 0");
            if (m.is_delta() && m.is_emissive()) throw ConfigError("material " + m.name + ": mirror cannot be emissive");
        }
        for (auto& o : objects)
            std::sort(o.keys.begin(), o.keys.end(), [](const AnimationKey& a, const AnimationKey& b) { return a.frame < b.frame; });
        frame_ = -1;
        set_frame(0);
    }

    int frame() const { return frame_; }
    bool animated() const {
        for (const auto& o : objects)
            if (!o.keys.empty()) return true;
        return false;
    }

    // Source hash mixed with the current animation offsets: equal for frames that look the same.
    std::uint64_t state_hash() const {
        std::uint64_t h = source_hash ^ 0x9e3779b97f4a7c15ull;
        auto mix = [&h](double v) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h = (h ^ bits) * 1099511628211ull;
            h ^= h >> 29;
        };
        for (const auto& o : objects) {
            Vec3 t = translation_at(o, frame_ < 0 ? 0 : frame_);
            mix(t.x);
            mix(t.y);
            mix(t.z);
        }
        return h;
    }

    void set_frame(int frame) {
        if (frame == frame_) return;
        triangles_ = base_triangles_;
        spheres_ = base_spheres_;
        for (const auto& o : objects) {
            Vec3 t = translation_at(o, frame);
            if (is_black(t)) continue;
            for (auto i : o.triangles) {
                triangles_[i].p0 += t;
                triangles_[i].p1 += t;
                triangles_[i].p2 += t;
            }
            for (auto i : o.spheres) spheres_[i].center += t;
        }
        frame_ = frame;
        bvh_.build(triangles_, spheres_);
        bounds_ = bvh_.bounds();
        if (bounds_.empty()) {
            bounds_.expand(Vec3(-1.0));
            bounds_.expand(Vec3(1.0));
        }
        ray_epsilon_ = 1e-4 * bounds_.diagonal();
        build_lights();
    }

    const std::vector<Triangle>& triangles() const { return triangles_; }
    const std::vector<Sphere>& spheres() const { return spheres_; }
    const Bvh& bvh() const { return bvh_; }
    const Aabb& bounds() const { return bounds_; }
    double ray_epsilon() const { return ray_epsilon_; }
    std::size_t light_count() const { return light_tris_.size(); }
    bool has_lights() const { return !light_tris_.empty() || environment.present(); }
    double environment_selection_probability() const { return env_prob_; }

    std::optional<Interaction> intersect(const Ray& ray) const { return finish(bvh_.intersect(ray, t_min()), ray); }
    std::optional<Interaction> intersect_linear(const Ray& ray) const { return finish(bvh_.intersect_linear(ray, t_min()), ray); }

    bool occluded(const Ray& ray) const { return bvh_.occluded(ray, t_min()); }

    // Offset origin on the side of the geometric normal facing dir.
    Vec3 offset_origin(const Interaction& it, const Vec3& dir) const {
        double s = dot(dir, it.geometric_normal) >= 0 ? 1.0 : -1.0;
        return it.position + it.geometric_normal * (s * ray_epsilon_);
    }
    Ray spawn_ray(const Interaction& it, const Vec3& dir) const { return {offset_origin(it, dir), dir}; }

    // Shadow ray between an interaction and a point on a light (offset at the far end too).
    bool visible(const Interaction& it, const Vec3& target) const {
        Vec3 o = offset_origin(it, target - it.position);
        Vec3 d = target - o;
        double dist = length(d);
        if (dist <= 2.0 * ray_epsilon_) return true;
        Ray r{o, d / dist, dist - 2.0 * ray_epsilon_};
        return !occluded(r);
    }
    bool escapes(const Interaction& it, const Vec3& dir) const { return !occluded(spawn_ray(it, dir)); }

    const Material& material(const Interaction& it) const { return materials[it.material]; }

    // Emitted radiance leaving a surface hit toward it.wo (one-sided emitters).
    Rgb emitted(const Interaction& it) const {
        const Material& m = materials[it.material];
        if (!m.is_emissive() || !it.front_face || it.prim >= triangles_.size()) return Rgb(0.0);
        return m.emission;
    }

    // Area-light sample for NEE. Consumes exactly three numbers.
    std::optional<LightSample> sample_area_light(double u_select, double u0, double u1) const {
        if (light_tris_.empty()) return std::nullopt;
        auto s = light_dist_.sample(u_select);
        const Triangle& tri = triangles_[light_tris_[s.index]];
        auto [b1, b2] = sample_uniform_triangle(u0, u1);
        LightSample ls;
        ls.position = tri.p0 * (1.0 - b1 - b2) + tri.p1 * b1 + tri.p2 * b2;
        ls.normal = tri.normal();
        ls.radiance = materials[tri.material].emission;
        ls.pdf_area = s.prob / tri.area() * (1.0 - env_prob_);
        return ls;
    }

    // Solid-angle pdf with which NEE would have produced the emitter hit `light_hit` as seen from `from`.
    double light_pdf_solid_angle(const Vec3& from, const Interaction& light_hit) const {
        auto it = light_index_.find(light_hit.prim);
        if (it == light_index_.end() || !light_hit.front_face) return 0.0;
        const Triangle& tri = triangles_[light_hit.prim];
        double pdf_area = light_dist_.prob(it->second) / tri.area() * (1.0 - env_prob_);
        double d2 = length_squared(light_hit.position - from);
        double cos_l = std::abs(dot(tri.normal(), light_hit.wo));
        return cos_l > 0 ? pdf_area * d2 / cos_l : 0.0;
    }

    double environment_pdf(const Vec3& dir) const {
        return environment.present() ? env_prob_ * environment.pdf(dir) : 0.0;
    }

private:
    double t_min() const { return 1e-3 * ray_epsilon_; }

    std::string object_name(int id) const {
        return id >= 0 && std::size_t(id) < objects.size() ? "'" + objects[id].name + "'" : "#" + std::to_string(id);
    }

    void check_material(int m, const char* what, std::size_t i) const {
        if (m < 0 || std::size_t(m) >= materials.size())
            throw ConfigError(std::string(what) + " " + std::to_string(i) + " references an invalid material id " +
                              std::to_string(m));
    }

    static Vec3 translation_at(const ObjectRecord& o, int frame) {
        Vec3 t(0.0);
        for (const auto& k : o.keys)
            if (k.frame <= frame) t = k.translation;
        return t;
    }

    void build_lights() {
        light_tris_.clear();
        light_index_.clear();
        std::vector<double> power;
        for (std::uint32_t i = 0; i < triangles_.size(); ++i) {
            const Material& m = materials[triangles_[i].material];
            if (!m.is_emissive()) continue;
            light_index_[i] = light_tris_.size();
            light_tris_.push_back(i);
            power.push_back(triangles_[i].area() * std::max(luminance(m.emission), 1e-6));
        }
        light_dist_ = Distribution1D(power);
        if (!environment.present()) env_prob_ = 0.0;
        else env_prob_ = light_tris_.empty() ? 1.0 : 0.5;
    }

    std::optional<Interaction> finish(const std::optional<PrimitiveHit>& h, const Ray& ray) const {
        if (!h) return std::nullopt;
        Interaction it;
        it.t = h->t;
        it.prim = h->prim;
        it.position = ray.origin + ray.dir * h->t;
        it.wo = -ray.dir;
        Vec3 n;
        if (h->prim < triangles_.size()) {
            const Triangle& tri = triangles_[h->prim];
            n = tri.normal();
            it.material = tri.material;
            it.u = h->b1;
            it.v = h->b2;
            it.position = tri.p0 * (1.0 - h->b1 - h->b2) + tri.p1 * h->b1 + tri.p2 * h->b2;
        } else {
            const Sphere& s = spheres_[h->prim - triangles_.size()];
            n = normalize(it.position - s.center);
            it.material = s.material;
            it.position = s.center + n * s.radius;
            it.u = 0.5 + std::atan2(n.z, n.x) / (2.0 * kPi);
            it.v = std::acos(std::clamp(n.y, -1.0, 1.0)) / kPi;
        }
        it.front_face = dot(n, it.wo) >= 0;
        if (!it.front_face) n = -n;
        it.geometric_normal = n;
        it.shading_normal = n;
        it.is_delta = materials[it.material].is_delta();
        return it;
    }

    std::vector<Triangle> base_triangles_;
    std::vector<Sphere> base_spheres_;
    std::vector<Triangle> triangles_;
    std::vector<Sphere> spheres_;
    Bvh bvh_;
    Aabb bounds_;
    double ray_epsilon_ = 1e-4;
    std::vector<std::uint32_t> light_tris_;
    std::map<std::uint32_t, std::size_t> light_index_;
    Distribution1D light_dist_;
    double env_prob_ = 0.0;
    int frame_ = -1;
};

}  // namespace tlmc
