#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "tlmc/caches/cache.hpp"
#include "tlmc/core/parallel.hpp"
#include "tlmc/scene/nee.hpp"

namespace tlmc {

// What a training pass records at each non-delta vertex.
enum class RecordTarget {
    IndirectIncident,   // nirc: reflected radiance at the next hit along a sampled direction
    ReflectedRadiance,  // nrc: reflected radiance leaving the vertex towards the previous one
    Visibility,         // nvc: shadow-ray transmittance towards a sampled environment direction
    EnvironmentDirect,  // nirc variant: environment radiance along a sampled environment direction, 0 if occluded
};

inline RecordTarget default_record_target(CacheKind k) {
    switch (k) {
        case CacheKind::Nirc: return RecordTarget::IndirectIncident;
        case CacheKind::Nrc: return RecordTarget::ReflectedRadiance;
        case CacheKind::Nvc: return RecordTarget::Visibility;
    }
    return RecordTarget::IndirectIncident;
}

struct TrainingPassConfig {
    double training_fraction = 0.025;  // training paths per frame, relative to the pixel count
    double rr_survival = 0.9;
    int rr_start_vertex = 2;
    int max_depth = 128;
    int visibility_directions = 4;  // per vertex, visibility targets only
    int threads = 1;
};

inline int training_path_count(const Scene& scene, const TrainingPassConfig& cfg) {
    double n = cfg.training_fraction * double(scene.camera.width) * double(scene.camera.height);
    return std::max(1, int(std::lround(n)));
}

namespace detail {

struct TrainingVertex {
    SurfacePoint surface;
    Vec3 wo;
    Vec3 wi;
    double pdf = 0;
    Rgb direct{0.0};     // MIS-weighted NEE estimate
    Rgb weight{0.0};     // f cos / pdf / rr, valid when `continued`
    Rgb next_emission{0.0};  // MIS-weighted emission or environment found by the continuation ray
    bool delta = false;
    bool continued = false;
};

}  // namespace detail

// Records from one training path that starts at vertex `start` (vertex index 1).
inline void collect_records_from(const Scene& scene, RecordTarget target, const TrainingPassConfig& cfg,
                                 const Interaction& start, RngStream& rng, int frame, std::vector<TrainingRecord>& out) {
    using detail::TrainingVertex;
    std::optional<Interaction> hit = start;
    std::vector<TrainingVertex> path;
    const bool visibility = target == RecordTarget::Visibility || target == RecordTarget::EnvironmentDirect;
    for (int depth = 1; hit && depth <= cfg.max_depth; ++depth) {
        const Interaction it = *hit;  // copy: `hit` is reassigned below
        const Material& m = scene.material(it);
        Bsdf bsdf(m, it);
        TrainingVertex v;
        v.delta = m.is_delta();
        v.wo = it.wo;
        v.surface = make_surface_point(scene, it);
        if (!v.delta) {
            NeeSample nee = sample_light_nee(scene, it, bsdf, rng);
            v.direct = nee.weighted;
            if (visibility && scene.environment.present()) {
                for (int k = 0; k < cfg.visibility_directions; ++k) {
                    double u0 = rng.uniform(), u1 = rng.uniform();
                    DirectionSample d = scene.environment.sample(u0, u1);
                    if (!(d.pdf > 0) || dot(d.dir, it.shading_normal) <= 0) continue;
                    bool open = scene.escapes(it, d.dir);
                    TrainingRecord r;
                    r.surface = v.surface;
                    r.dir = d.dir;
                    r.pdf = d.pdf;
                    r.frame = frame;
                    r.target = target == RecordTarget::Visibility ? Rgb(open ? 1.0 : 0.0)
                                                                  : (open ? scene.environment.eval(d.dir) : Rgb(0.0));
                    out.push_back(r);
                }
            }
        }
        double u0 = rng.uniform(), u1 = rng.uniform();
        BsdfSample s = bsdf.sample(u0, u1);
        double u_rr = rng.uniform();
        if (!s.valid) {
            path.push_back(v);
            break;
        }
        double survive = depth >= cfg.rr_start_vertex ? cfg.rr_survival : 1.0;
        if (u_rr >= survive) {
            path.push_back(v);
            break;
        }
        v.wi = s.wi;
        v.pdf = s.pdf;
        v.weight = s.weight / survive;
        v.continued = true;
        Ray next = scene.spawn_ray(it, s.wi);
        hit = scene.intersect(next);
        if (!hit) {
            if (scene.environment.present()) {
                double w = v.delta ? 1.0 : balance_heuristic(s.pdf, 1, scene.environment_pdf(s.wi), 1).weight;
                v.next_emission = scene.environment.eval(s.wi) * w;
            }
        } else {
            Rgb le = scene.emitted(*hit);
            if (!is_black(le)) {
                double w = v.delta ? 1.0 : balance_heuristic(s.pdf, 1, scene.light_pdf_solid_angle(it.position, *hit), 1).weight;
                v.next_emission = le * w;
            }
        }
        path.push_back(v);
    }
    if (visibility) return;
    // Reflected radiance estimates, back to front.
    std::vector<Rgb> reflected(path.size() + 1, Rgb(0.0));
    for (std::size_t k = path.size(); k-- > 0;) {
        const TrainingVertex& v = path[k];
        Rgb r = v.direct;
        if (v.continued) r += v.weight * (v.next_emission + reflected[k + 1]);
        reflected[k] = r;
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
        const TrainingVertex& v = path[k];
        if (v.delta) continue;
        TrainingRecord r;
        r.surface = v.surface;
        r.frame = frame;
        if (target == RecordTarget::ReflectedRadiance) {
            r.dir = v.wo;
            r.pdf = 1.0;
            r.target = reflected[k];
        } else {
            if (!v.continued || !(v.pdf > 0)) continue;
            r.dir = v.wi;
            r.pdf = v.pdf;
            r.target = reflected[k + 1];
        }
        if (!is_finite(r.target)) continue;
        out.push_back(r);
    }
}

namespace detail {

inline void collect_path(const Scene& scene, RecordTarget target, const TrainingPassConfig& cfg, RngStream rng, int frame,
                         std::vector<TrainingRecord>& out) {
    const Camera& cam = scene.camera;
    double px = rng.uniform() * cam.width, py = rng.uniform() * cam.height;
    auto hit = scene.intersect(cam.generate_ray(px, py));
    if (hit) collect_records_from(scene, target, cfg, *hit, rng, frame, out);
}

}  // namespace detail

// Separate unbiased path-tracing pass producing supervised pairs; no self-training.
inline std::vector<TrainingRecord> collect_training_records(const Scene& scene, RecordTarget target, int paths,
                                                            std::uint64_t seed, int frame,
                                                            const TrainingPassConfig& cfg = {}) {
    if ((target == RecordTarget::Visibility || target == RecordTarget::EnvironmentDirect) && !scene.environment.present())
        throw ConfigError("visibility training needs an environment light");
    std::vector<std::vector<TrainingRecord>> per_path(std::max(paths, 0));
    parallel_for(paths, cfg.threads, [&](int p) {
        RngStream rng = RngStream::keyed(seed, {std::uint64_t(RngDomain::Training), std::uint64_t(frame), std::uint64_t(p)});
        detail::collect_path(scene, target, cfg, rng, frame, per_path[p]);
    }, 16);
    std::vector<TrainingRecord> out;
    for (auto& v : per_path) out.insert(out.end(), v.begin(), v.end());
    return out;
}

inline std::vector<TrainingRecord> collect_training_records(const Scene& scene, CacheKind kind, int paths,
                                                            std::uint64_t seed, int frame,
                                                            const TrainingPassConfig& cfg = {}) {
    return collect_training_records(scene, default_record_target(kind), paths, seed, frame, cfg);
}

}  // namespace tlmc
