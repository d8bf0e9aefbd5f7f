#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tlmc/caches/cache.hpp"
#include "tlmc/estimators/heuristics.hpp"
#include "tlmc/scene/nee.hpp"

namespace tlmc {

enum class EstimatorMode { Pt, TwoLevel, BiasedNircBth, BiasedNircSph, BiasedNrcSph };

inline const char* to_string(EstimatorMode m) {
    switch (m) {
        case EstimatorMode::Pt: return "pt";
        case EstimatorMode::TwoLevel: return "two-level";
        case EstimatorMode::BiasedNircBth: return "biased-nirc-bth";
        case EstimatorMode::BiasedNircSph: return "biased-nirc-sph";
        case EstimatorMode::BiasedNrcSph: return "biased-nrc-sph";
    }
    return "?";
}

inline EstimatorMode parse_estimator_mode(const std::string& s) {
    for (EstimatorMode m : {EstimatorMode::Pt, EstimatorMode::TwoLevel, EstimatorMode::BiasedNircBth,
                            EstimatorMode::BiasedNircSph, EstimatorMode::BiasedNrcSph})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown mode '" + s + "' (expected pt, two-level, biased-nirc-bth, biased-nirc-sph or biased-nrc-sph)");
}

inline bool uses_nirc(EstimatorMode m) {
    return m == EstimatorMode::TwoLevel || m == EstimatorMode::BiasedNircBth || m == EstimatorMode::BiasedNircSph;
}
inline bool uses_nrc(EstimatorMode m) { return m == EstimatorMode::BiasedNrcSph; }

struct EstimatorConfig {
    EstimatorMode mode = EstimatorMode::Pt;
    std::array<int, 3> nc{15, 5, 5};  // cache samples at the first three non-delta vertices (two-level)
    int nc_biased = 5;                 // cache samples at a biased termination vertex
    int nr = 1;                        // residual continuations from the first vertex (two-level)
    int max_cache_vertices = 3;
    double sph_c = 0.01;
    SpreadForm spread_form = SpreadForm::Sum;
    double rr_probability = 0.1;  // termination probability
    int rr_start_vertex = 2;
    double roughness_cutoff = 0.0625;  // nrc is not used at the first vertex below this (linear) roughness
    int max_depth = 128;

    void validate() const {
        if (mode == EstimatorMode::TwoLevel) {
            for (int i = 0; i < std::min(max_cache_vertices, 3); ++i)
                if (nc[i] < 1) throw ConfigError("nc must be >= 1 at every cache vertex");
            if (nr < 1) throw ConfigError("nr must be >= 1");
        }
        if ((mode == EstimatorMode::BiasedNircBth || mode == EstimatorMode::BiasedNircSph) && nc_biased < 1)
            throw ConfigError("nc_biased must be >= 1");
        if (max_cache_vertices < 0 || max_cache_vertices > 3) throw ConfigError("max_cache_vertices must lie in [0, 3]");
        if (!(sph_c > 0)) throw ConfigError("sph_c must be positive");
        if (!(rr_probability >= 0 && rr_probability < 1)) throw ConfigError("rr_probability must lie in [0, 1)");
        if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
        if (rr_start_vertex < 1) throw ConfigError("rr_start_vertex must be >= 1");
    }
};

struct CacheSet {
    const NeuralCache* nirc = nullptr;
    const NeuralCache* nrc = nullptr;
};

struct PathSample {
    Rgb radiance{0.0};
    int terminal_vertex = 0;  // 0 when the camera ray escapes
    bool rejected = false;    // non-finite estimate replaced by zero
    bool cache_terminated = false;
};

// (1/N) sum n(w_k) f cos / p over BSDF-sampled directions. Invalid draws count as zero.
inline Rgb estimate_Lc(const NeuralCache& cache, SurfaceEncoding<float>& enc, const Bsdf& bsdf, int n, RngStream& rng,
                       int* invalid = nullptr) {
    Rgb sum(0.0);
    for (int k = 0; k < n; ++k) {
        double u0 = rng.uniform(), u1 = rng.uniform();
        BsdfSample s = bsdf.sample(u0, u1);
        if (!s.valid || s.is_delta) {
            if (invalid) ++*invalid;
            continue;
        }
        sum += cache.evaluate(enc, s.wi) * s.weight;
    }
    return n > 0 ? sum / double(n) : Rgb(0.0);
}

inline Rgb estimate_Lc(const NeuralCache& cache, const SurfacePoint& sp, const Bsdf& bsdf, int n, RngStream& rng,
                       int* invalid = nullptr) {
    SurfaceEncoding<float> enc;
    cache.encode(sp, enc);
    return estimate_Lc(cache, enc, bsdf, n, rng, invalid);
}

// Path tracer with NEE + balance-heuristic MIS, and every cache-based variant
// sharing the same random-number layout. Stream layout per pixel sample:
// Path (camera jitter, NEE, continuation, roulette), CacheLevel+slot (cache
// integral directions) and Termination (heuristic coin flips).
class Integrator {
public:
    Integrator(const Scene& scene, const EstimatorConfig& cfg, CacheSet caches = {})
        : scene_(scene), cfg_(cfg), caches_(caches) {
        cfg.validate();
        if (uses_nirc(cfg.mode) && !caches.nirc) throw ConfigError(std::string(to_string(cfg.mode)) + " needs a nirc cache");
        if (uses_nrc(cfg.mode) && !caches.nrc) throw ConfigError("biased-nrc-sph needs an nrc cache");
    }

    const EstimatorConfig& config() const { return cfg_; }
    const Scene& scene() const { return scene_; }

    static RngStream stream(std::uint64_t seed, RngDomain d, int frame, std::size_t pixel, std::uint64_t sample,
                            std::uint64_t slot = 0) {
        return RngStream::keyed(seed, {std::uint64_t(d) + slot, std::uint64_t(frame), std::uint64_t(pixel), sample});
    }

    // One pixel sample. `v1_cache` enables termination at the first vertex in the
    // SPH modes (adaptive analysis).
    PathSample sample(int px, int py, std::uint64_t seed, int frame, std::uint64_t sample_index, bool v1_cache = false) const {
        const std::size_t pixel = std::size_t(py) * scene_.camera.width + px;
        Streams st;
        st.path = stream(seed, RngDomain::Path, frame, pixel, sample_index);
        st.term = stream(seed, RngDomain::Termination, frame, pixel, sample_index);
        for (int j = 0; j < 3; ++j) st.cache[j] = stream(seed, RngDomain::CacheLevel, frame, pixel, sample_index, j);
        double jx = st.path.uniform(), jy = st.path.uniform();
        Ray ray = scene_.camera.generate_ray(px + jx, py + jy);
        PathSample out;
        auto hit = scene_.intersect(ray);
        if (!hit) {
            if (scene_.environment.present()) out.radiance = scene_.environment.eval(ray.dir);
            return finish(out);
        }
        out.radiance = scene_.emitted(*hit);
        PathState ps;
        ps.spread0 = sph_initial_spread(hit->t, dot(hit->shading_normal, hit->wo));
        const int nr = cfg_.mode == EstimatorMode::TwoLevel ? cfg_.nr : 1;
        if (nr == 1) {
            walk(*hit, ps, st, v1_cache, 1.0, out);
        } else {
            Rgb base = out.radiance;
            Rgb sum(0.0);
            int terminal = 0;
            for (int r = 0; r < nr; ++r) {
                Streams br = st;
                if (r > 0) {
                    br.path = st.path.derive(std::uint64_t(r));
                    br.term = st.term.derive(std::uint64_t(r));
                    for (int j = 1; j < 3; ++j) br.cache[j] = st.cache[j].derive(std::uint64_t(r));
                }
                PathSample part;
                PathState pb = ps;
                walk(*hit, pb, br, v1_cache, r == 0 ? double(nr) : 0.0, part);
                sum += part.radiance;
                terminal += part.terminal_vertex;
            }
            out.radiance = base + sum / double(nr);
            out.terminal_vertex = (terminal + nr / 2) / nr;
        }
        return finish(out);
    }

    // Reflected (non-emitted) radiance leaving `it` towards it.wo, path traced.
    // `vertex` is the index the walk starts at, which sets where roulette begins.
    Rgb reflected_radiance(const Interaction& it, RngStream& rng, int vertex = 2) const {
        Streams st;
        st.path = rng;
        PathState ps;
        PathSample out;
        walk_pt(it, ps, st, vertex, out);
        rng = st.path;
        return out.radiance;
    }

private:
    struct Streams {
        RngStream path, term;
        std::array<RngStream, 3> cache;
    };

    static PathSample finish(PathSample out) {
        if (!is_finite(out.radiance)) {
            out.radiance = Rgb(0.0);
            out.rejected = true;
        }
        return out;
    }

    // Emission or environment found by a BSDF-sampled ray, with its MIS weight.
    Rgb continuation_emission(const Interaction& from, const BsdfSample& s, const std::optional<Interaction>& hit) const {
        if (!hit) {
            if (!scene_.environment.present()) return Rgb(0.0);
            double w = s.is_delta ? 1.0 : balance_heuristic(s.pdf, 1, scene_.environment_pdf(s.wi), 1).weight;
            return scene_.environment.eval(s.wi) * w;
        }
        Rgb le = scene_.emitted(*hit);
        if (is_black(le)) return le;
        double w = s.is_delta ? 1.0 : balance_heuristic(s.pdf, 1, scene_.light_pdf_solid_angle(from.position, *hit), 1).weight;
        return le * w;
    }

    // Plain path tracing from an arbitrary vertex index (no caches).
    void walk_pt(Interaction it, PathState& ps, Streams& st, int first_vertex, PathSample& out) const {
        ps.throughput = Rgb(1.0);
        for (int i = first_vertex;; ++i) {
            out.terminal_vertex = i;
            const Material& m = scene_.material(it);
            Bsdf bsdf(m, it);
            if (!m.is_delta()) out.radiance += ps.throughput * sample_light_nee(scene_, it, bsdf, st.path).weighted;
            if (i - first_vertex + 1 >= cfg_.max_depth) return;
            double u0 = st.path.uniform(), u1 = st.path.uniform();
            BsdfSample s = bsdf.sample(u0, u1);
            if (!s.valid) return;
            double survive = i >= cfg_.rr_start_vertex ? 1.0 - cfg_.rr_probability : 1.0;
            if (i >= cfg_.rr_start_vertex && st.path.uniform() >= survive) return;
            ps.throughput = ps.throughput * s.weight / survive;
            auto hit = scene_.intersect(scene_.spawn_ray(it, s.wi));
            out.radiance += ps.throughput * continuation_emission(it, s, hit);
            if (!hit) return;
            it = *hit;
        }
    }

    void walk(Interaction it, PathState& ps, Streams& st, bool v1_cache, double v1_cache_scale, PathSample& out) const {
        const EstimatorMode mode = cfg_.mode;
        Vec3 prev_position = it.position;
        int slot = 0;
        ps.throughput = Rgb(1.0);
        SurfaceEncoding<float> enc;
        for (int i = 1;; ++i) {
            out.terminal_vertex = i;
            ps.vertex = i;
            const Material& m = scene_.material(it);
            Bsdf bsdf(m, it);
            const bool delta = m.is_delta();
            if (i >= 2) sph_update(ps, length(it.position - prev_position), ps.prev_pdf, dot(it.shading_normal, it.wo), cfg_.spread_form);
            const Rgb beta = ps.throughput;

            if (!delta) {
                const bool sph_fires = i >= 2 && sph_should_terminate(ps, cfg_.sph_c);
                if (mode == EstimatorMode::BiasedNrcSph &&
                    ((i == 1 && v1_cache && m.feature_roughness() >= cfg_.roughness_cutoff) || sph_fires)) {
                    // Cached outgoing radiance replaces everything reflected here, direct light included.
                    out.radiance += beta * caches_.nrc->query(make_surface_point(scene_, it), it.wo);
                    out.cache_terminated = true;
                    return;
                }
                NeeSample nee = sample_light_nee(scene_, it, bsdf, st.path);
                if (mode == EstimatorMode::BiasedNircSph && ((i == 1 && v1_cache) || sph_fires)) {
                    terminate_with_nirc(it, bsdf, beta, nee, st, enc, out);
                    return;
                }
                if (mode == EstimatorMode::TwoLevel && slot < cfg_.max_cache_vertices) {
                    caches_.nirc->encode(make_surface_point(scene_, it), enc);
                    if (!(slot == 0 && v1_cache_scale == 0.0)) {
                        Rgb lc = estimate_Lc(*caches_.nirc, enc, bsdf, cfg_.nc[slot], st.cache[slot]);
                        out.radiance += slot == 0 ? beta * lc * v1_cache_scale : beta * lc;
                    }
                }
                if (mode == EstimatorMode::BiasedNircBth) {
                    // The decision needs the continuation pdf, so sample first.
                    if (i >= cfg_.max_depth) {
                        out.radiance += beta * nee.weighted;
                        return;
                    }
                    double u0 = st.path.uniform(), u1 = st.path.uniform();
                    BsdfSample s = bsdf.sample(u0, u1);
                    double ps_cont = s.valid ? bth_continuation_probability(s.pdf, cfg_.nc_biased) : 0.0;
                    double xi = st.term.uniform();
                    if (xi > ps_cont || (i > 1 && sph_fires)) {
                        terminate_with_nirc(it, bsdf, beta, nee, st, enc, out);
                        return;
                    }
                    out.radiance += beta * nee.weighted;
                    if (!continue_path(it, s, i, ps, st, prev_position, out, false)) return;
                    ++slot;
                    continue;
                }
                out.radiance += beta * nee.weighted;
            }
            if (i >= cfg_.max_depth) return;
            double u0 = st.path.uniform(), u1 = st.path.uniform();
            BsdfSample s = bsdf.sample(u0, u1);
            const bool cached_slot = mode == EstimatorMode::TwoLevel && !delta && slot < cfg_.max_cache_vertices;
            if (!delta) ++slot;
            if (!continue_path(it, s, i, ps, st, prev_position, out, cached_slot, &enc)) return;
        }
    }

    void terminate_with_nirc(const Interaction& it, const Bsdf& bsdf, const Rgb& beta, const NeeSample& nee, Streams& st,
                             SurfaceEncoding<float>& enc, PathSample& out) const {
        // No BSDF-sampled emission follows, so the light sample carries full weight.
        caches_.nirc->encode(make_surface_point(scene_, it), enc);
        Rgb lc = estimate_Lc(*caches_.nirc, enc, bsdf, cfg_.nc_biased, st.cache[0]);
        out.radiance += beta * (nee.contribution + lc);
        out.cache_terminated = true;
    }

    // Roulette, throughput update, residual subtraction and ray cast. Returns
    // false when the path ends; on success `it` is replaced by the next vertex.
    bool continue_path(Interaction& it, const BsdfSample& s, int i, PathState& ps, Streams& st, Vec3& prev_position,
                       PathSample& out, bool subtract_cache, SurfaceEncoding<float>* enc = nullptr) const {
        if (!s.valid) return false;
        double survive = i >= cfg_.rr_start_vertex ? 1.0 - cfg_.rr_probability : 1.0;
        if (i >= cfg_.rr_start_vertex && st.path.uniform() >= survive) return false;
        Rgb beta_next = ps.throughput * s.weight / survive;
        if (subtract_cache) out.radiance -= beta_next * caches_.nirc->evaluate(*enc, s.wi);
        ps.throughput = beta_next;
        ps.prev_pdf = s.pdf;
        ps.prev_delta = s.is_delta;
        auto hit = scene_.intersect(scene_.spawn_ray(it, s.wi));
        out.radiance += beta_next * continuation_emission(it, s, hit);
        if (!hit) return false;
        prev_position = it.position;
        it = *hit;
        return true;
    }

    const Scene& scene_;
    EstimatorConfig cfg_;
    CacheSet caches_;
};

}  // namespace tlmc
