#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "tlmc/caches/cache.hpp"
#include "tlmc/core/pfm.hpp"
#include "tlmc/estimators/render.hpp"

namespace tlmc {

inline std::uint64_t hash_floats(std::span<const float> v, std::uint64_t h = 1469598103934665603ull) {
    for (float f : v) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        for (int b = 0; b < 4; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    return h;
}

inline std::uint64_t cache_hash(const NeuralCache& cache) {
    return hash_floats(cache.field().params(), 1469598103934665603ull ^ std::uint64_t(cache.kind()));
}

struct ReferenceKey {
    std::string tag = "pt";  // what was rendered; "pt" for the path-traced reference
    std::uint64_t scene_hash = 0;
    int spp = 0;
    std::uint64_t seed = 0;

    std::string filename() const {
        char buf[96];
        std::snprintf(buf, sizeof buf, "_%016llx_%d_%llu.pfm", static_cast<unsigned long long>(scene_hash), spp,
                      static_cast<unsigned long long>(seed));
        return tag + buf;
    }
};

// Converged renders on disk, keyed by what they depend on.
class ReferenceStore {
public:
    explicit ReferenceStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& directory() const { return dir_; }
    std::filesystem::path path(const ReferenceKey& k) const { return dir_ / k.filename(); }
    bool contains(const ReferenceKey& k) const { return std::filesystem::exists(path(k)); }

    std::optional<Image> load(const ReferenceKey& k) const {
        if (!contains(k)) return std::nullopt;
        return read_pfm(path(k).string());
    }
    void store(const ReferenceKey& k, const Image& img) const {
        std::filesystem::create_directories(dir_);
        // Write then rename so an interrupted run never leaves a truncated reference.
        std::filesystem::path tmp = path(k);
        tmp += ".tmp";
        write_pfm(tmp.string(), img);
        std::filesystem::rename(tmp, path(k));
    }

private:
    std::filesystem::path dir_;
};

inline ReferenceKey pt_reference_key(const Scene& scene, int spp, std::uint64_t seed) {
    return {"pt", scene.state_hash(), spp, seed};
}

struct ReferenceImage {
    Image mean;
    Image variance_of_mean;  // from the spread of equal-size chunks
};

// Plain path-traced reference at the scene's current frame, rendered in chunks
// of `chunk` spp; chunk means give the reference's own standard error.
inline ReferenceImage render_pt_reference_stats(const Scene& scene, int spp, std::uint64_t seed, int threads, int chunk = 256) {
    EstimatorConfig ec;
    ec.mode = EstimatorMode::Pt;
    Integrator integ(scene, ec);
    const int w = scene.camera.width, h = scene.camera.height;
    PixelStats chunks(w, h);
    Image sum(w, h);
    int done = 0;
    while (done < spp) {
        int n = std::min(chunk, spp - done);
        RenderOptions o;
        o.seed = seed;
        o.frame = scene.frame();
        o.spp = n;
        o.sample_offset = std::uint64_t(done);
        o.threads = threads;
        Image img = render_frame(integ, o).image;
        for (std::size_t i = 0; i < sum.pixel_count(); ++i) sum[i] += img[i] * double(n);
        if (n == chunk) chunks.add(img);
        done += n;
    }
    ReferenceImage r;
    r.mean = Image(w, h);
    r.variance_of_mean = Image(w, h);
    const double nchunks = double(chunks[0].count);
    for (std::size_t i = 0; i < sum.pixel_count(); ++i) {
        r.mean[i] = sum[i] / double(spp);
        // var(chunk mean) / number of chunks; zero when there is a single chunk.
        r.variance_of_mean[i] = nchunks > 1 ? chunks[i].variance() / nchunks : Rgb(0.0);
    }
    return r;
}

inline Image render_pt_reference(const Scene& scene, int spp, std::uint64_t seed, int threads, int chunk = 256) {
    return render_pt_reference_stats(scene, spp, seed, threads, chunk).mean;
}

inline ReferenceImage pt_reference_stats(const ReferenceStore& store, const Scene& scene, int spp, std::uint64_t seed,
                                         int threads, bool render_if_missing) {
    ReferenceKey key = pt_reference_key(scene, spp, seed), vkey = key;
    vkey.tag = "pt-var";
    auto m = store.load(key);
    auto v = store.load(vkey);
    if (m && v) return {*m, *v};
    if (!render_if_missing)
        throw ConfigError("no reference for this scene at " + std::to_string(spp) + " spp, seed " + std::to_string(seed) +
                          " in '" + store.directory().string() + "'; run `tlmc precompute-reference` first");
    ReferenceImage r = render_pt_reference_stats(scene, spp, seed, threads);
    store.store(key, r.mean);
    store.store(vkey, r.variance_of_mean);
    return r;
}

inline Image pt_reference(const ReferenceStore& store, const Scene& scene, int spp, std::uint64_t seed, int threads,
                          bool render_if_missing) {
    ReferenceKey key = pt_reference_key(scene, spp, seed);
    if (auto img = store.load(key)) return *img;
    return pt_reference_stats(store, scene, spp, seed, threads, render_if_missing).mean;
}

// Converged render that stops at the first vertex wherever the cache allows it
// (SPH mode with every pixel masked in): the raw material of a bias map.
inline ReferenceKey v1_render_key(const Scene& scene, const NeuralCache& cache, int spp, std::uint64_t seed) {
    return {std::string("v1-") + to_string(cache.kind()), scene.state_hash() ^ cache_hash(cache), spp, seed};
}

inline Image render_v1_terminated(const Scene& scene, const NeuralCache& cache, const EstimatorConfig& base, int spp,
                                  std::uint64_t seed, int threads) {
    EstimatorConfig ec = base;
    CacheSet cs;
    if (cache.kind() == CacheKind::Nirc) {
        ec.mode = EstimatorMode::BiasedNircSph;
        cs.nirc = &cache;
    } else if (cache.kind() == CacheKind::Nrc) {
        ec.mode = EstimatorMode::BiasedNrcSph;
        cs.nrc = &cache;
    } else {
        throw ConfigError("bias maps need a nirc or nrc cache");
    }
    Integrator integ(scene, ec, cs);
    std::vector<std::uint8_t> all(std::size_t(scene.camera.width) * scene.camera.height, 1);
    RenderOptions o;
    o.seed = seed;
    o.frame = scene.frame();
    o.spp = spp;
    o.threads = threads;
    o.v1_mask = &all;
    return render_frame(integ, o).image;
}

inline Image v1_terminated(const ReferenceStore& store, const Scene& scene, const NeuralCache& cache,
                           const EstimatorConfig& base, int spp, std::uint64_t seed, int threads, bool render_if_missing) {
    ReferenceKey key = v1_render_key(scene, cache, spp, seed);
    if (auto img = store.load(key)) return *img;
    if (!render_if_missing)
        throw ConfigError(std::string("no converged first-vertex render for this ") + to_string(cache.kind()) +
                          " snapshot in '" + store.directory().string() +
                          "'; run `tlmc precompute-reference` with the same snapshots first");
    Image img = render_v1_terminated(scene, cache, base, spp, seed, threads);
    store.store(key, img);
    return img;
}

// Per-pixel relative bias, channel averaged: |m - ref| / (ref + eps).
inline std::vector<double> relative_bias_map(const Image& converged, const Image& ref, double eps = 0.01) {
    require_same_shape(converged, ref);
    std::vector<double> m(ref.pixel_count());
    for (std::size_t i = 0; i < m.size(); ++i) {
        double s = 0;
        for (int c = 0; c < 3; ++c) s += std::abs(converged[i][c] - ref[i][c]) / (ref[i][c] + eps);
        m[i] = s / 3.0;
    }
    return m;
}

}  // namespace tlmc
