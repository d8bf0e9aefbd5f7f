#pragma once

#include <functional>
#include <vector>

#include "tlmc/baselines/residual_variance.hpp"
#include "tlmc/caches/cache.hpp"
#include "tlmc/core/parallel.hpp"
#include "tlmc/core/stats.hpp"

namespace tlmc {

// Environment-sampled direct light at one vertex, estimated in two levels:
// L_c = (1/Nc) sum s(w) f cos / p over cache-only directions, plus one traced
// residual (Le V - s) f cos / p. `surrogate` predicts Le V along w.
struct EnvDirectSample {
    Rgb estimate{0.0};  // two-level
    Rgb plain{0.0};     // one traced sample, Le V f cos / p
};

inline EnvDirectSample env_direct_two_level(const Scene& scene, const Interaction& it, const Bsdf& bsdf,
                                            const std::function<Rgb(const Vec3&)>& surrogate, int nc, RngStream& rng) {
    const Environment& env = scene.environment;
    auto fcos_over_p = [&](const Vec3& w, double pdf) {
        double c = dot(w, it.shading_normal);
        return c > 0 && pdf > 0 ? bsdf.eval(w) * (c / pdf) : Rgb(0.0);
    };
    Rgb lc(0.0);
    for (int k = 0; k < nc; ++k) {
        double u0 = rng.uniform(), u1 = rng.uniform();
        DirectionSample d = env.sample(u0, u1);
        lc += surrogate(d.dir) * fcos_over_p(d.dir, d.pdf);
    }
    if (nc > 0) lc = lc / double(nc);
    double u0 = rng.uniform(), u1 = rng.uniform();
    DirectionSample d = env.sample(u0, u1);
    Rgb w = fcos_over_p(d.dir, d.pdf);
    Rgb truth(0.0);
    if (!is_black(w) && scene.escapes(it, d.dir)) truth = env.eval(d.dir);
    EnvDirectSample s;
    s.plain = truth * w;
    s.estimate = lc + (truth - surrogate(d.dir)) * w;
    return s;
}

struct EnvDirectComparison {
    double pt = 0;    // relative variance of the plain one-sample estimator
    double nvc = 0;   // of the two-level estimator with Le * visibility-cache
    double nirc = 0;  // of the two-level estimator with an incident-radiance cache of direct env light
    double visibility_error = 0;  // mean |v_hat - V| over env-sampled upper-hemisphere directions
    int pixels = 0;
};

// Same directions for every estimator: each pixel reuses one stream per trial.
inline EnvDirectComparison compare_env_direct(const Scene& scene, const NeuralCache& nvc, const NeuralCache* nirc,
                                              int nc, int trials, int stride, std::uint64_t seed, int threads = 1) {
    if (!scene.environment.present()) throw ConfigError("direct environment comparison needs an environment");
    if (nvc.kind() != CacheKind::Nvc) throw ConfigError("compare_env_direct: first cache must be nvc");
    const int w = scene.camera.width, h = scene.camera.height;
    stride = std::max(1, stride);
    std::vector<std::pair<int, int>> pixels;
    for (int y = stride / 2; y < h; y += stride)
        for (int x = stride / 2; x < w; x += stride) pixels.emplace_back(x, y);
    struct Out {
        bool ok = false;
        double pt = 0, nvc = 0, nirc = 0, verr = 0;
        int vcount = 0;
    };
    std::vector<Out> out(pixels.size());
    parallel_for(int(pixels.size()), threads, [&](int i) {
        auto [x, y] = pixels[i];
        auto it = pixel_center_vertex(scene, x, y);
        if (!it) return;
        Bsdf bsdf(scene.material(*it), *it);
        SurfacePoint sp = make_surface_point(scene, *it);
        SurfaceEncoding<float> enc_v, enc_n;
        nvc.encode(sp, enc_v);
        if (nirc) nirc->encode(sp, enc_n);
        auto s_nvc = [&](const Vec3& d) { return scene.environment.eval(d) * nvc.evaluate(enc_v, d); };
        auto s_nirc = [&](const Vec3& d) { return nirc->evaluate(enc_n, d); };
        const std::uint64_t pixel = std::uint64_t(y) * w + x;
        ScalarStats pt, a, b;
        for (int t = 0; t < trials; ++t) {
            RngStream r1 = RngStream::keyed(seed, {std::uint64_t(RngDomain::Measurement), pixel, std::uint64_t(t)});
            RngStream r2 = r1;
            EnvDirectSample sv = env_direct_two_level(scene, *it, bsdf, s_nvc, nc, r1);
            pt.add(average(sv.plain));
            a.add(average(sv.estimate));
            if (nirc) b.add(average(env_direct_two_level(scene, *it, bsdf, s_nirc, nc, r2).estimate));
        }
        // Visibility accuracy on independent directions.
        RngStream rv = RngStream::keyed(seed, {std::uint64_t(RngDomain::Measurement), pixel, 0x5151u});
        Out o;
        for (int k = 0; k < trials; ++k) {
            double u0 = rv.uniform(), u1 = rv.uniform();
            DirectionSample d = scene.environment.sample(u0, u1);
            if (dot(d.dir, it->shading_normal) <= 0) continue;
            double truth = scene.escapes(*it, d.dir) ? 1.0 : 0.0;
            o.verr += std::abs(average(nvc.evaluate(enc_v, d.dir)) - truth);
            ++o.vcount;
        }
        if (!(pt.mean > 0)) {
            out[i].verr = o.verr;
            out[i].vcount = o.vcount;
            return;
        }
        double m2 = pt.mean * pt.mean;
        o.ok = true;
        o.pt = pt.variance() / m2;
        o.nvc = a.variance() / m2;
        o.nirc = nirc ? b.variance() / m2 : o.pt;
        out[i] = o;
    });
    EnvDirectComparison res;
    double verr = 0;
    int vcount = 0;
    for (const auto& o : out) {
        verr += o.verr;
        vcount += o.vcount;
        if (!o.ok) continue;
        res.pt += o.pt;
        res.nvc += o.nvc;
        res.nirc += o.nirc;
        ++res.pixels;
    }
    if (res.pixels) {
        res.pt /= res.pixels;
        res.nvc /= res.pixels;
        res.nirc /= res.pixels;
    }
    res.visibility_error = vcount ? verr / vcount : 0.0;
    return res;
}

}  // namespace tlmc
