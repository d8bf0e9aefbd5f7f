#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "tlmc/baselines/sh_model.hpp"
#include "tlmc/baselines/vmf.hpp"
#include "tlmc/caches/cache.hpp"
#include "tlmc/core/parallel.hpp"
#include "tlmc/core/stats.hpp"
#include "tlmc/estimators/integrator.hpp"

namespace tlmc {

// One BSDF-sampled draw of the indirect shading integrand at a fixed vertex.
struct IntegrandSample {
    Vec3 dir;
    double pdf = 0;
    Rgb weight{0.0};    // f cos / pdf
    Rgb incident{0.0};  // path-traced indirect incident radiance along dir
    bool valid = false;

    Rgb integrand() const { return incident * weight * pdf; }  // L f cos
    Rgb estimate() const { return incident * weight; }         // plain one-sample estimator
};

inline IntegrandSample sample_integrand(const Integrator& integ, const Interaction& it, const Bsdf& bsdf, RngStream& rng) {
    IntegrandSample out;
    double u0 = rng.uniform(), u1 = rng.uniform();
    BsdfSample s = bsdf.sample(u0, u1);
    if (!s.valid || s.is_delta) return out;
    out.dir = s.wi;
    out.pdf = s.pdf;
    out.weight = s.weight;
    out.valid = true;
    const Scene& scene = integ.scene();
    auto hit = scene.intersect(scene.spawn_ray(it, s.wi));
    if (hit) out.incident = integ.reflected_radiance(*hit, rng, 2);
    return out;
}

enum class ResidualKind { Plain, ControlVariate, IncidentCache };

// g for control variates (whole integrand), n for incident-radiance caches.
struct ResidualModel {
    ResidualKind kind = ResidualKind::Plain;
    std::function<Rgb(const Vec3&)> eval;

    Rgb residual(const IntegrandSample& s) const {
        if (!s.valid) return Rgb(0.0);
        switch (kind) {
            case ResidualKind::Plain: return s.estimate();
            case ResidualKind::ControlVariate: return s.estimate() - eval(s.dir) / s.pdf;
            case ResidualKind::IncidentCache: return (s.incident - eval(s.dir)) * s.weight;
        }
        return Rgb(0.0);
    }
};

struct RelativeVariance {
    double value = 0;       // variance / mean^2, or the absolute variance when `absolute`
    double variance = 0;
    double mean = 0;        // of the plain estimator
    bool absolute = false;  // mean radiance was zero
};

inline RelativeVariance relative_variance(const ScalarStats& residual, const ScalarStats& plain) {
    RelativeVariance r;
    r.variance = residual.variance();
    r.mean = plain.mean;
    if (plain.mean > 0) {
        r.value = r.variance / (plain.mean * plain.mean);
    } else {
        r.value = r.variance;
        r.absolute = true;
    }
    return r;
}

// Residual variance of one model at one vertex from `samples` fresh draws.
inline RelativeVariance measure_residual_variance(const Integrator& integ, const Interaction& it,
                                                  const ResidualModel& model, int samples, RngStream& rng) {
    Bsdf bsdf(integ.scene().material(it), it);
    ScalarStats res, plain;
    for (int k = 0; k < samples; ++k) {
        IntegrandSample s = sample_integrand(integ, it, bsdf, rng);
        res.add(average(model.residual(s)));
        plain.add(s.valid ? average(s.estimate()) : 0.0);
    }
    return relative_variance(res, plain);
}

struct CompareConfig {
    int fit_samples = 2048;     // per pixel, control-variate fitting
    int measure_samples = 128;  // per pixel, shared by every method
    int em_batch = 32;
    int sh_bands = 5;
    int vmf_lobes = 11;
    int pixel_stride = 1;
    int threads = 1;
    std::uint64_t seed = 1;
};

struct PixelComparison {
    int x = 0, y = 0;
    double pt = 0, nirc = 0, sh = 0, vmf = 0;
    double mean = 0;
};

struct CompareResult {
    double pt = 0, nirc = 0, sh = 0, vmf = 0;  // averages over pixels with non-zero mean
    int pixels = 0;
    std::vector<PixelComparison> per_pixel;
};

inline std::optional<Interaction> pixel_center_vertex(const Scene& scene, int x, int y) {
    auto hit = scene.intersect(scene.camera.generate_ray(x + 0.5, y + 0.5));
    if (!hit || scene.material(*hit).is_delta()) return std::nullopt;
    return hit;
}

struct FittedPixelModels {
    ShPixelModel sh;
    VmfPixelModel vmf;
};

// Per-pixel SH and vMF fit to the whole integrand L f cos, from fitting streams only.
inline FittedPixelModels fit_pixel_models(const Integrator& integ, const Interaction& it, const CompareConfig& cfg,
                                          RngStream& rng) {
    FittedPixelModels m{ShPixelModel(cfg.sh_bands), {}};
    vmf_init_fibonacci(m.vmf, cfg.vmf_lobes, Rgb(0.0));
    StepwiseEmState em = vmf_em_state(m.vmf);
    Bsdf bsdf(integ.scene().material(it), it);
    std::vector<VmfSample> batch;
    batch.reserve(std::size_t(cfg.em_batch));
    for (int k = 0; k < cfg.fit_samples; ++k) {
        IntegrandSample s = sample_integrand(integ, it, bsdf, rng);
        if (!s.valid) continue;
        Rgb f = s.integrand();
        m.sh.accumulate(s.dir, f, s.pdf);
        batch.push_back({s.dir, f, s.pdf});
        if (int(batch.size()) == cfg.em_batch) {
            vmf_stepwise_em_update(m.vmf, em, batch);
            batch.clear();
        }
    }
    return m;
}

// Fits SH and vMF per pixel, then measures the residual variance of plain MC,
// two-level with the incident cache, and both control variates on identical samples.
inline CompareResult compare_residual_variance(const Integrator& integ, const NeuralCache* nirc, const CompareConfig& cfg) {
    const Scene& scene = integ.scene();
    const int w = scene.camera.width, h = scene.camera.height, stride = std::max(1, cfg.pixel_stride);
    std::vector<std::pair<int, int>> pixels;
    for (int y = stride / 2; y < h; y += stride)
        for (int x = stride / 2; x < w; x += stride) pixels.emplace_back(x, y);
    std::vector<std::optional<PixelComparison>> out(pixels.size());
    parallel_for(int(pixels.size()), cfg.threads, [&](int i) {
        auto [x, y] = pixels[i];
        auto it = pixel_center_vertex(scene, x, y);
        if (!it) return;
        const std::uint64_t pixel = std::uint64_t(y) * w + x;
        RngStream fit = RngStream::keyed(cfg.seed, {std::uint64_t(RngDomain::Fitting), pixel});
        FittedPixelModels models = fit_pixel_models(integ, *it, cfg, fit);
        SurfaceEncoding<float> enc;
        if (nirc) nirc->encode(make_surface_point(scene, *it), enc);
        ResidualModel plain, cache, sh, vmf;
        if (nirc) cache = {ResidualKind::IncidentCache, [&](const Vec3& d) { return nirc->evaluate(enc, d); }};
        sh = {ResidualKind::ControlVariate, [&](const Vec3& d) { return models.sh.eval(d); }};
        vmf = {ResidualKind::ControlVariate, [&](const Vec3& d) { return models.vmf.eval(d); }};
        Bsdf bsdf(scene.material(*it), *it);
        RngStream rng = RngStream::keyed(cfg.seed, {std::uint64_t(RngDomain::Measurement), pixel});
        ScalarStats base, r_pt, r_nirc, r_sh, r_vmf;
        for (int k = 0; k < cfg.measure_samples; ++k) {
            IntegrandSample s = sample_integrand(integ, *it, bsdf, rng);
            base.add(s.valid ? average(s.estimate()) : 0.0);
            r_pt.add(average(plain.residual(s)));
            if (nirc) r_nirc.add(average(cache.residual(s)));
            r_sh.add(average(sh.residual(s)));
            r_vmf.add(average(vmf.residual(s)));
        }
        if (!(base.mean > 0)) return;
        PixelComparison pc;
        pc.x = x;
        pc.y = y;
        pc.mean = base.mean;
        pc.pt = relative_variance(r_pt, base).value;
        pc.nirc = nirc ? relative_variance(r_nirc, base).value : pc.pt;
        pc.sh = relative_variance(r_sh, base).value;
        pc.vmf = relative_variance(r_vmf, base).value;
        out[i] = pc;
    });
    CompareResult res;
    for (auto& o : out) {
        if (!o) continue;
        res.per_pixel.push_back(*o);
        res.pt += o->pt;
        res.nirc += o->nirc;
        res.sh += o->sh;
        res.vmf += o->vmf;
    }
    res.pixels = int(res.per_pixel.size());
    if (res.pixels > 0) {
        res.pt /= res.pixels;
        res.nirc /= res.pixels;
        res.sh /= res.pixels;
        res.vmf /= res.pixels;
    }
    return res;
}

// Cheap per-frame V_rel of the two-level residual, averaged over a pixel subset (EMA traces).
inline double frame_residual_variance(const Integrator& integ, const NeuralCache& nirc, int pixel_stride, int samples,
                                      std::uint64_t seed, int frame, int threads = 1) {
    const Scene& scene = integ.scene();
    const int w = scene.camera.width, h = scene.camera.height, stride = std::max(1, pixel_stride);
    std::vector<std::pair<int, int>> pixels;
    for (int y = stride / 2; y < h; y += stride)
        for (int x = stride / 2; x < w; x += stride) pixels.emplace_back(x, y);
    std::vector<double> v(pixels.size(), -1.0);
    parallel_for(int(pixels.size()), threads, [&](int i) {
        auto [x, y] = pixels[i];
        auto it = pixel_center_vertex(scene, x, y);
        if (!it) return;
        SurfaceEncoding<float> enc;
        nirc.encode(make_surface_point(scene, *it), enc);
        ResidualModel m{ResidualKind::IncidentCache, [&](const Vec3& d) { return nirc.evaluate(enc, d); }};
        RngStream rng = RngStream::keyed(seed, {std::uint64_t(RngDomain::Measurement), std::uint64_t(frame),
                                                std::uint64_t(y) * w + x});
        RelativeVariance r = measure_residual_variance(integ, *it, m, samples, rng);
        if (!r.absolute) v[i] = r.value;
    });
    double sum = 0;
    int n = 0;
    for (double x : v)
        if (x >= 0) {
            sum += x;
            ++n;
        }
    return n ? sum / n : 0.0;
}

}  // namespace tlmc
