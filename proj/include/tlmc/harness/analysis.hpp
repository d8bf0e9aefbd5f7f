#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tlmc/baselines/residual_variance.hpp"
#include "tlmc/estimators/render.hpp"
#include "tlmc/harness/csv.hpp"
#include "tlmc/harness/metrics.hpp"
#include "tlmc/harness/reference.hpp"
#include "tlmc/harness/visualize.hpp"

namespace tlmc {

struct EnsembleReport {
    BiasVariance bv;
    double mrse = 0;  // of the ensemble mean
    double avg_path_length = 0;
    double ir_bounces = 0;
    std::uint64_t rejected = 0;
};

inline EnsembleReport ensemble_report(const Integrator& integ, const Image& ref, int renders, int spp, std::uint64_t seed,
                                      int frame, int threads, const std::vector<std::uint8_t>* mask = nullptr) {
    RenderOptions o;
    o.seed = seed;
    o.frame = frame;
    o.spp = spp;
    o.threads = threads;
    o.v1_mask = mask;
    EnsembleResult er = render_ensemble(integ, o, renders);
    EnsembleReport r;
    r.bv = bias_variance_decompose(er.stats, ref);
    r.mrse = mrse(er.stats.mean(), ref);
    r.avg_path_length = er.mean_terminal_vertex;
    r.ir_bounces = er.ir_bounces;
    r.rejected = er.rejected;
    return r;
}

struct SweepRow {
    std::string cache;
    double epsilon = 0;
    double masked_fraction = 0;  // pixels allowed to stop at the first vertex
    EnsembleReport report;
};

inline std::vector<std::uint8_t> epsilon_mask(const std::vector<double>& relbias, double epsilon) {
    std::vector<std::uint8_t> m(relbias.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = relbias[i] < epsilon ? 1 : 0;
    return m;
}

// Per-pixel first-vertex termination iff the converged relative bias is below
// epsilon; every epsilon reuses the same seeds.
inline std::vector<SweepRow> adaptive_termination_analysis(const Scene& scene, const NeuralCache& cache,
                                                           const EstimatorConfig& base, const Image& ref,
                                                           const std::vector<double>& relbias,
                                                           const std::vector<double>& epsilons, int renders, int spp,
                                                           std::uint64_t seed, int threads) {
    if (relbias.size() != ref.pixel_count()) throw ConfigError("bias map does not match the reference size");
    EstimatorConfig ec = base;
    CacheSet cs;
    if (cache.kind() == CacheKind::Nirc) {
        ec.mode = EstimatorMode::BiasedNircSph;
        cs.nirc = &cache;
    } else if (cache.kind() == CacheKind::Nrc) {
        ec.mode = EstimatorMode::BiasedNrcSph;
        cs.nrc = &cache;
    } else {
        throw ConfigError("the epsilon sweep needs a nirc or nrc cache");
    }
    Integrator integ(scene, ec, cs);
    std::vector<SweepRow> rows;
    for (double eps : epsilons) {
        std::vector<std::uint8_t> mask = epsilon_mask(relbias, eps);
        SweepRow r;
        r.cache = to_string(cache.kind());
        r.epsilon = eps;
        std::size_t on = 0;
        for (auto m : mask) on += m;
        r.masked_fraction = mask.empty() ? 0.0 : double(on) / double(mask.size());
        r.report = ensemble_report(integ, ref, renders, spp, seed, scene.frame(), threads, &mask);
        rows.push_back(r);
    }
    return rows;
}

// Linear interpolation of y(x) through points sorted by x; clamps outside the range.
inline double interpolate_curve(std::vector<std::pair<double, double>> pts, double x) {
    if (pts.empty()) return 0.0;
    std::sort(pts.begin(), pts.end());
    if (x <= pts.front().first) return pts.front().second;
    if (x >= pts.back().first) return pts.back().second;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (x <= pts[i].first) {
            double x0 = pts[i - 1].first, x1 = pts[i].first;
            double t = x1 > x0 ? (x - x0) / (x1 - x0) : 0.0;
            return pts[i - 1].second + t * (pts[i].second - pts[i - 1].second);
        }
    return pts.back().second;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    CsvWriter w(path, {"cache", "epsilon", "masked_fraction", "mrse", "rbias2", "rbias2_se", "rvar", "avg_path_length",
                       "ir_bounces"});
    for (const auto& r : rows)
        w.row({r.cache, csv_number(r.epsilon), csv_number(r.masked_fraction), csv_number(r.report.mrse),
               csv_number(r.report.bv.rbias2), csv_number(r.report.bv.rbias2_se), csv_number(r.report.bv.rvar),
               csv_number(r.report.avg_path_length), csv_number(r.report.ir_bounces)});
}

inline void write_compare_csv(const std::filesystem::path& dir, const CompareResult& c) {
    std::filesystem::create_directories(dir);
    {
        CsvWriter w((dir / "compare.csv").string(), {"method", "vrel", "pixels"});
        w.row({"pt", csv_number(c.pt), std::to_string(c.pixels)});
        w.row({"nirc", csv_number(c.nirc), std::to_string(c.pixels)});
        w.row({"vmf", csv_number(c.vmf), std::to_string(c.pixels)});
        w.row({"sh", csv_number(c.sh), std::to_string(c.pixels)});
    }
    CsvWriter w((dir / "compare_pixels.csv").string(), {"x", "y", "mean", "pt", "nirc", "vmf", "sh"});
    for (const auto& p : c.per_pixel)
        w.row({std::to_string(p.x), std::to_string(p.y), csv_number(p.mean), csv_number(p.pt), csv_number(p.nirc),
               csv_number(p.vmf), csv_number(p.sh)});
}

// Octahedral reconstructions of the shading integrand L f cos at a pixel's
// primary hit: SH fit, vMF fit and NIRC-based n f cos.
inline int dump_integrand_reconstructions(const Integrator& integ, const NeuralCache* nirc, const CompareConfig& cfg,
                                          int stride, int res, const std::filesystem::path& dir) {
    const Scene& scene = integ.scene();
    std::filesystem::create_directories(dir);
    int written = 0;
    for (int y = stride / 2; y < scene.camera.height; y += stride)
        for (int x = stride / 2; x < scene.camera.width; x += stride) {
            auto it = pixel_center_vertex(scene, x, y);
            if (!it) continue;
            const std::uint64_t pixel = std::uint64_t(y) * scene.camera.width + x;
            RngStream fit = RngStream::keyed(cfg.seed, {std::uint64_t(RngDomain::Fitting), pixel});
            FittedPixelModels m = fit_pixel_models(integ, *it, cfg, fit);
            Frame fr(it->shading_normal);
            std::string suffix = "_" + std::to_string(x) + "_" + std::to_string(y) + ".pfm";
            write_pfm((dir / ("sh" + suffix)).string(), octahedral_map(res, fr, [&](const Vec3& d) { return m.sh.eval(d); }));
            write_pfm((dir / ("vmf" + suffix)).string(), octahedral_map(res, fr, [&](const Vec3& d) { return m.vmf.eval(d); }));
            if (nirc) {
                Bsdf bsdf(scene.material(*it), *it);
                SurfaceEncoding<float> enc;
                nirc->encode(make_surface_point(scene, *it), enc);
                write_pfm((dir / ("nirc" + suffix)).string(), octahedral_map(res, fr, [&](const Vec3& d) {
                              double c = std::max(0.0, dot(d, it->shading_normal));
                              return c > 0 ? nirc->evaluate(enc, d) * bsdf.eval(d) * c : Rgb(0.0);
                          }));
            }
            ++written;
        }
    return written;
}

}  // namespace tlmc
