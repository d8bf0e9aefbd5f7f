#pragma once

#include <cstdint>
#include <vector>

#include "tlmc/core/image.hpp"
#include "tlmc/core/parallel.hpp"
#include "tlmc/core/stats.hpp"
#include "tlmc/estimators/integrator.hpp"

namespace tlmc {

struct RenderOptions {
    std::uint64_t seed = 1;
    int frame = 0;
    int spp = 1;
    std::uint64_t sample_offset = 0;  // first sample index; ensembles advance this per render
    int threads = 1;
    const std::vector<std::uint8_t>* v1_mask = nullptr;  // per-pixel first-vertex cache use (SPH modes)
};

struct RenderResult {
    Image image;
    double mean_terminal_vertex = 0;  // over samples whose camera ray hit geometry
    double ir_bounces = 0;            // mean terminal vertex - 1
    double cache_termination_rate = 0;
    std::uint64_t rejected = 0;
    std::uint64_t samples = 0;
};

inline RenderResult render_frame(const Integrator& integrator, const RenderOptions& opt) {
    const Camera& cam = integrator.scene().camera;
    const int w = cam.width, h = cam.height;
    RenderResult res;
    res.image = Image(w, h);
    struct RowStats {
        std::uint64_t terminal_sum = 0, hits = 0, rejected = 0, cached = 0;
    };
    std::vector<RowStats> rows(h);
    parallel_for(h, opt.threads, [&](int y) {
        RowStats& rs = rows[y];
        for (int x = 0; x < w; ++x) {
            const std::size_t pixel = std::size_t(y) * w + x;
            const bool v1 = opt.v1_mask && (*opt.v1_mask)[pixel];
            Rgb sum(0.0);
            for (int s = 0; s < opt.spp; ++s) {
                PathSample ps = integrator.sample(x, y, opt.seed, opt.frame, opt.sample_offset + std::uint64_t(s), v1);
                sum += ps.radiance;
                if (ps.terminal_vertex > 0) {
                    rs.terminal_sum += std::uint64_t(ps.terminal_vertex);
                    ++rs.hits;
                }
                rs.rejected += ps.rejected;
                rs.cached += ps.cache_terminated;
            }
            res.image[pixel] = sum / double(opt.spp);
        }
    });
    RowStats total;
    for (const RowStats& r : rows) {
        total.terminal_sum += r.terminal_sum;
        total.hits += r.hits;
        total.rejected += r.rejected;
        total.cached += r.cached;
    }
    res.samples = std::uint64_t(w) * h * std::uint64_t(opt.spp);
    res.rejected = total.rejected;
    res.mean_terminal_vertex = total.hits ? double(total.terminal_sum) / double(total.hits) : 0.0;
    res.ir_bounces = total.hits ? res.mean_terminal_vertex - 1.0 : 0.0;
    res.cache_termination_rate = res.samples ? double(total.cached) / double(res.samples) : 0.0;
    return res;
}

struct EnsembleResult {
    PixelStats stats;
    double mean_terminal_vertex = 0;
    double ir_bounces = 0;
    std::uint64_t rejected = 0;
};

// `count` independent renders with spp samples each, accumulated per pixel.
inline EnsembleResult render_ensemble(const Integrator& integrator, RenderOptions opt, int count) {
    const Camera& cam = integrator.scene().camera;
    EnsembleResult er;
    er.stats = PixelStats(cam.width, cam.height);
    double terminal = 0;
    for (int r = 0; r < count; ++r) {
        RenderOptions o = opt;
        o.sample_offset = opt.sample_offset + std::uint64_t(r) * std::uint64_t(opt.spp);
        RenderResult rr = render_frame(integrator, o);
        er.stats.add(rr.image);
        terminal += rr.mean_terminal_vertex;
        er.rejected += rr.rejected;
    }
    er.mean_terminal_vertex = count ? terminal / count : 0.0;
    er.ir_bounces = count ? er.mean_terminal_vertex - 1.0 : 0.0;
    return er;
}

}  // namespace tlmc
