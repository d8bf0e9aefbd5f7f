// Closed-furnace walkthrough: plain path tracing and the two-level estimator
// with a briefly trained incident-radiance cache both converge to radiance 1.
//
//   sample_furnace [path/to/furnace_closed.scene]

#include <cstdio>
#include <string>

#include "tlmc/caches/records.hpp"
#include "tlmc/estimators/render.hpp"
#include "tlmc/scene/parser.hpp"

using namespace tlmc;

namespace {

double image_average(const Image& img) {
    double s = 0;
    for (const Rgb& p : img.pixels()) s += average(p);
    return s / double(img.pixel_count());
}

}  // namespace

int main(int argc, char** argv) {
    std::string path = argc > 1 ? argv[1] : std::string(TLMC_SOURCE_DIR) + "/scenes/furnace_closed.scene";
    try {
        Scene scene = load_scene_file(path);

        CacheConfig cc;
        cc.network.hidden_layers = 2;
        cc.network.width = 32;
        cc.network.grid.levels = 8;
        NeuralCache nirc(CacheKind::Nirc, scene, cc, 1);
        const int paths = training_path_count(scene, {});
        for (int frame = 0; frame < 32; ++frame) {
            auto records = collect_training_records(scene, CacheKind::Nirc, paths, 1, frame);
            RngStream rng = RngStream::keyed(1, {std::uint64_t(RngDomain::Training), std::uint64_t(frame)});
            nirc.train_frame(records, rng);
        }

        EstimatorConfig pt_cfg;
        EstimatorConfig tl_cfg;
        tl_cfg.mode = EstimatorMode::TwoLevel;
        tl_cfg.nc = {4, 2, 2};
        Integrator pt(scene, pt_cfg);
        Integrator two(scene, tl_cfg, {&nirc, nullptr});

        RenderOptions opt;
        opt.spp = 16;
        RenderResult a = render_frame(pt, opt);
        RenderResult b = render_frame(two, opt);
        std::printf("analytic radiance      1.0\n");
        std::printf("path tracing           %.4f  (mean path length %.2f)\n", image_average(a.image), a.mean_terminal_vertex);
        std::printf("two-level, NIRC        %.4f  (mean path length %.2f)\n", image_average(b.image), b.mean_terminal_vertex);
    } catch (const Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    }
    return 0;
}
