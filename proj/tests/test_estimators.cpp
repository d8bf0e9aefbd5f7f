#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "tlmc/caches/cache.hpp"
#include "tlmc/estimators/render.hpp"
#include "tlmc/scene/parser.hpp"

using namespace tlmc;

namespace {

std::string scene_path(const char* name) { return std::string(TLMC_SOURCE_DIR) + "/scenes/" + name; }

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Multiplies every length in a scene description by s.
std::string scale_scene_text(const std::string& text, double s) {
    static const std::set<std::string> vec3 = {"origin", "u", "v", "min", "max", "position", "look_at", "center"};
    std::istringstream lines(text);
    std::ostringstream out;
    out.precision(17);
    std::string line;
    while (std::getline(lines, line)) {
        std::istringstream tok(line.substr(0, line.find('#')));
        std::string t;
        while (tok >> t) {
            out << t << ' ';
            int n = vec3.count(t) ? 3 : (t == "radius" ? 1 : 0);
            for (int k = 0; k < n && tok >> t; ++k) out << std::stod(t) * s << ' ';
        }
        out << '\n';
    }
    return out.str();
}

CacheConfig small_cache(bool random) {
    CacheConfig c;
    c.network.grid.levels = 4;
    c.network.grid.log2_table_size = 12;
    c.network.grid.max_resolution = 64;
    c.network.hidden_layers = 2;
    c.network.width = 16;
    c.random_output_init = random;
    return c;
}

// All weights zero, output bias = value: the cache returns `value` everywhere.
void make_constant(NeuralCache& cache, const Rgb& value) {
    auto p = cache.field().params();
    std::fill(p.begin(), p.end(), 0.0f);
    const Mlp& mlp = cache.field().mlp();
    std::size_t b = mlp.bias_offset(mlp.layer_count() - 1);
    for (int c = 0; c < 3; ++c) p[b + c] = float(value[c]);
}

double image_mean(const Image& img, int channel) {
    double s = 0;
    for (const Rgb& p : img.pixels()) s += p[channel];
    return s / double(img.pixel_count());
}

// z-score for the difference of two image means, each estimated from `renders` independent frames.
struct MeanEstimate {
    RunningStats<double> st[3];
};

MeanEstimate frame_means(const Integrator& integ, int renders, std::uint64_t seed) {
    MeanEstimate m;
    for (int r = 0; r < renders; ++r) {
        RenderOptions o;
        o.seed = seed;
        o.sample_offset = std::uint64_t(r);
        RenderResult rr = render_frame(integ, o);
        for (int c = 0; c < 3; ++c) m.st[c].add(image_mean(rr.image, c));
    }
    return m;
}

double z_score(const RunningStats<double>& a, const RunningStats<double>& b) {
    return std::abs(a.mean - b.mean) / std::sqrt(a.variance_of_mean() + b.variance_of_mean());
}

}  // namespace

TEST(Estimator, ConfigValidation) {
    EstimatorConfig c;
    c.mode = EstimatorMode::TwoLevel;
    c.nc = {0, 1, 1};
    EXPECT_THROW(c.validate(), ConfigError);
    c.nc = {1, 1, 1};
    c.nr = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c.nr = 1;
    c.rr_probability = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    EXPECT_THROW(Integrator(scene, EstimatorConfig{EstimatorMode::TwoLevel}), ConfigError);
    EXPECT_THROW(parse_estimator_mode("bdpt"), ConfigError);
    EXPECT_EQ(parse_estimator_mode("biased-nirc-bth"), EstimatorMode::BiasedNircBth);
}

TEST(Estimator, EmptySkyIsExact) {
    Scene scene = load_scene_file(scene_path("empty_sky.scene"));
    Integrator pt(scene, EstimatorConfig{});
    RenderOptions o;
    o.spp = 4;
    RenderResult r = render_frame(pt, o);
    for (const Rgb& p : r.image.pixels()) EXPECT_EQ(p, Rgb(2.0));
    EXPECT_EQ(r.mean_terminal_vertex, 0.0);
}

TEST(Estimator, FurnacePlaneConvergesToAlbedo) {
    Scene scene = load_scene_file(scene_path("furnace_plane.scene"));
    Integrator pt(scene, EstimatorConfig{});
    RenderOptions o;
    o.spp = 256;
    RenderResult r = render_frame(pt, o);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(image_mean(r.image, c), 0.5, 0.005);
    // Every pixel: 256 samples, per-sample std well below 0.5.
    for (const Rgb& p : r.image.pixels()) EXPECT_NEAR(p[0], 0.5, 0.05);
}

TEST(Estimator, ClosedFurnaceIsOneForPtAndTwoLevel) {
    Scene scene = load_scene_file(scene_path("furnace_closed.scene"));
    NeuralCache cache(CacheKind::Nirc, scene, small_cache(true), 11);
    EstimatorConfig tl;
    tl.mode = EstimatorMode::TwoLevel;
    tl.nc = {4, 2, 2};
    for (const auto& cfg : {EstimatorConfig{}, tl}) {
        Integrator integ(scene, cfg, {&cache, nullptr});
        MeanEstimate m = frame_means(integ, 24, 3);
        for (int c = 0; c < 3; ++c) {
            double se = std::sqrt(m.st[c].variance_of_mean());
            EXPECT_LT(std::abs(m.st[c].mean - 1.0), std::max(4.0 * se, 1e-3)) << to_string(cfg.mode);
        }
    }
}

TEST(Estimator, ZeroCacheTwoLevelIsBitIdenticalToPt) {
    for (const char* name : {"cornell.scene", "cornell_glossy.scene"}) {
        Scene scene = load_scene_file(scene_path(name));
        NeuralCache cache(CacheKind::Nirc, scene, small_cache(false), 1);
        EstimatorConfig tl;
        tl.mode = EstimatorMode::TwoLevel;
        Integrator pt(scene, EstimatorConfig{}), two(scene, tl, {&cache, nullptr});
        RenderOptions o;
        o.spp = 2;
        RenderResult a = render_frame(pt, o), b = render_frame(two, o);
        int differing = 0;
        for (std::size_t i = 0; i < a.image.pixel_count(); ++i) differing += !(a.image[i] == b.image[i]);
        EXPECT_EQ(differing, 0) << name;
        EXPECT_EQ(a.mean_terminal_vertex, b.mean_terminal_vertex);
    }
}

TEST(Estimator, TwoLevelWithRandomCacheIsUnbiased) {
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    scene.camera.width = scene.camera.height = 16;
    NeuralCache cache(CacheKind::Nirc, scene, small_cache(true), 12);
    EstimatorConfig tl;
    tl.mode = EstimatorMode::TwoLevel;
    tl.nc = {4, 2, 2};
    Integrator pt(scene, EstimatorConfig{}), two(scene, tl, {&cache, nullptr});
    MeanEstimate a = frame_means(pt, 200, 21), b = frame_means(two, 200, 22);
    for (int c = 0; c < 3; ++c) EXPECT_LT(z_score(a.st[c], b.st[c]), 4.0) << c;
}

TEST(Estimator, MultipleResidualBranchesStayUnbiased) {
    Scene scene = load_scene_file(scene_path("furnace_closed.scene"));
    scene.camera.width = scene.camera.height = 16;
    NeuralCache cache(CacheKind::Nirc, scene, small_cache(true), 13);
    EstimatorConfig tl;
    tl.mode = EstimatorMode::TwoLevel;
    tl.nc = {4, 2, 2};
    tl.nr = 3;
    Integrator two(scene, tl, {&cache, nullptr});
    MeanEstimate m = frame_means(two, 40, 5);
    for (int c = 0; c < 3; ++c)
        EXPECT_LT(std::abs(m.st[c].mean - 1.0), std::max(4.0 * std::sqrt(m.st[c].variance_of_mean()), 1e-3));
}

TEST(Estimator, NegativeResidualsArePreserved) {
    // A cache far above the true radiance drives many samples below zero; they must pass through.
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    scene.camera.width = scene.camera.height = 16;
    NeuralCache cache(CacheKind::Nirc, scene, small_cache(false), 1);
    make_constant(cache, Rgb(20.0));
    EstimatorConfig tl;
    tl.mode = EstimatorMode::TwoLevel;
    Integrator two(scene, tl, {&cache, nullptr});
    int negative = 0, rejected = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            PathSample s = two.sample(x, y, 1, 0, 0);
            negative += s.radiance[0] < 0;
            rejected += s.rejected;
        }
    EXPECT_GT(negative, 10);
    EXPECT_EQ(rejected, 0);
}

TEST(CacheIntegral, ZeroAndConstantCaches) {
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    auto hit = scene.intersect(Ray{Vec3(0.3, 1.0, 0.5), Vec3(0, -1, 0)});
    ASSERT_TRUE(hit.has_value());
    Bsdf bsdf(scene.material(*hit), *hit);
    SurfacePoint sp = make_surface_point(scene, *hit);
    NeuralCache zero(CacheKind::Nirc, scene, small_cache(false), 1);
    RngStream rng(5, 1);
    EXPECT_TRUE(is_black(estimate_Lc(zero, sp, bsdf, 15, rng)));

    NeuralCache constant(CacheKind::Nirc, scene, small_cache(false), 1);
    const Rgb C(0.25, 1.5, 3.0);
    make_constant(constant, C);
    // Cosine sampling of a lambertian lobe: every draw contributes albedo * C.
    Rgb lc = estimate_Lc(constant, sp, bsdf, 15, rng);
    Rgb albedo(0.73);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(lc[c] / (albedo[c] * C[c]), 1.0, 1e-5);
}

TEST(CacheIntegral, GlossyConstantCacheGivesDirectionalAlbedo) {
    Scene scene = load_scene(R"(
camera { position 0 1 2 look_at 0 0 0 resolution 8 8 }
material copper { kind rough-conductor albedo 0.9 roughness 0.4 }
quad floor { material copper origin -1 0 -1 u 0 0 2 v 2 0 0 }
)");
    auto hit = scene.intersect(Ray{Vec3(0, 1, 1), normalize(Vec3(0, -1, -1))});
    ASSERT_TRUE(hit.has_value());
    Bsdf bsdf(scene.material(*hit), *hit);
    NeuralCache constant(CacheKind::Nirc, scene, small_cache(false), 1);
    make_constant(constant, Rgb(1.0));
    SurfacePoint sp = make_surface_point(scene, *hit);
    // Oracle: the same integral by uniform hemisphere sampling of f cos.
    RngStream a(6, 1), b(7, 1);
    RunningStats<double> cache_est, oracle;
    for (int k = 0; k < 20000; ++k) {
        cache_est.add(estimate_Lc(constant, sp, bsdf, 1, a)[0]);
        double u0 = b.uniform(), u1 = b.uniform();
        Vec3 wi = sample_uniform_hemisphere(u0, u1, Frame(hit->shading_normal));
        oracle.add(bsdf.eval(wi)[0] * dot(wi, hit->shading_normal) * 2.0 * kPi);
    }
    EXPECT_NEAR(cache_est.mean / oracle.mean, 1.0, 0.03);
}

TEST(CacheIntegral, SingleSampleUsesOneDirection) {
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    auto hit = scene.intersect(Ray{Vec3(0.3, 1.0, 0.5), Vec3(0, -1, 0)});
    ASSERT_TRUE(hit.has_value());
    Bsdf bsdf(scene.material(*hit), *hit);
    NeuralCache cache(CacheKind::Nirc, scene, small_cache(true), 2);
    SurfacePoint sp = make_surface_point(scene, *hit);
    RngStream r1(8, 1), r2(8, 1);
    Rgb lc = estimate_Lc(cache, sp, bsdf, 1, r1);
    double u0 = r2.uniform(), u1 = r2.uniform();
    BsdfSample s = bsdf.sample(u0, u1);
    Rgb expected = cache.query(sp, s.wi) * s.weight;
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(lc[c], expected[c], 1e-6);
}

TEST(Sph, WorkedExamples) {
    EXPECT_NEAR(sph_initial_spread(2.0, 1.0), 1.0 / kPi, 1e-15);
    EXPECT_NEAR(sph_initial_spread(1.0, 0.5), 1.0 / (2.0 * kPi), 1e-15);
    EXPECT_EQ(sph_initial_spread(1.0, 0.0), 0.0);
    PathState st;
    st.spread0 = sph_initial_spread(2.0, 1.0);
    sph_update(st, 1.0, kInvPi, 1.0);  // sqrt term = sqrt(pi)
    EXPECT_NEAR(st.spread, kPi, 1e-12);
    sph_update(st, 1.0, kInvPi, 1.0);
    EXPECT_NEAR(st.spread, 4.0 * kPi, 1e-12);
    EXPECT_TRUE(sph_should_terminate(st, 0.01));
}

TEST(Sph, DeltaAndDegenerateVertices) {
    PathState st;
    st.spread0 = 1.0;
    sph_update(st, 5.0, std::numeric_limits<double>::infinity(), 1.0);
    EXPECT_EQ(st.spread, 0.0);
    EXPECT_FALSE(sph_should_terminate(st, 0.01));
    PathState g = st;
    sph_update(g, 1.0, 1.0, 0.0);
    EXPECT_TRUE(sph_should_terminate(g, 0.01));
    PathState z = st;
    sph_update(z, 1.0, 0.0, 1.0);
    EXPECT_TRUE(sph_should_terminate(z, 0.01));
}

TEST(Sph, SumFormIsScaleInvariant) {
    RngStream rng(9, 1);
    for (int trial = 0; trial < 500; ++trial) {
        double s = std::exp(rng.uniform() * 8 - 4);
        double t = 0.1 + 3 * rng.uniform(), cos1 = 0.05 + 0.95 * rng.uniform();
        PathState a, b;
        a.spread0 = sph_initial_spread(t, cos1);
        b.spread0 = sph_initial_spread(t * s, cos1);
        for (int k = 0; k < 6; ++k) {
            double d = 0.01 + 2 * rng.uniform(), pdf = 0.05 + 20 * rng.uniform(), cos = 0.01 + 0.99 * rng.uniform();
            sph_update(a, d, pdf, cos);
            sph_update(b, d * s, pdf, cos);
            EXPECT_NEAR(a.spread / a.spread0, b.spread / b.spread0, 1e-9 * a.spread / a.spread0);
        }
    }
}

TEST(Sph, ScaledSceneTerminatesAtTheSameVertices) {
    const std::string text = read_text(scene_path("cornell.scene"));
    Scene a = load_scene(text), b = load_scene(scale_scene_text(text, 10.0));
    a.camera.width = a.camera.height = b.camera.width = b.camera.height = 16;
    NeuralCache ca(CacheKind::Nirc, a, small_cache(false), 1), cb(CacheKind::Nirc, b, small_cache(false), 1);
    EstimatorConfig cfg;
    cfg.mode = EstimatorMode::BiasedNircSph;
    Integrator ia(a, cfg, {&ca, nullptr}), ib(b, cfg, {&cb, nullptr});
    int same = 0, total = 0;
    double mean_a = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int s = 0; s < 4; ++s) {
                int ta = ia.sample(x, y, 1, 0, s).terminal_vertex, tb = ib.sample(x, y, 1, 0, s).terminal_vertex;
                same += ta == tb;
                mean_a += ta;
                ++total;
            }
    EXPECT_GE(double(same) / total, 0.99);
    EXPECT_GT(mean_a / total, 1.5);  // the heuristic actually lets paths bounce
}

TEST(Bth, ProbabilityBoundsAndMonotonicity) {
    EXPECT_EQ(bth_continuation_probability(std::numeric_limits<double>::infinity(), 5), 1.0);
    EXPECT_EQ(bth_continuation_probability(0.0, 5), 0.0);
    EXPECT_EQ(bth_continuation_probability(-1.0, 5), 0.0);
    EXPECT_NEAR(bth_continuation_probability(5.0 / kPi, 5), 0.5, 1e-15);
    EXPECT_LT(bth_continuation_probability(1e300, 1), 1.0);
    RngStream rng(10, 1);
    for (int k = 0; k < 1000; ++k) {
        double p = std::exp(rng.uniform() * 20 - 10);
        int nc = 1 + int(rng.uniform() * 30);
        double v = bth_continuation_probability(p, nc);
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
        EXPECT_GE(bth_continuation_probability(p * 1.5, nc), v);
        EXPECT_LE(bth_continuation_probability(p, nc + 1), v);
    }
}

TEST(Bth, HugeSampleCountGivesDirectOnly) {
    // P_s -> 0: every path stops at the first vertex with the unweighted light sample.
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    scene.camera.width = scene.camera.height = 16;
    NeuralCache zero(CacheKind::Nirc, scene, small_cache(false), 1);
    EstimatorConfig cfg;
    cfg.mode = EstimatorMode::BiasedNircBth;
    cfg.nc_biased = 10000;  // P_s <= 1e-4 on these lambertian surfaces
    Integrator bth(scene, cfg, {&zero, nullptr});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            PathSample s = bth.sample(x, y, 3, 0, 0);
            RngStream path = Integrator::stream(3, RngDomain::Path, 0, std::size_t(y) * 16 + x, 0);
            double jx = path.uniform(), jy = path.uniform();
            auto hit = scene.intersect(scene.camera.generate_ray(x + jx, y + jy));
            if (!hit) continue;  // the box is open towards the camera
            EXPECT_EQ(s.terminal_vertex, 1);
            Bsdf bsdf(scene.material(*hit), *hit);
            Rgb expected = scene.emitted(*hit) + sample_light_nee(scene, *hit, bsdf, path).contribution;
            for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.radiance[c], expected[c], 1e-12 * (1 + expected[c]));
        }
}

TEST(Bth, ShorterPathsThanSph) {
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    scene.camera.width = scene.camera.height = 16;
    NeuralCache zero(CacheKind::Nirc, scene, small_cache(false), 1);
    EstimatorConfig sph, bth;
    sph.mode = EstimatorMode::BiasedNircSph;
    bth.mode = EstimatorMode::BiasedNircBth;
    RenderOptions o;
    o.spp = 8;
    double ls = render_frame(Integrator(scene, sph, {&zero, nullptr}), o).mean_terminal_vertex;
    double lb = render_frame(Integrator(scene, bth, {&zero, nullptr}), o).mean_terminal_vertex;
    EXPECT_LT(lb, ls);
    EXPECT_GE(lb, 1.0);
}

TEST(Nrc, FirstVertexLookupReplacesEverything) {
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    scene.camera.width = scene.camera.height = 8;
    NeuralCache nrc(CacheKind::Nrc, scene, small_cache(false), 1);
    make_constant(nrc, Rgb(0.3));
    EstimatorConfig cfg;
    cfg.mode = EstimatorMode::BiasedNrcSph;
    Integrator integ(scene, cfg, {nullptr, &nrc});
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            PathSample s = integ.sample(x, y, 1, 0, 0, true);
            RngStream path = Integrator::stream(1, RngDomain::Path, 0, std::size_t(y) * 8 + x, 0);
            double jx = path.uniform(), jy = path.uniform();
            auto hit = scene.intersect(scene.camera.generate_ray(x + jx, y + jy));
            if (!hit) continue;  // the box is open towards the camera
            Rgb expected = scene.emitted(*hit) + Rgb(0.3);
            EXPECT_EQ(s.terminal_vertex, 1);
            for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.radiance[c], expected[c], 1e-6);
        }
}

TEST(Nrc, SmoothFirstVertexIsNotCached) {
    Scene scene = load_scene_file(scene_path("cornell_glossy.scene"));
    NeuralCache nrc(CacheKind::Nrc, scene, small_cache(false), 1);
    EstimatorConfig cfg;
    cfg.mode = EstimatorMode::BiasedNrcSph;
    Integrator integ(scene, cfg, {nullptr, &nrc});
    // Find a pixel whose primary hit is the mirror sphere (roughness 0).
    int found = 0;
    for (int y = 0; y < scene.camera.height; y += 2)
        for (int x = 0; x < scene.camera.width; x += 2) {
            auto hit = scene.intersect(scene.camera.generate_ray(x + 0.5, y + 0.5));
            if (!hit || scene.material(*hit).feature_roughness() >= cfg.roughness_cutoff) continue;
            RngStream path = Integrator::stream(1, RngDomain::Path, 0, std::size_t(y) * scene.camera.width + x, 0);
            double jx = path.uniform(), jy = path.uniform();
            auto h = scene.intersect(scene.camera.generate_ray(x + jx, y + jy));
            if (!h || scene.material(*h).feature_roughness() >= cfg.roughness_cutoff) continue;
            PathSample ps = integ.sample(x, y, 1, 0, 0, true);
            EXPECT_FALSE(ps.terminal_vertex == 1 && ps.cache_terminated);
            ++found;
        }
    EXPECT_GT(found, 0);
}

TEST(Render, EnsembleUsesDisjointSamples) {
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    scene.camera.width = scene.camera.height = 8;
    Integrator pt(scene, EstimatorConfig{});
    RenderOptions o;
    o.spp = 2;
    EnsembleResult e = render_ensemble(pt, o, 3);
    RenderOptions last = o;
    last.sample_offset = 4;
    Image third = render_frame(pt, last).image;
    for (std::size_t i = 0; i < third.pixel_count(); ++i) EXPECT_GT(e.stats[i].count, 0u);
    RenderResult first = render_frame(pt, o);
    EXPECT_NE(first.image.pixels(), third.pixels());
    EXPECT_EQ(e.stats[0].count, 3u);
}

TEST(Render, ThreadCountDoesNotChangeTheImage) {
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    scene.camera.width = scene.camera.height = 16;
    Integrator pt(scene, EstimatorConfig{});
    RenderOptions o;
    o.threads = 1;
    Image a = render_frame(pt, o).image;
    o.threads = 3;
    Image b = render_frame(pt, o).image;
    EXPECT_EQ(a.pixels(), b.pixels());
}
