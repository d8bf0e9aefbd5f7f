#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "quadrature.hpp"
#include "tlmc/baselines/residual_variance.hpp"
#include "tlmc/baselines/sh_model.hpp"
#include "tlmc/baselines/vmf.hpp"
#include "tlmc/scene/parser.hpp"

using namespace tlmc;
using tlmc::testing::gauss_legendre;
using tlmc::testing::sphere_quadrature;

namespace {

std::string scene_path(const char* name) { return std::string(TLMC_SOURCE_DIR) + "/scenes/" + name; }

Vec3 uniform_dir(RngStream& rng) {
    double u0 = rng.uniform(), u1 = rng.uniform();
    return sample_uniform_sphere(u0, u1);
}

// Integral of a lobe pdf in the lobe's own frame: graded Gauss-Legendre panels in
// t = mu.w towards t = 1 (where a sharp lobe lives), trapezoid in phi.
double lobe_quadrature(const VmfLobe& lobe) {
    auto [x, w] = gauss_legendre(16);
    Frame f(lobe.mu);
    double sum = 0;
    double hi = 1.0;
    for (int panel = 0; panel < 60; ++panel) {
        double lo = panel == 59 ? -1.0 : 1.0 - std::ldexp(2.0, -(30 - panel / 2));
        if (panel < 59 && lo <= -1.0) continue;
        lo = std::max(lo, -1.0);
        if (lo >= hi) continue;
        for (int i = 0; i < 16; ++i) {
            double t = 0.5 * (hi - lo) * x[i] + 0.5 * (hi + lo);
            double r = std::sqrt(std::max(0.0, 1.0 - t * t));
            const int n_phi = 8;
            double ring = 0;
            for (int j = 0; j < n_phi; ++j) {
                double phi = 2.0 * kPi * (j + 0.5) / n_phi;
                ring += vmf_pdf(lobe, f.to_world({r * std::cos(phi), r * std::sin(phi), t}));
            }
            sum += 0.5 * (hi - lo) * w[i] * ring * 2.0 * kPi / n_phi;
        }
        hi = lo;
        if (hi <= -1.0) break;
    }
    return sum;
}

}  // namespace

TEST(ShModel, ConstantIntegrandProjection) {
    ShPixelModel m(5);
    EXPECT_EQ(m.coefficient_count(), 75u);
    RngStream rng(1, 1);
    const Rgb C(0.5, 1.0, 2.0);
    for (int i = 0; i < 100000; ++i) m.accumulate(uniform_dir(rng), C, uniform_sphere_pdf());
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(m.coefficients()[0][c] / (C[c] * 2.0 * std::sqrt(kPi)), 1.0, 0.01);
    // Per-coefficient standard error is C sqrt(4 pi / n) ~ 0.011 C.
    for (std::size_t i = 1; i < m.coefficients().size(); ++i)
        for (int c = 0; c < 3; ++c) EXPECT_LT(std::abs(m.coefficients()[i][c]), 0.06 * C[c]) << i;
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(m.integral()[c], m.coefficients()[0][c] * 2.0 * std::sqrt(kPi), 1e-12);
}

TEST(ShModel, ZeroIntegrandAndBasisProjection) {
    ShPixelModel zero(5), y10(5);
    RngStream rng(2, 1);
    for (int i = 0; i < 100000; ++i) {
        Vec3 d = uniform_dir(rng);
        zero.accumulate(d, Rgb(0.0), uniform_sphere_pdf());
        y10.accumulate(d, Rgb(std::sqrt(3.0 / (4.0 * kPi)) * d.z), uniform_sphere_pdf());
    }
    for (const Rgb& c : zero.coefficients()) EXPECT_TRUE(is_black(c));
    EXPECT_NEAR(y10.coefficients()[sh_index(1, 0)][0], 1.0, 0.02);
    for (std::size_t i = 0; i < y10.coefficients().size(); ++i)
        if (int(i) != sh_index(1, 0)) {
            EXPECT_LT(std::abs(y10.coefficients()[i][0]), 0.03) << i;
        }
    EXPECT_TRUE(is_black(zero.integral()));
}

TEST(ShModel, AnalyticIntegralMatchesQuadrature) {
    ShPixelModel m(5);
    m.coefficients()[0] = Rgb(1.0 / (2.0 * std::sqrt(kPi)));
    EXPECT_NEAR(m.integral()[0], 1.0, 1e-15);
    RngStream rng(3, 1);
    for (auto& c : m.coefficients()) c = Rgb(rng.uniform() * 2 - 1, rng.uniform() * 2 - 1, rng.uniform() * 2 - 1);
    for (int c = 0; c < 3; ++c) {
        double q = sphere_quadrature([&](const Vec3& d) { return m.eval(d)[c]; }, 32, 64);
        EXPECT_NEAR(q, m.integral()[c], 1e-6);
    }
}

TEST(ShModel, PdfMustBePositive) {
    ShPixelModel m(3);
    m.accumulate(Vec3(0, 0, 1), Rgb(1.0), 0.0);
    EXPECT_EQ(m.samples(), 0u);
    EXPECT_THROW(ShPixelModel(0), ConfigError);
}

TEST(Vmf, UniformLimit) {
    VmfLobe l{Vec3(0, 0, 1), 1e-9, Rgb(1.0)};
    RngStream rng(4, 1);
    for (int i = 0; i < 100; ++i) EXPECT_NEAR(vmf_pdf(l, uniform_dir(rng)), 1.0 / (4.0 * kPi), 1e-4);
}

TEST(Vmf, NormalisedAcrossConcentrations) {
    RngStream rng(5, 1);
    for (double kappa : {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4}) {
        VmfLobe l{uniform_dir(rng), kappa, Rgb(1.0)};
        EXPECT_NEAR(lobe_quadrature(l), 1.0, 1e-3) << kappa;
        EXPECT_TRUE(std::isfinite(vmf_pdf(l, l.mu)));
        EXPECT_TRUE(std::isfinite(vmf_pdf(l, -l.mu)));
    }
}

TEST(Vmf, MixtureIntegralIsWeightSum) {
    VmfPixelModel m;
    vmf_init_fibonacci(m, 11, Rgb(3.0, 2.0, 1.0));
    Rgb total = m.integral();
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(total[c], 3.0 - c, 1e-12);
    double q = sphere_quadrature([&](const Vec3& d) { return m.eval(d)[0]; }, 96, 192);
    EXPECT_NEAR(q, 3.0, 1e-3);
}

TEST(Vmf, KappaClampIsReported) {
    VmfPixelModel m;
    m.lobes = {VmfLobe{Vec3(0, 0, 1), -2.0, Rgb(1.0)}, VmfLobe{Vec3(0, 0, 1), 5.0, Rgb(1.0)}};
    EXPECT_EQ(m.sanitize(), 1);
    EXPECT_EQ(m.lobes[0].kappa, kVmfKappaMin);
    EXPECT_EQ(m.lobes[1].kappa, 5.0);
}

TEST(Vmf, FibonacciInitialisation) {
    VmfPixelModel one;
    vmf_init_fibonacci(one, 1, Rgb(1.0));
    EXPECT_EQ(one.lobes[0].mu, Vec3(0, 0, 1));

    VmfPixelModel m;
    vmf_init_fibonacci(m, 11, Rgb(1.0));
    std::vector<Vec3> mus;
    for (const auto& l : m.lobes) mus.push_back(l.mu);
    // Oracle: best separation over the offset family of Fibonacci lattices,
    // z_i = 1 - 2 (i + e) / (n - 1 + 2 e), scanned over e.
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    double optimum = 0;
    for (double e = 0.0; e <= 1.5; e += 0.01) {
        std::vector<Vec3> p;
        for (int i = 0; i < 11; ++i) {
            double z = 1.0 - 2.0 * (i + e) / (10.0 + 2.0 * e), r = std::sqrt(std::max(0.0, 1.0 - z * z));
            double phi = 2.0 * kPi * std::fmod(i / golden, 1.0);
            p.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
        }
        optimum = std::max(optimum, min_pairwise_angle(p));
    }
    EXPECT_GT(min_pairwise_angle(mus), 0.9 * optimum);
    // Half maximum halfway to the (mean) nearest neighbour.
    double nn_sum = 0;
    for (std::size_t i = 0; i < mus.size(); ++i) {
        double nn = kPi;
        for (std::size_t j = 0; j < mus.size(); ++j)
            if (j != i) nn = std::min(nn, angle_between(mus[i], mus[j]));
        nn_sum += nn;
    }
    double half = 0.5 * nn_sum / double(mus.size());
    const VmfLobe& l = m.lobes[0];
    EXPECT_NEAR(std::exp(l.kappa * (std::cos(half) - 1.0)), 0.5, 1e-12);
    Rgb before = m.integral();
    vmf_init_fibonacci(m);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(m.integral()[c], before[c], 1e-12);
}

TEST(Vmf, StepwiseEmRecoversSingleLobe) {
    VmfLobe truth{normalize(Vec3(1.0, 0.5, -0.3)), 20.0, Rgb(1.0)};
    VmfPixelModel m;
    vmf_init_fibonacci(m, 1, Rgb(0.0));
    StepwiseEmState st = vmf_em_state(m);
    RngStream rng(6, 1);
    std::vector<VmfSample> batch(32);
    for (int b = 0; b < 200; ++b) {
        for (auto& s : batch) {
            double u0 = rng.uniform(), u1 = rng.uniform();
            s.dir = sample_vmf(truth, u0, u1);
            s.pdf = vmf_pdf(truth, s.dir);
            s.value = Rgb(s.pdf);  // integrand equal to the lobe density
        }
        vmf_stepwise_em_update(m, st, batch);
    }
    EXPECT_LT(angle_between(m.lobes[0].mu, truth.mu) * 180.0 / kPi, 2.0);
    EXPECT_NEAR(m.lobes[0].kappa / truth.kappa, 1.0, 0.15);
    EXPECT_NEAR(m.integral()[0], 1.0, 0.05);
}

TEST(Vmf, StepwiseEmSeparatesTwoClusters) {
    VmfLobe a{Vec3(1, 0, 0), 50.0, Rgb(1.0)}, b{Vec3(-1, 0, 0), 50.0, Rgb(1.0)};
    VmfPixelModel m;
    vmf_init_fibonacci(m, 2, Rgb(0.0));
    StepwiseEmState st = vmf_em_state(m);
    RngStream rng(7, 1);
    std::vector<VmfSample> batch(30);
    for (int it = 0; it < 300; ++it) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const VmfLobe& src = i % 2 ? a : b;
            double u0 = rng.uniform(), u1 = rng.uniform();
            Vec3 d = sample_vmf(src, u0, u1);
            double p = 0.5 * (vmf_pdf(a, d) + vmf_pdf(b, d));
            batch[i] = {d, Rgb(p), p};
        }
        vmf_stepwise_em_update(m, st, batch);
    }
    for (const Vec3& target : {a.mu, b.mu}) {
        double best = kPi;
        for (const auto& l : m.lobes) best = std::min(best, angle_between(l.mu, target));
        EXPECT_LT(best * 180.0 / kPi, 5.0);
    }
}

TEST(Vmf, WeightsStayNonNegativeAndLikelihoodImproves) {
    VmfPixelModel m;
    vmf_init_fibonacci(m, 11, Rgb(0.0));
    StepwiseEmState st = vmf_em_state(m);
    VmfLobe truth{normalize(Vec3(0.2, 1.0, 0.1)), 8.0, Rgb(1.0)};
    RngStream rng(8, 1);
    auto make_batch = [&](int n) {
        std::vector<VmfSample> batch(n);
        for (auto& s : batch) {
            s.dir = uniform_dir(rng);
            s.pdf = uniform_sphere_pdf();
            double sign = rng.uniform() < 0.1 ? -1.0 : 1.0;  // a few negative integrand values
            s.value = Rgb(vmf_pdf(truth, s.dir) * sign, 0.3, vmf_pdf(truth, s.dir));
        }
        return batch;
    };
    auto probe = make_batch(40);
    double ll0 = vmf_log_likelihood(m, st, probe);
    double late = 0;
    for (int it = 0; it < 300; ++it) {
        auto batch = make_batch(15 + it % 26);
        vmf_stepwise_em_update(m, st, batch);
        for (const auto& l : m.lobes)
            for (int c = 0; c < 3; ++c) ASSERT_GE(l.weight[c], 0.0);
        if (it >= 250) late += vmf_log_likelihood(m, st, probe) / 50.0;
    }
    EXPECT_GT(late, ll0);
}

TEST(Vmf, BatchSizeAndZeroBatches) {
    VmfPixelModel m;
    vmf_init_fibonacci(m, 3, Rgb(1.0));
    StepwiseEmState st = vmf_em_state(m);
    std::vector<VmfSample> small(10), zero(20);
    EXPECT_THROW(vmf_stepwise_em_update(m, st, small), ConfigError);
    for (auto& s : zero) s = {Vec3(0, 0, 1), Rgb(0.0), 1.0};
    auto mus = m.lobes;
    double s0 = st.s0[0], eta = st.step_size();
    vmf_stepwise_em_update(m, st, zero);
    EXPECT_NEAR(st.s0[0], (1.0 - eta) * s0, 1e-15);
    for (std::size_t j = 0; j < mus.size(); ++j) {
        EXPECT_LT(angle_between(m.lobes[j].mu, mus[j].mu), 1e-9);
        EXPECT_NEAR(m.lobes[j].kappa, mus[j].kappa, 1e-9 * mus[j].kappa);
    }
}

TEST(ControlVariate, EstimatorIsUnbiasedForAnyModel) {
    // f(w) = max(z, 0)^2 + 0.3, integral 2 pi / 3 + 1.2 pi.
    auto f = [](const Vec3& d) { return std::pow(std::max(d.z, 0.0), 2) + 0.3; };
    const double truth = 2.0 * kPi / 3.0 + 0.3 * 4.0 * kPi;
    ShPixelModel sh(5);
    RngStream init(9, 1);
    for (auto& c : sh.coefficients()) c = Rgb(init.uniform() - 0.5);
    VmfPixelModel vmf;
    vmf_init_fibonacci(vmf, 11, Rgb(2.0));
    for (auto g : {std::function<double(const Vec3&)>([&](const Vec3& d) { return sh.eval(d)[0]; }),
                   std::function<double(const Vec3&)>([&](const Vec3& d) { return vmf.eval(d)[0]; })}) {
        ScalarStats est;
        RngStream rng(10, 1);
        for (int i = 0; i < 200000; ++i) {
            Vec3 d = uniform_dir(rng);
            est.add((f(d) - g(d)) / uniform_sphere_pdf());
        }
        double integral = sphere_quadrature(g, 64, 128);
        EXPECT_LT(std::abs(integral + est.mean - truth), 4.0 * std::sqrt(est.variance_of_mean()) + 1e-9);
    }
    EXPECT_NEAR(sh.integral()[0], sphere_quadrature([&](const Vec3& d) { return sh.eval(d)[0]; }, 32, 64), 1e-6);
}

TEST(ResidualVariance, PerfectAndZeroModels) {
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    Integrator pt(scene, EstimatorConfig{});
    auto it = pixel_center_vertex(scene, 32, 40);
    ASSERT_TRUE(it.has_value());
    Bsdf bsdf(scene.material(*it), *it);
    // Zero cache: same draws as plain MC, identical statistics.
    ResidualModel plain;
    ResidualModel zero{ResidualKind::IncidentCache, [](const Vec3&) { return Rgb(0.0); }};
    RngStream a(11, 1), b(11, 1);
    RelativeVariance vp = measure_residual_variance(pt, *it, plain, 2000, a);
    RelativeVariance vz = measure_residual_variance(pt, *it, zero, 2000, b);
    EXPECT_EQ(vp.value, vz.value);
    EXPECT_GT(vp.value, 0.0);
    // A control variate equal to the sampled integrand leaves no residual.
    RngStream c(12, 1);
    for (int k = 0; k < 100; ++k) {
        IntegrandSample s = sample_integrand(pt, *it, bsdf, c);
        ResidualModel exact{ResidualKind::ControlVariate, [&](const Vec3&) { return s.integrand(); }};
        Rgb r = exact.residual(s);
        for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(r[ch], 0.0, 1e-12 * (1 + s.estimate()[ch]));
    }
}

TEST(ResidualVariance, ZeroMeanIsFlagged) {
    Scene scene = load_scene_file(scene_path("furnace_plane.scene"));
    Integrator pt(scene, EstimatorConfig{});
    auto it = pixel_center_vertex(scene, 16, 16);
    ASSERT_TRUE(it.has_value());
    RngStream rng(13, 1);
    RelativeVariance v = measure_residual_variance(pt, *it, ResidualModel{}, 100, rng);
    EXPECT_TRUE(v.absolute);  // the open plane receives no indirect light
    EXPECT_EQ(v.value, 0.0);
}

TEST(ResidualVariance, CompareSmoke) {
    Scene scene = load_scene_file(scene_path("cornell.scene"));
    scene.camera.width = scene.camera.height = 16;
    Integrator pt(scene, EstimatorConfig{});
    CompareConfig cfg;
    cfg.fit_samples = 256;
    cfg.measure_samples = 32;
    cfg.pixel_stride = 4;
    CompareResult r = compare_residual_variance(pt, nullptr, cfg);
    EXPECT_GT(r.pixels, 0);
    EXPECT_EQ(r.nirc, r.pt);
    for (double v : {r.pt, r.sh, r.vmf}) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GT(v, 0.0);
    }
}
