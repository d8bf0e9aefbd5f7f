#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "tlmc/core/octahedral.hpp"
#include "tlmc/core/parallel.hpp"
#include "tlmc/core/pfm.hpp"
#include "tlmc/core/rng.hpp"
#include "tlmc/core/sampling.hpp"
#include "tlmc/core/sh.hpp"
#include "tlmc/core/stats.hpp"
#include "quadrature.hpp"

using namespace tlmc;
using tlmc::testing::gauss_legendre;
using tlmc::testing::sphere_quadrature;

namespace {

Vec3 random_direction(RngStream& rng) {
    double a = rng.uniform(), b = rng.uniform();
    return sample_uniform_sphere(a, b);
}

}  // namespace

TEST(Rng, SameKeyReproducesStream) {
    RngStream a(7, 3), b(7, 3);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DistinctSequencesDiffer) {
    RngStream a(7, 3), b(7, 4);
    int equal = 0;
    for (int i = 0; i < 1000; ++i) equal += a.next_u64() == b.next_u64();
    EXPECT_EQ(equal, 0);
}

TEST(Rng, UniformMomentsAndIndependence) {
    RngStream a(11, 1), b(11, 2);
    double sum = 0, sum2 = 0, cross = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = a.uniform(), y = b.uniform();
        ASSERT_GE(x, 0.0);
        ASSERT_LT(x, 1.0);
        sum += x;
        sum2 += x * x;
        cross += (x - 0.5) * (y - 0.5);
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    EXPECT_NEAR(sum2 / n - 0.25, 1.0 / 12.0, 0.002);
    // Correlation of independent streams; stddev of the cross term is 1/(12 sqrt(n)).
    EXPECT_NEAR(cross / n, 0.0, 5.0 / (12.0 * std::sqrt(double(n))));
}

TEST(Rng, KeyedStreamsAreOrderIndependent) {
    auto s1 = RngStream::keyed(5, {1, 2, 3});
    auto s2 = RngStream::keyed(5, {1, 2, 3});
    auto s3 = RngStream::keyed(5, {1, 3, 2});
    EXPECT_EQ(s1.next_u64(), s2.next_u64());
    EXPECT_NE(RngStream::keyed(5, {1, 2, 3}).next_u64(), s3.next_u64());
}

TEST(CosineHemisphere, PoleAtZero) {
    Frame f(normalize(Vec3(0.3, -0.2, 0.9)));
    auto s = sample_cosine_hemisphere(0.0, 0.0, f);
    EXPECT_NEAR(length(s.dir - f.n), 0.0, 1e-12);
    EXPECT_NEAR(s.pdf, kInvPi, 1e-12);
}

TEST(CosineHemisphere, PdfMatchesCosine) {
    RngStream rng(1, 1);
    Frame f(normalize(Vec3(-1, 2, 0.5)));
    for (int i = 0; i < 10000; ++i) {
        auto s = sample_cosine_hemisphere(rng.uniform(), rng.uniform(), f);
        ASSERT_NEAR(length(s.dir), 1.0, 1e-6);
        ASSERT_GT(dot(s.dir, f.n), 0.0);
        ASSERT_NEAR(s.pdf, dot(s.dir, f.n) / kPi, 1e-6);
    }
}

TEST(CosineHemisphere, IntegratesCosine) {
    RngStream rng(2, 1);
    Frame f(Vec3(0, 1, 0));
    const int n = 1000000;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        auto s = sample_cosine_hemisphere(rng.uniform(), rng.uniform(), f);
        sum += dot(s.dir, f.n) / s.pdf;
    }
    EXPECT_NEAR(sum / n, kPi, 0.01 * kPi);
}

TEST(Frame, Orthonormal) {
    RngStream rng(3, 1);
    for (int i = 0; i < 1000; ++i) {
        Frame f(random_direction(rng));
        EXPECT_NEAR(dot(f.s, f.t), 0.0, 1e-12);
        EXPECT_NEAR(dot(f.s, f.n), 0.0, 1e-12);
        EXPECT_NEAR(length(f.s), 1.0, 1e-12);
        EXPECT_NEAR(length(cross(f.s, f.t) - f.n), 0.0, 1e-10);
    }
}

TEST(ShBasis, ConstantAndZonalValues) {
    auto c = sh_eval_basis(normalize(Vec3(0.2, 0.5, -0.3)), 4);
    EXPECT_EQ(c.values.size(), 16u);
    EXPECT_NEAR(c.at(0, 0), 0.28209479, 1e-8);
    auto z = sh_eval_basis(Vec3(0, 0, 1), 2);
    EXPECT_NEAR(z.at(1, 0), 0.48860251, 1e-8);
    EXPECT_NEAR(z.at(1, 1), 0.0, 1e-12);
    EXPECT_NEAR(z.at(1, -1), 0.0, 1e-12);
}

TEST(ShBasis, BandsOutOfRangeThrow) {
    EXPECT_THROW(sh_eval_basis(Vec3(0, 0, 1), 0), ConfigError);
    EXPECT_THROW(sh_eval_basis(Vec3(0, 0, 1), 9), ConfigError);
}

TEST(ShBasis, MatchesClosedFormBand2) {
    RngStream rng(4, 1);
    for (int i = 0; i < 100; ++i) {
        Vec3 d = random_direction(rng);
        auto c = sh_eval_basis(d, 3);
        double x = d.x, y = d.y, z = d.z;
        EXPECT_NEAR(c.at(1, -1), 0.48860251 * y, 1e-8);
        EXPECT_NEAR(c.at(1, 1), 0.48860251 * x, 1e-8);
        EXPECT_NEAR(c.at(2, -2), 1.09254843 * x * y, 1e-8);
        EXPECT_NEAR(c.at(2, -1), 1.09254843 * y * z, 1e-8);
        EXPECT_NEAR(c.at(2, 0), 0.31539157 * (3 * z * z - 1), 1e-8);
        EXPECT_NEAR(c.at(2, 1), 1.09254843 * x * z, 1e-8);
        EXPECT_NEAR(c.at(2, 2), 0.54627422 * (x * x - y * y), 1e-8);
    }
}

TEST(ShBasis, OrthonormalUnderQuadrature) {
    // Gauss-Legendre in z and the trapezoid rule in phi are exact for band-limited products.
    const int bands = 5, n = bands * bands;
    std::vector<double> gram(n * n, 0.0);
    auto [nodes, weights] = gauss_legendre(16);
    const int n_phi = 32;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        double z = nodes[i], r = std::sqrt(1.0 - z * z);
        for (int j = 0; j < n_phi; ++j) {
            double phi = 2.0 * kPi * j / n_phi;
            sh_eval<double>(Vec3(r * std::cos(phi), r * std::sin(phi), z), bands, y);
            double w = weights[i] * 2.0 * kPi / n_phi;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) gram[a * n + b] += y[a] * y[b] * w;
        }
    }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) EXPECT_NEAR(gram[a * n + b], a == b ? 1.0 : 0.0, 1e-4) << a << "," << b;
}

TEST(Octahedral, CenterIsPole) {
    auto uv = octa_encode(Vec3(0, 0, 1));
    EXPECT_EQ(uv.u, 0.5);
    EXPECT_EQ(uv.v, 0.5);
    Vec3 d = octa_decode(uv);
    EXPECT_EQ(d.x, 0.0);
    EXPECT_EQ(d.y, 0.0);
    EXPECT_EQ(d.z, 1.0);
}

TEST(Octahedral, RoundtripUnquantized) {
    RngStream rng(5, 1);
    double worst = 0;
    for (int i = 0; i < 100000; ++i) {
        Vec3 d = random_direction(rng);
        worst = std::max(worst, angle_between(d, octa_decode(octa_encode(d))));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Octahedral, RoundtripQuantized) {
    RngStream rng(6, 1);
    double worst = 0;
    for (int i = 0; i < 100000; ++i) {
        Vec3 d = random_direction(rng);
        worst = std::max(worst, angle_between(d, octa_unpack32(octa_pack32(d))));
    }
    EXPECT_LT(worst, 0.01);
}

TEST(BalanceHeuristic, Examples) {
    EXPECT_DOUBLE_EQ(balance_heuristic(1, 1, 1, 1).weight, 0.5);
    EXPECT_DOUBLE_EQ(balance_heuristic(3, 1, 0, 1).weight, 1.0);
    EXPECT_DOUBLE_EQ(balance_heuristic(2, 1, 1, 2).weight, 0.5);
    auto w = balance_heuristic(0, 1, 0, 1);
    EXPECT_EQ(w.weight, 0.0);
    EXPECT_FALSE(w.valid);
}

TEST(BalanceHeuristic, WeightsSumToOne) {
    RngStream rng(8, 1);
    for (int i = 0; i < 1000; ++i) {
        double a = rng.uniform() * 10, b = rng.uniform() * 10;
        int na = 1 + int(rng.uniform_int(5)), nb = 1 + int(rng.uniform_int(5));
        double wa = balance_heuristic(a, na, b, nb).weight, wb = balance_heuristic(b, nb, a, na).weight;
        EXPECT_NEAR(wa + wb, 1.0, 1e-12);
        EXPECT_GE(wa, 0.0);
        EXPECT_LE(wa, 1.0);
    }
}

TEST(Distribution1D, SamplesProportionally) {
    std::vector<double> w = {1, 0, 3, 4};
    Distribution1D d(w);
    EXPECT_DOUBLE_EQ(d.prob(2), 3.0 / 8.0);
    EXPECT_DOUBLE_EQ(d.prob(1), 0.0);
    std::vector<int> counts(4, 0);
    RngStream rng(9, 1);
    const int n = 80000;
    for (int i = 0; i < n; ++i) counts[d.sample(rng.uniform()).index]++;
    EXPECT_EQ(counts[1], 0);
    EXPECT_NEAR(counts[3] / double(n), 0.5, 0.01);
}

TEST(SphericalFibonacci, UnitAndSingle) {
    EXPECT_EQ(spherical_fibonacci(0, 1).z, 1.0);
    for (int i = 0; i < 50; ++i) EXPECT_NEAR(length(spherical_fibonacci(i, 50)), 1.0, 1e-12);
}

TEST(RunningStats, MatchesTwoPass) {
    RngStream rng(10, 1);
    std::vector<double> xs(1000);
    ScalarStats a, b;
    for (auto& x : xs) x = rng.uniform() * 3 - 1;
    for (std::size_t i = 0; i < xs.size(); ++i) (i < 400 ? a : b).add(xs[i]);
    a.merge(b);
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= xs.size() - 1;
    EXPECT_NEAR(a.mean, mean, 1e-12);
    EXPECT_NEAR(a.variance(), var, 1e-12);
}

TEST(Ema, SeededByFirstValue) {
    Ema e(0.95);
    EXPECT_DOUBLE_EQ(e.add(2.0), 2.0);
    EXPECT_DOUBLE_EQ(e.add(4.0), 0.95 * 2.0 + 0.05 * 4.0);
}

TEST(Parallel, CoversEveryIndexOnce) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; }, 7);
    for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Pfm, TinyImageLayout) {
    Image img(1, 1, Rgb(1, 2, 3));
    std::string bytes = encode_pfm(img);
    std::string header = "PF\n1 1\n-1.0\n";
    ASSERT_EQ(bytes.size(), header.size() + 12);
    EXPECT_EQ(bytes.substr(0, header.size()), header);
    Image back = decode_pfm(bytes);
    EXPECT_EQ(back.at(0, 0).x, 1.0);
    EXPECT_EQ(back.at(0, 0).y, 2.0);
    EXPECT_EQ(back.at(0, 0).z, 3.0);
}

TEST(Pfm, RandomRoundtripBitIdentical) {
    RngStream rng(12, 1);
    Image img(64, 64);
    for (auto& p : img.pixels()) p = Rgb(double(rng.uniform_float()) * 10, double(rng.uniform_float()), -double(rng.uniform_float()));
    Image back = decode_pfm(encode_pfm(img));
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        EXPECT_EQ(float(img[i].x), float(back[i].x));
        EXPECT_EQ(float(img[i].y), float(back[i].y));
        EXPECT_EQ(float(img[i].z), float(back[i].z));
    }
    EXPECT_EQ(encode_pfm(back), encode_pfm(img));
}

TEST(Pfm, RowsBottomToTop) {
    Image img(1, 2);
    img.at(0, 0) = Rgb(1.0);  // top
    img.at(0, 1) = Rgb(2.0);  // bottom
    std::string bytes = encode_pfm(img);
    float first;
    std::memcpy(&first, bytes.data() + std::string("PF\n1 2\n-1.0\n").size(), 4);
    EXPECT_EQ(first, 2.0f);
}

TEST(Pfm, Errors) {
    std::string good = encode_pfm(Image(2, 2, Rgb(1.0)));
    try {
        decode_pfm(good.substr(0, good.size() - 5));
        FAIL();
    } catch (const FormatError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("expected 48"), std::string::npos) << msg;
        EXPECT_NE(msg.find("got 43"), std::string::npos) << msg;
    }
    EXPECT_THROW(decode_pfm("PF\n2 2\n1.0\n" + std::string(48, '\0')), FormatError);
    EXPECT_THROW(decode_pfm("P6\n2 2\n-1.0\n"), FormatError);
    EXPECT_THROW(decode_pfm("PF\nx 2\n-1.0\n"), FormatError);
}

TEST(Quadrature, HelperSanity) { EXPECT_NEAR(sphere_quadrature([](const Vec3&) { return 1.0; }), 4 * kPi, 1e-9); }
