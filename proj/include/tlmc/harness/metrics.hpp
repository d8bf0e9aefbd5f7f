#pragma once

#include <cmath>
#include <string>

#include "tlmc/core/image.hpp"
#include "tlmc/core/stats.hpp"

namespace tlmc {

inline constexpr double kMetricEpsilon = 0.01;

// Mean over pixels and channels of (img - ref)^2 / (ref^2 + eps).
inline double mrse(const Image& img, const Image& ref, double eps = kMetricEpsilon) {
    require_same_shape(img, ref);
    double sum = 0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) {
            double d = img[i][c] - ref[i][c];
            sum += d * d / (ref[i][c] * ref[i][c] + eps);
        }
    return img.pixel_count() ? sum / (3.0 * double(img.pixel_count())) : 0.0;
}

// Symmetric mean absolute percentage error, in [0, 2]; pixels where both are zero count as 0.
inline double smape(const Image& img, const Image& ref) {
    require_same_shape(img, ref);
    double sum = 0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) {
            double a = img[i][c], b = ref[i][c];
            double den = std::abs(a) + std::abs(b);
            if (den > 0) sum += 2.0 * std::abs(a - b) / den;
        }
    return img.pixel_count() ? sum / (3.0 * double(img.pixel_count())) : 0.0;
}

struct BiasVariance {
    double rbias2 = 0;      // mean of (bias^2 - var/n) / (ref^2 + eps): noise of the ensemble mean removed
    double rbias2_raw = 0;  // mean of (mean - ref)^2 / (ref^2 + eps)
    double rbias2_se = 0;   // standard error of rbias2 across pixel-channels
    double z = 0;           // rbias2 / se
    double rvar = 0;        // mean of per-render variance / (ref^2 + eps)
    std::uint64_t renders = 0;
    bool small_ensemble = false;  // fewer than 64 renders: treat the CI with care
    std::string note;

    double ci95() const { return 1.96 * rbias2_se; }
};

// Per-pixel ensemble statistics against a reference.
inline BiasVariance bias_variance_decompose(const PixelStats& ensemble, const Image& ref, double eps = kMetricEpsilon) {
    if (ensemble.width() != ref.width() || ensemble.height() != ref.height())
        throw ConfigError("bias/variance: ensemble and reference sizes differ");
    BiasVariance out;
    ScalarStats terms, raw, var;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const RgbStats& s = ensemble[i];
        out.renders = std::max<std::uint64_t>(out.renders, s.count);
        Rgb v = s.variance();
        for (int c = 0; c < 3; ++c) {
            double den = ref[i][c] * ref[i][c] + eps;
            double d = s.mean[c] - ref[i][c];
            double noise = s.count > 1 ? v[c] / double(s.count) : 0.0;
            raw.add(d * d / den);
            terms.add((d * d - noise) / den);
            var.add(v[c] / den);
        }
    }
    out.rbias2 = terms.mean;
    out.rbias2_raw = raw.mean;
    out.rbias2_se = std::sqrt(terms.variance_of_mean());
    out.z = out.rbias2_se > 0 ? out.rbias2 / out.rbias2_se : 0.0;
    out.rvar = var.mean;
    out.small_ensemble = out.renders < 64;
    if (out.small_ensemble)
        out.note = "ensemble of " + std::to_string(out.renders) + " renders (< 64): confidence interval is wide";
    return out;
}

}  // namespace tlmc
