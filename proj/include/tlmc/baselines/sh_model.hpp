#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tlmc/core/sh.hpp"

namespace tlmc {

// Per-pixel SH expansion of a whole integrand over the sphere, fitted by
// running Monte Carlo projection. Reconstructions may be negative.
class ShPixelModel {
public:
    explicit ShPixelModel(int bands = 5) : bands_(bands), coeffs_(std::size_t(sh_count(bands)), Rgb(0.0)) {
        if (bands < 1 || bands > kMaxShBands) throw ConfigError("sh model: bands must lie in [1, 8]");
    }

    int bands() const { return bands_; }
    std::size_t coefficient_count() const { return coeffs_.size() * 3; }
    std::uint64_t samples() const { return count_; }
    const std::vector<Rgb>& coefficients() const { return coeffs_; }
    std::vector<Rgb>& coefficients() { return coeffs_; }

    // c_lm <- mean of f(w) Y_lm(w) / pdf. Samples with pdf <= 0 are ignored.
    void accumulate(const Vec3& dir, const Rgb& value, double pdf) {
        if (!(pdf > 0)) return;
        double y[kMaxShBands * kMaxShBands];
        sh_eval<double>(dir, bands_, std::span<double>(y, coeffs_.size()));
        ++count_;
        const double inv_n = 1.0 / double(count_);
        const Rgb v = value / pdf;
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += (v * y[i] - coeffs_[i]) * inv_n;
    }

    Rgb eval(const Vec3& dir) const {
        double y[kMaxShBands * kMaxShBands];
        sh_eval<double>(dir, bands_, std::span<double>(y, coeffs_.size()));
        Rgb s(0.0);
        for (std::size_t i = 0; i < coeffs_.size(); ++i) s += coeffs_[i] * y[i];
        return s;
    }

    // Integral over the sphere; only Y_00 survives.
    Rgb integral() const { return coeffs_[0] * (2.0 * std::sqrt(kPi)); }

    void reset() {
        std::fill(coeffs_.begin(), coeffs_.end(), Rgb(0.0));
        count_ = 0;
    }

private:
    int bands_;
    std::vector<Rgb> coeffs_;
    std::uint64_t count_ = 0;
};

}  // namespace tlmc
