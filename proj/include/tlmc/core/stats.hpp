#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tlmc/core/image.hpp"
#include "tlmc/core/vec.hpp"

namespace tlmc {

// Welford accumulator (count, mean, M2).
template <class V>
struct RunningStats {
    std::uint64_t count = 0;
    V mean{};
    V m2{};

    void add(const V& x) {
        ++count;
        V delta = x - mean;
        mean += delta / double(count);
        m2 += delta * (x - mean);
    }
    // Unbiased sample variance.
    V variance() const { return count > 1 ? m2 / double(count - 1) : V{}; }
    // Variance of the sample mean.
    V variance_of_mean() const { return count > 1 ? variance() / double(count) : V{}; }

    void merge(const RunningStats& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        double n = double(count + o.count);
        V delta = o.mean - mean;
        mean += delta * (double(o.count) / n);
        m2 += o.m2 + delta * delta * (double(count) * double(o.count) / n);
        count += o.count;
    }
};

using ScalarStats = RunningStats<double>;
using RgbStats = RunningStats<Rgb>;

// Per-pixel streaming statistics over a sequence of renders or samples.
class PixelStats {
public:
    PixelStats() = default;
    PixelStats(int width, int height) : width_(width), height_(height), stats_(std::size_t(width) * height) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return stats_.size(); }

    void add(std::size_t pixel, const Rgb& v) { stats_[pixel].add(v); }
    void add(const Image& img) {
        for (std::size_t i = 0; i < stats_.size(); ++i) stats_[i].add(img[i]);
    }
    void merge(const PixelStats& o) {
        for (std::size_t i = 0; i < stats_.size(); ++i) stats_[i].merge(o.stats_[i]);
    }

    const RgbStats& operator[](std::size_t i) const { return stats_[i]; }
    RgbStats& operator[](std::size_t i) { return stats_[i]; }

    Image mean() const {
        Image img(width_, height_);
        for (std::size_t i = 0; i < stats_.size(); ++i) img[i] = stats_[i].mean;
        return img;
    }
    Image variance() const {
        Image img(width_, height_);
        for (std::size_t i = 0; i < stats_.size(); ++i) img[i] = stats_[i].variance();
        return img;
    }
    Image variance_of_mean() const {
        Image img(width_, height_);
        for (std::size_t i = 0; i < stats_.size(); ++i) img[i] = stats_[i].variance_of_mean();
        return img;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<RgbStats> stats_;
};

// Exponential moving average, seeded with the first value.
class Ema {
public:
    explicit Ema(double alpha = 0.95) : alpha_(alpha) {}
    double add(double v) {
        value_ = has_value_ ? alpha_ * value_ + (1.0 - alpha_) * v : v;
        has_value_ = true;
        return value_;
    }
    double value() const { return value_; }
    bool has_value() const { return has_value_; }
    double alpha() const { return alpha_; }

private:
    double alpha_;
    double value_ = 0;
    bool has_value_ = false;
};

}  // namespace tlmc
