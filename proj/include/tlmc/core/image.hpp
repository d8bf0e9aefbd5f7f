#pragma once

#include <cstddef>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/vec.hpp"

namespace tlmc {

// Linear RGB framebuffer, row 0 at the top.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = Rgb(0)) : width_(width), height_(height), pixels_(std::size_t(width) * height, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return pixels_.size(); }

    Rgb& at(int x, int y) { return pixels_[std::size_t(y) * width_ + x]; }
    const Rgb& at(int x, int y) const { return pixels_[std::size_t(y) * width_ + x]; }
    Rgb& operator[](std::size_t i) { return pixels_[i]; }
    const Rgb& operator[](std::size_t i) const { return pixels_[i]; }

    std::vector<Rgb>& pixels() { return pixels_; }
    const std::vector<Rgb>& pixels() const { return pixels_; }

    bool same_shape(const Image& o) const { return width_ == o.width_ && height_ == o.height_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> pixels_;
};

inline void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b))
        throw ConfigError("image dimensions differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                          " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

}  // namespace tlmc
