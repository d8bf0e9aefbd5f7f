#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/rng.hpp"
#include "tlmc/core/vec.hpp"

namespace tlmc {

struct HashGridConfig {
    int levels = 12;
    int features = 2;
    int log2_table_size = 15;
    int base_resolution = 16;
    int max_resolution = 512;
};

// Corner indices (into the flat parameter vector) and trilinear weights of one
// encoded position, kept for the backward pass.
template <class T>
struct GridTrace {
    std::vector<std::uint32_t> index;  // levels * 8, offset of feature 0
    std::vector<T> weight;             // levels * 8
};

// Multiresolution hash encoding over the unit cube. Owns no storage: feature
// tables live in an external flat parameter array starting at `offset()`.
class HashGrid {
public:
    HashGrid() = default;
    explicit HashGrid(const HashGridConfig& c, std::size_t offset = 0) : config_(c), offset_(offset) {
        if (c.levels < 1 || c.features < 1 || c.log2_table_size < 4 || c.log2_table_size > 26)
            throw ConfigError("hash grid: invalid levels/features/table size");
        if (c.base_resolution < 1 || c.max_resolution < c.base_resolution)
            throw ConfigError("hash grid: invalid resolution range");
        double growth = c.levels > 1 ? std::exp((std::log(double(c.max_resolution)) - std::log(double(c.base_resolution))) /
                                                (c.levels - 1))
                                     : 1.0;
        std::size_t cap = std::size_t(1) << c.log2_table_size;
        std::size_t cursor = 0;
        for (int l = 0; l < c.levels; ++l) {
            Level lv;
            lv.resolution = int(std::floor(c.base_resolution * std::pow(growth, l) + 1e-9));
            if (l + 1 == c.levels) lv.resolution = c.max_resolution;
            if (l > 0 && lv.resolution <= levels_.back().resolution)
                throw ConfigError("hash grid: level resolutions must increase strictly; widen the resolution range");
            std::size_t side = std::size_t(lv.resolution) + 1;
            std::size_t dense = side * side * side;
            lv.dense = dense <= cap;
            lv.size = lv.dense ? dense : cap;
            lv.offset = cursor;
            cursor += lv.size * std::size_t(c.features);
            levels_.push_back(lv);
        }
        param_count_ = cursor;
    }

    const HashGridConfig& config() const { return config_; }
    std::size_t offset() const { return offset_; }
    std::size_t param_count() const { return param_count_; }
    int output_width() const { return config_.levels * config_.features; }
    int resolution(int level) const { return levels_[level].resolution; }
    bool dense(int level) const { return levels_[level].dense; }
    std::size_t table_size(int level) const { return levels_[level].size; }

    template <class T>
    void initialize(std::span<T> params, RngStream& rng, double scale = 1e-4) const {
        for (std::size_t i = 0; i < param_count_; ++i) params[offset_ + i] = T((rng.uniform() * 2.0 - 1.0) * scale);
    }

    // Flat parameter index of feature 0 at integer vertex (x, y, z) of a level.
    std::uint32_t vertex_index(int level, std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
        const Level& lv = levels_[level];
        std::size_t slot;
        if (lv.dense) {
            std::size_t side = std::size_t(lv.resolution) + 1;
            slot = x + side * (y + side * z);
        } else {
            std::uint32_t h = x * 1u ^ y * 2654435761u ^ z * 805459861u;
            slot = h & (lv.size - 1);
        }
        return std::uint32_t(offset_ + lv.offset + slot * std::size_t(config_.features));
    }

    // p in [0,1]^3 (clamped). Writes levels*features values into out.
    template <class T>
    void encode(const Vec3& p, std::span<const T> params, std::span<T> out, GridTrace<T>* trace = nullptr) const {
        const int F = config_.features;
        if (trace) {
            trace->index.resize(levels_.size() * 8);
            trace->weight.resize(levels_.size() * 8);
        }
        Vec3 q(std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0), std::clamp(p.z, 0.0, 1.0));
        for (std::size_t l = 0; l < levels_.size(); ++l) {
            const double res = levels_[l].resolution;
            std::uint32_t base[3];
            double frac[3];
            for (int a = 0; a < 3; ++a) {
                double s = q[a] * res;
                double f = std::floor(s);
                if (f >= res) f = res - 1;  // q == 1 lands on the last cell's far face
                base[a] = std::uint32_t(f);
                frac[a] = s - f;
            }
            T* o = out.data() + l * F;
            for (int f = 0; f < F; ++f) o[f] = T(0);
            for (int c = 0; c < 8; ++c) {
                int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
                double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) * (dz ? frac[2] : 1.0 - frac[2]);
                std::uint32_t idx = vertex_index(int(l), base[0] + dx, base[1] + dy, base[2] + dz);
                T wt = T(w);
                for (int f = 0; f < F; ++f) o[f] += wt * params[idx + f];
                if (trace) {
                    trace->index[l * 8 + c] = idx;
                    trace->weight[l * 8 + c] = wt;
                }
            }
        }
    }

    // Scatter-adds dL/d(features) into the table gradient.
    template <class T>
    void backward(const GridTrace<T>& trace, std::span<const T> grad_out, std::span<T> grad_params) const {
        const int F = config_.features;
        for (std::size_t l = 0; l < levels_.size(); ++l) {
            const T* g = grad_out.data() + l * F;
            for (int c = 0; c < 8; ++c) {
                std::uint32_t idx = trace.index[l * 8 + c];
                T w = trace.weight[l * 8 + c];
                for (int f = 0; f < F; ++f) grad_params[idx + f] += w * g[f];
            }
        }
    }

private:
    struct Level {
        int resolution = 0;
        bool dense = false;
        std::size_t size = 0;    // entries (each `features` wide)
        std::size_t offset = 0;  // relative to the grid's first parameter
    };

    HashGridConfig config_;
    std::size_t offset_ = 0;
    std::vector<Level> levels_;
    std::size_t param_count_ = 0;
};

}  // namespace tlmc
