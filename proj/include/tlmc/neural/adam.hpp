#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tlmc/core/error.hpp"

namespace tlmc {

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double epsilon = 1e-8;
};

template <class T>
class Adam {
public:
    Adam() = default;
    Adam(std::size_t n, const AdamConfig& c = {}) : config_(c), m_(n, T(0)), v_(n, T(0)) {}

    const AdamConfig& config() const { return config_; }
    AdamConfig& config() { return config_; }
    std::uint64_t step_count() const { return step_; }
    std::uint64_t skipped() const { return skipped_; }
    std::span<const T> first_moment() const { return m_; }
    std::span<const T> second_moment() const { return v_; }

    void reset() {
        std::fill(m_.begin(), m_.end(), T(0));
        std::fill(v_.begin(), v_.end(), T(0));
        step_ = 0;
    }

    // Standard Adam with bias correction, sparse in the sense that zero-gradient
    // entries are not moved. Returns false (and leaves everything untouched) when any gradient is non-finite.
    bool step(std::span<T> params, std::span<const T> grads) {
        if (params.size() != m_.size() || grads.size() != m_.size()) throw ConfigError("adam: shape mismatch");
        for (T g : grads)
            if (!std::isfinite(double(g))) {
                ++skipped_;
                return false;
            }
        ++step_;
        const double b1 = config_.beta1, b2 = config_.beta2;
        const double c1 = 1.0 - std::pow(b1, double(step_));
        const double c2 = 1.0 - std::pow(b2, double(step_));
        const T lr = T(config_.learning_rate), eps = T(config_.epsilon);
        const T tb1 = T(b1), tb2 = T(b2), inv_c1 = T(1.0 / c1), inv_c2 = T(1.0 / c2);
        for (std::size_t i = 0; i < params.size(); ++i) {
            T g = grads[i];
            m_[i] = tb1 * m_[i] + (T(1) - tb1) * g;
            v_[i] = tb2 * v_[i] + (T(1) - tb2) * g * g;
            // Entries without gradient (e.g. unreferenced hash cells) only decay.
            if (g == T(0)) continue;
            T mh = m_[i] * inv_c1, vh = v_[i] * inv_c2;
            params[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
        return true;
    }

private:
    AdamConfig config_;
    std::vector<T> m_, v_;
    std::uint64_t step_ = 0;
    std::uint64_t skipped_ = 0;
};

}  // namespace tlmc
