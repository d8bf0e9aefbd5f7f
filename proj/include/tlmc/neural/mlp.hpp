#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/rng.hpp"

namespace tlmc {

enum class OutputActivation { Relu, Sigmoid, None };

inline const char* to_string(OutputActivation a) {
    switch (a) {
        case OutputActivation::Relu: return "relu";
        case OutputActivation::Sigmoid: return "sigmoid";
        case OutputActivation::None: return "none";
    }
    return "?";
}

struct MlpConfig {
    int input = 47;
    int hidden_layers = 4;
    int width = 64;
    int output = 3;
    OutputActivation output_activation = OutputActivation::Relu;
};

// Per-sample activations recorded by a training-mode forward pass.
template <class T>
struct MlpActivations {
    std::vector<std::vector<T>> values;  // values[0] = input, values[k] = post-activation of layer k
    std::vector<T> pre_output;           // un-activated output
};

// Fully connected ReLU network. Layer k maps width[k] -> width[k+1]; weights are
// stored input-major (W[i][o]) followed by the bias, inside a flat parameter
// array starting at offset().
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(const MlpConfig& c, std::size_t offset = 0) : config_(c), offset_(offset) {
        if (c.input < 1 || c.output < 1 || c.hidden_layers < 0 || (c.hidden_layers > 0 && c.width < 1))
            throw ConfigError("mlp: invalid layer widths");
        widths_.push_back(c.input);
        for (int i = 0; i < c.hidden_layers; ++i) widths_.push_back(c.width);
        widths_.push_back(c.output);
        std::size_t cursor = offset;
        for (std::size_t k = 0; k + 1 < widths_.size(); ++k) {
            weight_offset_.push_back(cursor);
            cursor += std::size_t(widths_[k]) * widths_[k + 1];
            bias_offset_.push_back(cursor);
            cursor += std::size_t(widths_[k + 1]);
        }
        param_count_ = cursor - offset;
        max_width_ = *std::max_element(widths_.begin(), widths_.end());
    }

    const MlpConfig& config() const { return config_; }
    std::size_t offset() const { return offset_; }
    std::size_t param_count() const { return param_count_; }
    int layer_count() const { return int(widths_.size()) - 1; }
    int width(int k) const { return widths_[k]; }
    std::size_t weight_offset(int layer) const { return weight_offset_[layer]; }
    std::size_t bias_offset(int layer) const { return bias_offset_[layer]; }

    // He-uniform hidden layers; the output layer is zeroed unless random_output.
    template <class T>
    void initialize(std::span<T> params, RngStream& rng, bool random_output = false) const {
        for (int k = 0; k < layer_count(); ++k) {
            int in = widths_[k], out = widths_[k + 1];
            bool last = k + 1 == layer_count();
            double bound = std::sqrt(6.0 / in);
            if (last) bound = random_output ? std::sqrt(3.0 / in) : 0.0;
            for (std::size_t i = 0; i < std::size_t(in) * out; ++i)
                params[weight_offset_[k] + i] = T(bound == 0.0 ? 0.0 : (rng.uniform() * 2.0 - 1.0) * bound);
            for (int o = 0; o < out; ++o) params[bias_offset_[k] + o] = T(0);
        }
    }

    // Inference. scratch must hold 2 * max_width() values.
    template <class T>
    void forward(std::span<const T> params, const T* input, T* output, T* scratch) const {
        T* a = scratch;
        T* b = scratch + max_width_;
        const T* x = input;
        for (int k = 0; k < layer_count(); ++k) {
            bool last = k + 1 == layer_count();
            T* y = last ? output : (x == a ? b : a);
            affine(params, k, x, y);
            if (!last) relu(y, widths_[k + 1]);
            x = y;
        }
        activate_output(output);
    }

    template <class T>
    void forward_train(std::span<const T> params, const T* input, T* output, MlpActivations<T>& act) const {
        act.values.resize(widths_.size() - 1);
        act.values[0].assign(input, input + widths_[0]);
        for (int k = 0; k < layer_count(); ++k) {
            bool last = k + 1 == layer_count();
            if (last) {
                act.pre_output.resize(widths_[k + 1]);
                affine(params, k, act.values[k].data(), act.pre_output.data());
                std::copy(act.pre_output.begin(), act.pre_output.end(), output);
            } else {
                act.values[k + 1].resize(widths_[k + 1]);
                affine(params, k, act.values[k].data(), act.values[k + 1].data());
                relu(act.values[k + 1].data(), widths_[k + 1]);
            }
        }
        activate_output(output);
    }

    // Reverse pass for one sample. grad_output is dL/d(activated output).
    // Accumulates into grad_params and (if non-null) writes dL/d(input).
    // With relu_recovery, a rectified output still passes gradients that would
    // raise it, so units pushed below zero can come back.
    template <class T>
    void backward(std::span<const T> params, const MlpActivations<T>& act, const T* grad_output, std::span<T> grad_params,
                  T* grad_input, bool relu_recovery = false) const {
        std::vector<T> g(grad_output, grad_output + widths_.back());
        const int out_w = widths_.back();
        for (int o = 0; o < out_w; ++o) {
            T z = act.pre_output[o];
            switch (config_.output_activation) {
                case OutputActivation::Relu:
                    // Subgradient 1 at z == 0 so a zero-initialised output layer can learn.
                    if (z < T(0) && !(relu_recovery && g[o] < T(0))) g[o] = T(0);
                    break;
                case OutputActivation::Sigmoid: {
                    T s = sigmoid(z);
                    g[o] *= s * (T(1) - s);
                    break;
                }
                case OutputActivation::None: break;
            }
        }
        std::vector<T> g_prev;
        for (int k = layer_count() - 1; k >= 0; --k) {
            int in = widths_[k], out = widths_[k + 1];
            const std::vector<T>& x = act.values[k];
            T* gw = grad_params.data() + weight_offset_[k];
            T* gb = grad_params.data() + bias_offset_[k];
            const T* w = params.data() + weight_offset_[k];
            for (int o = 0; o < out; ++o) gb[o] += g[o];
            bool need_input = k > 0 || grad_input;
            if (need_input) g_prev.assign(in, T(0));
            for (int i = 0; i < in; ++i) {
                T xi = x[i];
                T* gwi = gw + std::size_t(i) * out;
                const T* wi = w + std::size_t(i) * out;
                T acc = T(0);
                for (int o = 0; o < out; ++o) {
                    gwi[o] += xi * g[o];
                    acc += wi[o] * g[o];
                }
                if (need_input) g_prev[i] = acc;
            }
            if (k > 0) {
                // ReLU derivative of the previous layer's activation.
                for (int i = 0; i < in; ++i)
                    if (!(x[i] > T(0))) g_prev[i] = T(0);
                g.swap(g_prev);
            } else if (grad_input) {
                std::copy(g_prev.begin(), g_prev.end(), grad_input);
            }
        }
    }

    int max_width() const { return max_width_; }

    // Kept strictly inside (0, 1) even where the logistic rounds to 0 or 1.
    template <class T>
    static T sigmoid(T z) {
        T s = z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
        return std::clamp(s, std::numeric_limits<T>::min(), T(1) - std::numeric_limits<T>::epsilon() / T(2));
    }

private:
    template <class T>
    void affine(std::span<const T> params, int k, const T* x, T* y) const {
        int in = widths_[k], out = widths_[k + 1];
        const T* w = params.data() + weight_offset_[k];
        const T* b = params.data() + bias_offset_[k];
        std::copy(b, b + out, y);
        for (int i = 0; i < in; ++i) {
            T xi = x[i];
            if (xi == T(0)) continue;
            const T* wi = w + std::size_t(i) * out;
            for (int o = 0; o < out; ++o) y[o] += xi * wi[o];
        }
    }

    template <class T>
    static void relu(T* v, int n) {
        for (int i = 0; i < n; ++i) v[i] = v[i] > T(0) ? v[i] : T(0);
    }

    template <class T>
    void activate_output(T* y) const {
        int n = widths_.back();
        switch (config_.output_activation) {
            case OutputActivation::Relu: relu(y, n); break;
            case OutputActivation::Sigmoid:
                for (int i = 0; i < n; ++i) y[i] = sigmoid(y[i]);
                break;
            case OutputActivation::None: break;
        }
    }

    MlpConfig config_;
    std::size_t offset_ = 0;
    std::vector<int> widths_;
    std::vector<std::size_t> weight_offset_, bias_offset_;
    std::size_t param_count_ = 0;
    int max_width_ = 0;
};

}  // namespace tlmc
