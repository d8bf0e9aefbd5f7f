#pragma once

#include <span>
#include <vector>

#include "tlmc/core/sh.hpp"
#include "tlmc/core/vec.hpp"
#include "tlmc/neural/hash_grid.hpp"
#include "tlmc/neural/mlp.hpp"

namespace tlmc {

// Cache input tuple: where, what the surface looks like.
struct SurfacePoint {
    Vec3 position;
    Vec3 normal{0, 0, 1};
    Rgb albedo{0.0};
    double roughness = 1.0;
};

struct NetworkConfig {
    HashGridConfig grid;
    int sh_bands = 4;
    int hidden_layers = 4;
    int width = 64;
    int outputs = 3;
    OutputActivation output_activation = OutputActivation::Relu;
};

inline constexpr int kAuxFeatures = 7;  // normal (3), albedo (3), roughness (1)

// Input layout: [hash grid L*F | SH basis B^2 | aux 7].
// Aux normalisation: normal as (n+1)/2, albedo and roughness as-is (already in [0,1]).
template <class T>
struct SurfaceEncoding {
    std::vector<T> input;  // full network input; the SH block is rewritten per direction
    GridTrace<T> trace;
    bool has_trace = false;
};

// Hash-grid encoding followed by an MLP, sharing one flat parameter vector.
template <class T>
class NeuralField {
public:
    NeuralField() = default;
    NeuralField(const NetworkConfig& c, const Aabb& bounds) : config_(c), bounds_(bounds) {
        if (c.sh_bands < 1 || c.sh_bands > kMaxShBands) throw ConfigError("network: sh_bands must lie in [1, 8]");
        grid_ = HashGrid(c.grid, 0);
        MlpConfig mc;
        mc.input = grid_.output_width() + sh_count(c.sh_bands) + kAuxFeatures;
        mc.hidden_layers = c.hidden_layers;
        mc.width = c.width;
        mc.output = c.outputs;
        mc.output_activation = c.output_activation;
        mlp_ = Mlp(mc, grid_.param_count());
        params_.assign(grid_.param_count() + mlp_.param_count(), T(0));
    }

    const NetworkConfig& config() const { return config_; }
    const Aabb& bounds() const { return bounds_; }
    void set_bounds(const Aabb& b) { bounds_ = b; }
    const HashGrid& grid() const { return grid_; }
    const Mlp& mlp() const { return mlp_; }
    int input_width() const { return mlp_.config().input; }
    int sh_offset() const { return grid_.output_width(); }
    int aux_offset() const { return grid_.output_width() + sh_count(config_.sh_bands); }

    std::span<T> params() { return params_; }
    std::span<const T> params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }

    void initialize(RngStream& rng, bool random_output = false) {
        grid_.initialize<T>(params_, rng);
        mlp_.initialize<T>(params_, rng, random_output);
    }

    void encode_surface(const SurfacePoint& s, SurfaceEncoding<T>& enc, bool keep_trace = false) const {
        enc.input.assign(input_width(), T(0));
        enc.has_trace = keep_trace;
        grid_.encode<T>(bounds_.normalized(s.position), params_, std::span<T>(enc.input.data(), grid_.output_width()),
                        keep_trace ? &enc.trace : nullptr);
        T* aux = enc.input.data() + aux_offset();
        aux[0] = T(0.5 * (s.normal.x + 1.0));
        aux[1] = T(0.5 * (s.normal.y + 1.0));
        aux[2] = T(0.5 * (s.normal.z + 1.0));
        aux[3] = T(s.albedo.x);
        aux[4] = T(s.albedo.y);
        aux[5] = T(s.albedo.z);
        aux[6] = T(s.roughness);
    }

    void encode_direction(SurfaceEncoding<T>& enc, const Vec3& dir) const {
        sh_eval<T>(dir, config_.sh_bands, std::span<T>(enc.input.data() + sh_offset(), sh_count(config_.sh_bands)));
    }

    // Inference for a batch of directions at one surface; the surface part is encoded once.
    void evaluate(const SurfacePoint& s, std::span<const Vec3> dirs, std::span<Rgb> out) const {
        SurfaceEncoding<T> enc;
        encode_surface(s, enc);
        for (std::size_t i = 0; i < dirs.size(); ++i) out[i] = evaluate_encoded(enc, dirs[i]);
    }

    Rgb evaluate(const SurfacePoint& s, const Vec3& dir) const {
        Rgb r;
        evaluate(s, std::span<const Vec3>(&dir, 1), std::span<Rgb>(&r, 1));
        return r;
    }

    Rgb evaluate_encoded(SurfaceEncoding<T>& enc, const Vec3& dir) const {
        encode_direction(enc, dir);
        return run(enc.input.data());
    }

    Rgb run(const T* input) const {
        T out[8];
        T scratch_local[512];
        std::vector<T> scratch_heap;
        T* scratch = scratch_local;
        if (2 * mlp_.max_width() > 512) {
            scratch_heap.resize(2 * mlp_.max_width());
            scratch = scratch_heap.data();
        }
        mlp_.forward<T>(params_, input, out, scratch);
        return to_rgb(out);
    }

    // Forward + backward for one training sample. grad_fn maps the prediction to
    // dL/d(prediction); the gradient is accumulated into grads (same layout as params).
    template <class GradFn>
    Rgb accumulate_gradient(SurfaceEncoding<T>& enc, const Vec3& dir, GradFn&& grad_fn, std::span<T> grads,
                            bool relu_recovery = false, MlpActivations<T>* scratch = nullptr) const {
        MlpActivations<T> local;
        MlpActivations<T>& act = scratch ? *scratch : local;
        encode_direction(enc, dir);
        T out[8];
        mlp_.forward_train<T>(params_, enc.input.data(), out, act);
        Rgb pred = to_rgb(out);
        Rgb g = grad_fn(pred);
        T gout[8] = {};
        for (int c = 0; c < std::min(3, config_.outputs); ++c) gout[c] = T(g[c]);
        std::vector<T> gin(input_width(), T(0));
        mlp_.backward<T>(params_, act, gout, grads, gin.data(), relu_recovery);
        if (enc.has_trace)
            grid_.backward<T>(enc.trace, std::span<const T>(gin.data(), grid_.output_width()), grads);
        return pred;
    }

    // Same parameters cast to another precision (used by tests and snapshots).
    template <class U>
    NeuralField<U> cast() const {
        NeuralField<U> f(config_, bounds_);
        auto dst = f.params();
        for (std::size_t i = 0; i < params_.size(); ++i) dst[i] = U(params_[i]);
        return f;
    }

private:
    Rgb to_rgb(const T* out) const {
        if (config_.outputs == 1) return Rgb(double(out[0]));
        return Rgb(double(out[0]), double(out[1]), double(out[2]));
    }

    NetworkConfig config_;
    Aabb bounds_;
    HashGrid grid_;
    Mlp mlp_;
    std::vector<T> params_;
};

}  // namespace tlmc
