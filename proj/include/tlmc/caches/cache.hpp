#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/rng.hpp"
#include "tlmc/core/stats.hpp"
#include "tlmc/neural/adam.hpp"
#include "tlmc/neural/field.hpp"
#include "tlmc/neural/loss.hpp"
#include "tlmc/neural/snapshot.hpp"
#include "tlmc/scene/scene.hpp"

namespace tlmc {

enum class CacheKind : std::uint32_t { Nirc = 1, Nrc = 2, Nvc = 3 };

inline const char* to_string(CacheKind k) {
    switch (k) {
        case CacheKind::Nirc: return "nirc";
        case CacheKind::Nrc: return "nrc";
        case CacheKind::Nvc: return "nvc";
    }
    return "?";
}

inline CacheKind parse_cache_kind(const std::string& s) {
    if (s == "nirc") return CacheKind::Nirc;
    if (s == "nrc") return CacheKind::Nrc;
    if (s == "nvc") return CacheKind::Nvc;
    throw ConfigError("unknown cache kind '" + s + "' (expected nirc, nrc or nvc)");
}

struct CacheTrainingConfig {
    LossKind loss = LossKind::RelativeL2;
    AdamConfig adam;
    int steps_per_frame = 4;
    int batch_size = 16384;
    double relative_l2_epsilon = 0.01;
    double residual_ema_alpha = 0.95;  // F_r tracking for the variance loss
    // Let a rectified output recover from below zero (see Mlp::backward).
    bool relu_recovery = true;
    std::string divergence_snapshot;  // written before throwing on divergence, if non-empty
};

struct CacheConfig {
    NetworkConfig network;
    CacheTrainingConfig training;
    bool random_output_init = false;
};

// One supervised pair. For nirc/nvc `dir` is the incident direction, for nrc the outgoing one.
struct TrainingRecord {
    SurfacePoint surface;
    Vec3 dir;
    Rgb target{0.0};
    double pdf = 1.0;
    int frame = 0;
};

struct TrainStats {
    std::vector<double> losses;  // one per step
    std::size_t records = 0;
    std::size_t skipped_steps = 0;
};

inline SurfacePoint make_surface_point(const Scene& scene, const Interaction& it) {
    const Material& m = scene.material(it);
    SurfacePoint s;
    s.position = it.position;
    s.normal = it.shading_normal;
    s.albedo = Rgb(std::clamp(m.albedo.x, 0.0, 1.0), std::clamp(m.albedo.y, 0.0, 1.0), std::clamp(m.albedo.z, 0.0, 1.0));
    s.roughness = m.feature_roughness();
    return s;
}

// A neural radiance/visibility field plus its optimiser state.
class NeuralCache {
public:
    NeuralCache() = default;
    NeuralCache(CacheKind kind, const Scene& scene, const CacheConfig& config, std::uint64_t seed)
        : kind_(kind), config_(config), has_environment_(scene.environment.present()) {
        NetworkConfig net = config.network;
        net.outputs = 3;
        net.output_activation = kind == CacheKind::Nvc ? OutputActivation::Sigmoid : OutputActivation::Relu;
        if (kind == CacheKind::Nvc && config.training.loss != LossKind::BinaryCrossEntropy)
            config_.training.loss = LossKind::BinaryCrossEntropy;
        if (kind != CacheKind::Nvc && config.training.loss == LossKind::BinaryCrossEntropy)
            throw ConfigError("binary cross-entropy applies to the visibility cache only");
        if (config.training.steps_per_frame < 0 || config.training.batch_size < 1)
            throw ConfigError("cache training: steps_per_frame must be >= 0 and batch_size >= 1");
        config_.network = net;
        field_ = NeuralField<float>(net, padded_bounds(scene.bounds()));
        RngStream rng = RngStream::keyed(seed, {std::uint64_t(RngDomain::Training), std::uint64_t(kind), 0xC0FFEE});
        field_.initialize(rng, config.random_output_init);
        adam_ = Adam<float>(field_.param_count(), config.training.adam);
        for (auto& e : residual_ema_) e = Ema(config.training.residual_ema_alpha);
    }

    CacheKind kind() const { return kind_; }
    const CacheConfig& config() const { return config_; }
    const NeuralField<float>& field() const { return field_; }
    NeuralField<float>& field() { return field_; }
    const Adam<float>& optimizer() const { return adam_; }
    const Rgb& residual_mean() const { return residual_mean_; }
    std::uint64_t training_steps() const { return adam_.step_count(); }

    // Scene bounds can change between frames (animation); the grid follows them.
    void update_bounds(const Aabb& b) { field_.set_bounds(padded_bounds(b)); }

    // Predictions for several directions at one surface; the surface encoding is shared.
    void query(const SurfacePoint& s, std::span<const Vec3> dirs, std::span<Rgb> out) const {
        require_visibility_environment();
        field_.evaluate(s, dirs, out);
    }
    Rgb query(const SurfacePoint& s, const Vec3& dir) const {
        require_visibility_environment();
        return field_.evaluate(s, dir);
    }

    // Encode once, then call evaluate() per direction.
    void encode(const SurfacePoint& s, SurfaceEncoding<float>& enc) const {
        require_visibility_environment();
        field_.encode_surface(s, enc);
    }
    Rgb evaluate(SurfaceEncoding<float>& enc, const Vec3& dir) const { return field_.evaluate_encoded(enc, dir); }

    // `steps` Adam updates over shuffled mini-batches drawn from records.
    TrainStats train_frame(std::span<const TrainingRecord> records, RngStream& rng, int steps = -1) {
        if (steps < 0) steps = config_.training.steps_per_frame;
        TrainStats stats;
        stats.records = records.size();
        if (steps == 0) return stats;
        if (records.empty()) throw ConfigError("train_frame: no training records");
        const CacheTrainingConfig& tc = config_.training;
        std::vector<std::uint32_t> order(records.size());
        std::iota(order.begin(), order.end(), 0u);
        std::size_t cursor = order.size();
        std::vector<float> grads(field_.param_count());
        SurfaceEncoding<float> enc;
        MlpActivations<float> act;
        const std::size_t batch = std::min<std::size_t>(std::size_t(tc.batch_size), records.size());
        for (int step = 0; step < steps; ++step) {
            std::fill(grads.begin(), grads.end(), 0.0f);
            double loss_sum = 0;
            Rgb residual_sum(0.0);
            for (std::size_t b = 0; b < batch; ++b) {
                if (cursor == order.size()) {
                    // Fisher-Yates reshuffle whenever the record list is exhausted.
                    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(std::uint32_t(i))]);
                    cursor = 0;
                }
                const TrainingRecord& r = records[order[cursor++]];
                field_.encode_surface(r.surface, enc, true);
                const double inv_batch = 1.0 / double(batch);
                field_.accumulate_gradient(
                    enc, r.dir,
                    [&](const Rgb& pred) {
                        Rgb g;
                        loss_sum += loss_rgb(tc.loss, pred, r.target, r.pdf, residual_mean_, tc.relative_l2_epsilon, g);
                        residual_sum += (r.target - pred) / r.pdf;
                        return g * inv_batch;
                    },
                    grads, tc.relu_recovery && kind_ != CacheKind::Nvc, &act);
            }
            double loss = loss_sum / double(batch);
            if (!std::isfinite(loss) || !adam_.step(field_.params(), grads)) {
                if (!tc.divergence_snapshot.empty()) save_snapshot(tc.divergence_snapshot, field_, std::uint32_t(kind_));
                throw DivergenceError(std::string(to_string(kind_)) + " training diverged at step " +
                                      std::to_string(adam_.step_count() + 1) + " (loss " + std::to_string(loss) + ")" +
                                      (tc.divergence_snapshot.empty() ? "" : "; snapshot written to " + tc.divergence_snapshot));
            }
            for (float p : field_.params())
                if (!std::isfinite(p)) {
                    if (!tc.divergence_snapshot.empty()) save_snapshot(tc.divergence_snapshot, field_, std::uint32_t(kind_));
                    throw DivergenceError(std::string(to_string(kind_)) + " parameters became non-finite");
                }
            Rgb mean_residual = residual_sum / double(batch);
            for (int c = 0; c < 3; ++c) residual_ema_[c].add(mean_residual[c]);
            residual_mean_ = Rgb(residual_ema_[0].value(), residual_ema_[1].value(), residual_ema_[2].value());
            stats.losses.push_back(loss);
        }
        stats.skipped_steps = adam_.skipped();
        return stats;
    }

    void save(const std::string& path) const { save_snapshot(path, field_, std::uint32_t(kind_)); }

    // Replace the network with a snapshot of matching layout.
    void load(const std::string& path) {
        DecodedSnapshot snap = load_snapshot(path);
        if (snap.kind != std::uint32_t(kind_))
            throw FormatError("snapshot holds a " + std::string(to_string(CacheKind(snap.kind))) + " cache, expected " +
                              to_string(kind_));
        if (snap.field.param_count() != field_.param_count()) throw FormatError("snapshot layout differs from cache config");
        std::copy(snap.field.params().begin(), snap.field.params().end(), field_.params().begin());
        field_.set_bounds(snap.field.bounds());
    }

    void zero_parameters() { std::fill(field_.params().begin(), field_.params().end(), 0.0f); }

private:
    static Aabb padded_bounds(const Aabb& b) {
        Aabb p = b;
        if (p.empty()) {
            p.expand(Vec3(-1.0));
            p.expand(Vec3(1.0));
        }
        Vec3 pad = max(p.extent() * 0.01, Vec3(1e-3));
        p.lo -= pad;
        p.hi += pad;
        return p;
    }

    void require_visibility_environment() const {
        if (kind_ == CacheKind::Nvc && !has_environment_)
            throw ConfigError("visibility cache queried in a scene without an environment light");
    }

    CacheKind kind_ = CacheKind::Nirc;
    CacheConfig config_;
    bool has_environment_ = false;
    NeuralField<float> field_;
    Adam<float> adam_;
    Rgb residual_mean_{0.0};
    Ema residual_ema_[3] = {Ema(0.95), Ema(0.95), Ema(0.95)};
};

}  // namespace tlmc
