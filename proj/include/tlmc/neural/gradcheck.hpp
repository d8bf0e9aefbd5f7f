#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "tlmc/neural/field.hpp"
#include "tlmc/neural/loss.hpp"

namespace tlmc {

struct GradCheckSample {
    SurfacePoint surface;
    Vec3 dir;
    Rgb target;
    double pdf = 1.0;
};

struct GradCheckResult {
    double max_relative_error = 0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    std::size_t refined = 0;  // parameters whose step had to shrink to stay off a ReLU kink
};

// Compares reverse-mode gradients of the summed batch loss against central
// differences. The relative-L2 denominator is frozen at the unperturbed
// prediction on both sides. Relative error is |a - n| / max(|a|, |n|, floor).
class GradientChecker {
public:
    GradientChecker(NeuralField<double>& field, std::span<const GradCheckSample> batch, LossKind kind,
                    Rgb residual_mean = Rgb(0.0), double eps = 0.01)
        : field_(field), batch_(batch.begin(), batch.end()), kind_(kind), residual_(residual_mean), eps_(eps) {
        frozen_.resize(batch_.size());
        for (std::size_t i = 0; i < batch_.size(); ++i) frozen_[i] = field_.evaluate(batch_[i].surface, batch_[i].dir);
    }

    std::vector<double> analytic() const {
        std::vector<double> grads(field_.param_count(), 0.0);
        for (std::size_t i = 0; i < batch_.size(); ++i) {
            SurfaceEncoding<double> enc;
            field_.encode_surface(batch_[i].surface, enc, true);
            field_.accumulate_gradient(enc, batch_[i].dir, [&](const Rgb& p) { return loss_grad(i, p); }, grads);
        }
        return grads;
    }

    double loss() const {
        double total = 0;
        for (std::size_t i = 0; i < batch_.size(); ++i) total += loss_value(i, field_.evaluate(batch_[i].surface, batch_[i].dir));
        return total;
    }

    GradCheckResult run(double h = 1e-3, double floor = 1e-7, double min_h = 1e-7) {
        std::vector<double> a = analytic();
        auto params = field_.params();
        const auto base_pattern = pattern();
        GradCheckResult r;
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double x0 = params[k];
            double step = h, numeric = 0;
            bool refined = false;
            for (;;) {
                params[k] = x0 + step;
                double lp = loss();
                bool same = pattern() == base_pattern;
                params[k] = x0 - step;
                double lm = loss();
                same = same && pattern() == base_pattern;
                params[k] = x0;
                numeric = (lp - lm) / (2.0 * step);
                if (same || step * 0.1 < min_h) break;
                step *= 0.1;
                refined = true;
            }
            r.refined += refined;
            double denom = std::max({std::abs(a[k]), std::abs(numeric), floor});
            double err = std::abs(a[k] - numeric) / denom;
            if (err > r.max_relative_error) {
                r.max_relative_error = err;
                r.worst_index = k;
            }
            ++r.checked;
        }
        return r;
    }

private:
    Rgb loss_grad(std::size_t i, const Rgb& p) const {
        Rgb g;
        for (int c = 0; c < 3; ++c) g[c] = channel(i, c, p[c]).grad / 3.0;
        return g;
    }
    double loss_value(std::size_t i, const Rgb& p) const {
        double v = 0;
        for (int c = 0; c < 3; ++c) v += channel(i, c, p[c]).value / 3.0;
        return v;
    }
    LossValue channel(std::size_t i, int c, double p) const {
        const auto& s = batch_[i];
        switch (kind_) {
            case LossKind::RelativeL2: {
                double d = s.target[c] - p;
                double denom = s.pdf * (frozen_[i][c] * frozen_[i][c] + eps_);
                return {d * d / denom, -2.0 * d / denom};
            }
            case LossKind::L2: return loss_l2(p, s.target[c], s.pdf);
            case LossKind::Variance: return loss_variance(p, s.target[c], s.pdf, residual_[c]);
            case LossKind::BinaryCrossEntropy: return loss_bce(p, s.target[c]);
        }
        return {};
    }

    // Sign pattern of every ReLU and of the output pre-activation over the batch.
    std::vector<bool> pattern() const {
        std::vector<bool> bits;
        MlpActivations<double> act;
        for (const auto& s : batch_) {
            SurfaceEncoding<double> enc;
            field_.encode_surface(s.surface, enc);
            field_.encode_direction(enc, s.dir);
            double out[8];
            field_.mlp().forward_train<double>(field_.params(), enc.input.data(), out, act);
            for (std::size_t k = 1; k < act.values.size(); ++k)
                for (double v : act.values[k]) bits.push_back(v > 0);
            for (double v : act.pre_output) bits.push_back(v >= 0);
        }
        return bits;
    }

    NeuralField<double>& field_;
    std::vector<GradCheckSample> batch_;
    LossKind kind_;
    Rgb residual_;
    double eps_;
    std::vector<Rgb> frozen_;
};

}  // namespace tlmc
