#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "tlmc/core/error.hpp"
#include "tlmc/core/vec.hpp"

namespace tlmc {

enum class LossKind { RelativeL2, L2, Variance, BinaryCrossEntropy };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::RelativeL2: return "relative-l2";
        case LossKind::L2: return "l2";
        case LossKind::Variance: return "variance";
        case LossKind::BinaryCrossEntropy: return "bce";
    }
    return "?";
}

inline LossKind parse_loss_kind(const std::string& s) {
    if (s == "relative-l2") return LossKind::RelativeL2;
    if (s == "l2") return LossKind::L2;
    if (s == "variance") return LossKind::Variance;
    if (s == "bce") return LossKind::BinaryCrossEntropy;
    throw ConfigError("unknown loss '" + s + "' (expected relative-l2, l2, variance or bce)");
}

// Scalar loss value and its derivative with respect to the prediction.
struct LossValue {
    double value = 0;
    double grad = 0;
};

namespace detail {
inline void require_pdf(double pdf) {
    if (!(pdf > 0) || !std::isfinite(pdf)) throw ConfigError("loss: sample pdf must be positive and finite");
}
}  // namespace detail

// (f - f_c)^2 / (pdf * (sg(f_c^2) + eps)); the denominator is frozen for differentiation.
inline LossValue loss_relative_l2(double prediction, double target, double pdf, double eps = 0.01) {
    detail::require_pdf(pdf);
    double d = target - prediction;
    double denom = pdf * (prediction * prediction + eps);
    return {d * d / denom, -2.0 * d / denom};
}

inline LossValue loss_l2(double prediction, double target, double pdf) {
    detail::require_pdf(pdf);
    double d = target - prediction;
    return {d * d / pdf, -2.0 * d / pdf};
}

// ((f - f_c)/pdf - F_r)^2 with the running residual mean F_r held constant.
inline LossValue loss_variance(double prediction, double target, double pdf, double residual_mean) {
    detail::require_pdf(pdf);
    double r = (target - prediction) / pdf - residual_mean;
    return {r * r, -2.0 * r / pdf};
}

// Binary cross-entropy on a probability in (0,1); clamped for finite logs.
inline LossValue loss_bce(double prediction, double target) {
    double p = std::clamp(prediction, 1e-7, 1.0 - 1e-7);
    double v = -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
    return {v, (p - target) / (p * (1.0 - p))};
}

// Channel-averaged loss over an RGB prediction; writes per-channel gradients.
inline double loss_rgb(LossKind kind, const Rgb& prediction, const Rgb& target, double pdf, const Rgb& residual_mean,
                       double eps, Rgb& grad) {
    double total = 0;
    for (int c = 0; c < 3; ++c) {
        LossValue l;
        switch (kind) {
            case LossKind::RelativeL2: l = loss_relative_l2(prediction[c], target[c], pdf, eps); break;
            case LossKind::L2: l = loss_l2(prediction[c], target[c], pdf); break;
            case LossKind::Variance: l = loss_variance(prediction[c], target[c], pdf, residual_mean[c]); break;
            case LossKind::BinaryCrossEntropy: l = loss_bce(prediction[c], target[c]); break;
        }
        total += l.value / 3.0;
        grad[c] = l.grad / 3.0;
    }
    return total;
}

}  // namespace tlmc
