#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tlmc/core/error.hpp"
#include "tlmc/core/sampling.hpp"

namespace tlmc {

inline constexpr double kVmfKappaMin = 1e-3;
inline constexpr double kVmfKappaMax = 1e4;

struct VmfLobe {
    Vec3 mu{0, 0, 1};
    double kappa = 1.0;
    Rgb weight{0.0};
};

// kappa / (4 pi sinh kappa) * exp(kappa mu.w), rewritten so nothing overflows for large kappa.
inline double vmf_pdf(const VmfLobe& lobe, const Vec3& w) {
    const double k = std::max(lobe.kappa, kVmfKappaMin);
    const double norm = k / (2.0 * kPi * -std::expm1(-2.0 * k));
    return norm * std::exp(k * (dot(lobe.mu, w) - 1.0));
}

// Mean resultant length A(kappa) = coth(kappa) - 1/kappa.
inline double vmf_mean_resultant(double kappa) {
    if (kappa < 1e-4) return kappa / 3.0;
    return (1.0 + std::exp(-2.0 * kappa)) / -std::expm1(-2.0 * kappa) - 1.0 / kappa;
}

// Banerjee et al. approximation of A^{-1}(r).
inline double vmf_kappa_from_resultant(double r) {
    r = std::clamp(r, 0.0, 1.0 - 1e-12);
    double k = r * (3.0 - r * r) / (1.0 - r * r);
    return std::clamp(k, kVmfKappaMin, kVmfKappaMax);
}

// Direction drawn from a single lobe (Wood), stable for large kappa.
inline Vec3 sample_vmf(const VmfLobe& lobe, double u0, double u1) {
    const double k = std::max(lobe.kappa, kVmfKappaMin);
    double w = 1.0 + std::log(u0 + (1.0 - u0) * std::exp(-2.0 * k)) / k;
    w = std::clamp(w, -1.0, 1.0);
    double r = std::sqrt(std::max(0.0, 1.0 - w * w));
    double phi = 2.0 * kPi * u1;
    return Frame(lobe.mu).to_world({r * std::cos(phi), r * std::sin(phi), w});
}

struct VmfPixelModel {
    std::vector<VmfLobe> lobes;

    Rgb eval(const Vec3& w) const {
        Rgb s(0.0);
        for (const auto& l : lobes) s += l.weight * vmf_pdf(l, w);
        return s;
    }
    Rgb integral() const {
        Rgb s(0.0);
        for (const auto& l : lobes) s += l.weight;
        return s;
    }
    // Clamps concentrations into [kappa_min, kappa_max]; returns how many lobes were out of range.
    int sanitize() {
        int bad = 0;
        for (auto& l : lobes) {
            if (!(l.kappa >= kVmfKappaMin && l.kappa <= kVmfKappaMax)) {
                ++bad;
                l.kappa = std::isnan(l.kappa) ? kVmfKappaMin : std::clamp(l.kappa, kVmfKappaMin, kVmfKappaMax);
            }
            for (int c = 0; c < 3; ++c) l.weight[c] = std::max(l.weight[c], 0.0);
        }
        return bad;
    }
};

// Smallest angle between any two of the given unit vectors.
inline double min_pairwise_angle(std::span<const Vec3> dirs) {
    double best = kPi;
    for (std::size_t i = 0; i < dirs.size(); ++i)
        for (std::size_t j = i + 1; j < dirs.size(); ++j)
            best = std::min(best, std::acos(std::clamp(dot(dirs[i], dirs[j]), -1.0, 1.0)));
    return best;
}

// Means on a spherical Fibonacci lattice, equal weights (total preserved), and
// a shared kappa putting neighbouring lobes at half maximum where they meet.
inline void vmf_init_fibonacci(VmfPixelModel& model, int lobe_count, const Rgb& total_weight) {
    if (lobe_count < 1) throw ConfigError("vmf: lobe count must be >= 1");
    std::vector<Vec3> mus(static_cast<std::size_t>(lobe_count));
    for (int i = 0; i < lobe_count; ++i) mus[i] = spherical_fibonacci(i, lobe_count);
    double kappa = kVmfKappaMin;
    if (lobe_count > 1) {
        // Mean nearest-neighbour angle of the lattice.
        double sum = 0;
        for (int i = 0; i < lobe_count; ++i) {
            double nn = kPi;
            for (int j = 0; j < lobe_count; ++j)
                if (j != i) nn = std::min(nn, std::acos(std::clamp(dot(mus[i], mus[j]), -1.0, 1.0)));
            sum += nn;
        }
        double theta = sum / lobe_count;
        kappa = std::clamp(std::log(2.0) / (1.0 - std::cos(0.5 * theta)), kVmfKappaMin, kVmfKappaMax);
    }
    model.lobes.assign(std::size_t(lobe_count), VmfLobe{});
    for (int i = 0; i < lobe_count; ++i) {
        model.lobes[i].mu = mus[i];
        model.lobes[i].kappa = kappa;
        model.lobes[i].weight = total_weight / double(lobe_count);
    }
}

inline void vmf_init_fibonacci(VmfPixelModel& model, int lobe_count = 11) {
    Rgb total = model.lobes.empty() ? Rgb(0.0) : model.integral();
    vmf_init_fibonacci(model, lobe_count, total);
}

struct VmfSample {
    Vec3 dir;
    Rgb value;  // integrand f(w)
    double pdf = 0;
};

// Running sufficient statistics of weighted online EM. Sample weight is
// mean(f)/pdf, so the fitted density follows the integrand.
struct StepwiseEmState {
    std::vector<double> s0;  // responsibility mass
    std::vector<Vec3> s1;    // responsibility-weighted directions
    std::vector<Rgb> sc;     // responsibility-weighted f/pdf, the lobe weights
    std::uint64_t steps = 0;
    double exponent = 0.7;  // eta_t = (t + 2)^-exponent
    int min_batch = 15;
    int max_batch = 40;

    double step_size() const { return std::pow(double(steps) + 2.0, -exponent); }
};

inline StepwiseEmState vmf_em_state(const VmfPixelModel& model) {
    StepwiseEmState st;
    const std::size_t k = model.lobes.size();
    st.s0.resize(k);
    st.s1.resize(k);
    st.sc.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const VmfLobe& l = model.lobes[j];
        st.s0[j] = average(l.weight);
        st.s1[j] = l.mu * (st.s0[j] * vmf_mean_resultant(l.kappa));
        st.sc[j] = l.weight;
    }
    return st;
}

namespace detail {

inline void vmf_responsibilities(const VmfPixelModel& model, const StepwiseEmState& st, const Vec3& w,
                                 std::vector<double>& gamma) {
    const std::size_t k = model.lobes.size();
    double mass = 0;
    for (double v : st.s0) mass += v;
    double total = 0;
    for (std::size_t j = 0; j < k; ++j) {
        double pi = mass > 0 ? st.s0[j] / mass : 1.0 / double(k);
        gamma[j] = pi * vmf_pdf(model.lobes[j], w);
        total += gamma[j];
    }
    for (std::size_t j = 0; j < k; ++j) gamma[j] = total > 0 ? gamma[j] / total : 1.0 / double(k);
}

}  // namespace detail

// One stepwise-EM iteration over a mini-batch. An all-zero batch only decays the statistics.
inline void vmf_stepwise_em_update(VmfPixelModel& model, StepwiseEmState& st, std::span<const VmfSample> batch) {
    const std::size_t k = model.lobes.size();
    if (k == 0) throw ConfigError("vmf: model has no lobes");
    if (int(batch.size()) < st.min_batch || int(batch.size()) > st.max_batch)
        throw ConfigError("vmf: stepwise EM batch size must lie in [" + std::to_string(st.min_batch) + ", " +
                          std::to_string(st.max_batch) + "], got " + std::to_string(batch.size()));
    if (st.s0.size() != k) st = vmf_em_state(model);
    std::vector<double> b0(k, 0.0), gamma(k);
    std::vector<Vec3> b1(k, Vec3(0.0));
    std::vector<Rgb> bc(k, Rgb(0.0));
    const double inv_n = 1.0 / double(batch.size());
    bool informative = false;
    for (const VmfSample& s : batch) {
        if (!(s.pdf > 0) || !is_finite(s.value)) continue;
        Rgb fw = s.value / s.pdf;
        for (int c = 0; c < 3; ++c) fw[c] = std::max(fw[c], 0.0);
        double v = average(fw);
        if (!(v > 0)) continue;
        informative = true;
        detail::vmf_responsibilities(model, st, s.dir, gamma);
        for (std::size_t j = 0; j < k; ++j) {
            b0[j] += gamma[j] * v * inv_n;
            b1[j] += s.dir * (gamma[j] * v * inv_n);
            bc[j] += fw * (gamma[j] * inv_n);
        }
    }
    const double eta = st.step_size();
    for (std::size_t j = 0; j < k; ++j) {
        st.s0[j] = (1.0 - eta) * st.s0[j] + eta * b0[j];
        st.s1[j] = st.s1[j] * (1.0 - eta) + b1[j] * eta;
        st.sc[j] = st.sc[j] * (1.0 - eta) + bc[j] * eta;
    }
    ++st.steps;
    if (!informative) {
        for (std::size_t j = 0; j < k; ++j)
            for (int c = 0; c < 3; ++c) model.lobes[j].weight[c] = std::max(st.sc[j][c], 0.0);
        return;
    }
    // M-step.
    for (std::size_t j = 0; j < k; ++j) {
        VmfLobe& l = model.lobes[j];
        for (int c = 0; c < 3; ++c) l.weight[c] = std::max(st.sc[j][c], 0.0);
        double len = length(st.s1[j]);
        if (st.s0[j] > 1e-300 && len > 1e-300) {
            l.mu = st.s1[j] / len;
            l.kappa = vmf_kappa_from_resultant(len / st.s0[j]);
        }
    }
}

// Weighted mean log density of the mixture's shape (proportions from the EM mass).
inline double vmf_log_likelihood(const VmfPixelModel& model, const StepwiseEmState& st, std::span<const VmfSample> batch) {
    double mass = 0;
    for (double v : st.s0) mass += v;
    double num = 0, den = 0;
    for (const VmfSample& s : batch) {
        if (!(s.pdf > 0)) continue;
        double v = std::max(average(s.value / s.pdf), 0.0);
        if (!(v > 0)) continue;
        double d = 0;
        for (std::size_t j = 0; j < model.lobes.size(); ++j)
            d += (mass > 0 ? st.s0[j] / mass : 1.0 / double(model.lobes.size())) * vmf_pdf(model.lobes[j], s.dir);
        num += v * std::log(std::max(d, 1e-300));
        den += v;
    }
    return den > 0 ? num / den : 0.0;
}

}  // namespace tlmc
