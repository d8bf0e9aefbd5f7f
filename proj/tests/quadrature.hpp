#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "tlmc/core/vec.hpp"

namespace tlmc::testing {

// Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1] (Newton on P_n).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5)), dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1);
            double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1 - z * z) * dp * dp);
    }
    return {x, w};
}

// Product rule over the sphere: Gauss-Legendre in z = cos(theta), trapezoid in phi.
template <class F>
double sphere_quadrature(F&& f, int n_z = 64, int n_phi = 128) {
    auto [z, w] = gauss_legendre(n_z);
    double sum = 0;
    for (int i = 0; i < n_z; ++i) {
        double r = std::sqrt(std::max(0.0, 1.0 - z[i] * z[i]));
        for (int j = 0; j < n_phi; ++j) {
            double phi = 2.0 * kPi * (j + 0.5) / n_phi;
            sum += w[i] * f(Vec3(r * std::cos(phi), r * std::sin(phi), z[i]));
        }
    }
    return sum * 2.0 * kPi / n_phi;
}

// Same rule restricted to the hemisphere z > 0 of a local frame. Integrands with
// kinks (BSDF lobes) converge as the node counts grow.
template <class F>
double hemisphere_quadrature(F&& f, int n_z = 256, int n_phi = 256) {
    auto [t, w] = gauss_legendre(n_z);
    double sum = 0;
    for (int i = 0; i < n_z; ++i) {
        double z = 0.5 * (t[i] + 1.0);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        for (int j = 0; j < n_phi; ++j) {
            double phi = 2.0 * kPi * (j + 0.5) / n_phi;
            sum += 0.5 * w[i] * f(Vec3(r * std::cos(phi), r * std::sin(phi), z));
        }
    }
    return sum * 2.0 * kPi / n_phi;
}

}  // namespace tlmc::testing
