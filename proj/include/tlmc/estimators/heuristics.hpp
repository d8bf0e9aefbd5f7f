#pragma once

#include <cmath>
#include <limits>

#include "tlmc/core/vec.hpp"

namespace tlmc {

// How the path spread accumulates. Sum is the footprint-style form whose ratio
// a/a0 is invariant under uniform scene scaling; Product multiplies the
// per-bounce factors and is kept for experiments.
enum class SpreadForm { Sum, Product };

struct PathState {
    Rgb throughput{1.0};
    int vertex = 0;
    double spread = 0;    // a(x1..xn)
    double spread0 = 0;   // a0
    double spread_sqrt_sum = 0;
    bool alive = true;
    bool spread_terminal = false;  // set by a grazing vertex
    double prev_pdf = 0;
    bool prev_delta = false;
};

inline double sph_initial_spread(double primary_distance, double cos1) {
    if (!(cos1 > 0)) return 0.0;
    return primary_distance * primary_distance / (4.0 * kPi * cos1);
}

// Folds segment x_{i-1} -> x_i into the spread. pdf is the solid-angle density
// of the direction sampled at x_{i-1} (infinite for delta lobes), cos the cosine at x_i.
inline void sph_update(PathState& st, double segment, double pdf, double cos, SpreadForm form = SpreadForm::Sum) {
    if (!(cos > 0)) {
        st.spread_terminal = true;
        return;
    }
    if (std::isinf(pdf)) return;  // delta lobe, no spreading
    if (!(pdf > 0)) {
        st.spread_terminal = true;
        return;
    }
    if (form == SpreadForm::Sum) {
        st.spread_sqrt_sum += segment / std::sqrt(pdf * cos);
        st.spread = st.spread_sqrt_sum * st.spread_sqrt_sum;
    } else {
        double f = segment / (pdf * cos);
        st.spread = (st.spread > 0 ? st.spread : 1.0) * f * f;
    }
}

inline bool sph_should_terminate(const PathState& st, double c) { return st.spread_terminal || st.spread > c * st.spread0; }

// P_s = p / (p + N_c/pi); delta lobes bypass this and always continue.
inline double bth_continuation_probability(double pdf, int nc) {
    if (std::isinf(pdf)) return 1.0;
    if (!(pdf > 0)) return 0.0;
    double k = double(nc) * kInvPi;
    double p = pdf / (pdf + k);
    return p < 1.0 ? p : std::nextafter(1.0, 0.0);
}

}  // namespace tlmc
