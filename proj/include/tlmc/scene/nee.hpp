#pragma once

#include "tlmc/core/rng.hpp"
#include "tlmc/core/sampling.hpp"
#include "tlmc/scene/material.hpp"
#include "tlmc/scene/scene.hpp"

namespace tlmc {

struct NeeSample {
    Vec3 wi;
    Rgb radiance{0.0};      // emitted radiance arriving along wi (before visibility)
    double pdf = 0;         // solid-angle pdf including light selection
    Rgb contribution{0.0};  // f * cos * L * V / pdf
    Rgb weighted{0.0};      // contribution times the balance-heuristic weight against BSDF sampling
    bool from_environment = false;
    bool visible = false;
    bool valid = false;     // false when the scene has nothing to sample or the sample is degenerate
};

// One-sample next-event estimate at a non-delta vertex. Always draws four
// numbers from rng so that stream positions do not depend on the outcome.
inline NeeSample sample_light_nee(const Scene& scene, const Interaction& it, const Bsdf& bsdf, RngStream& rng) {
    double u_env = rng.uniform(), u_sel = rng.uniform(), u0 = rng.uniform(), u1 = rng.uniform();
    NeeSample s;
    if (!scene.has_lights() || bsdf.is_delta()) return s;

    double p_env = scene.environment_selection_probability();
    if (u_env < p_env) {
        DirectionSample d = scene.environment.sample(u0, u1);
        if (!(d.pdf > 0)) return s;
        s.wi = d.dir;
        s.pdf = d.pdf * p_env;
        s.radiance = scene.environment.eval(d.dir);
        s.from_environment = true;
        s.valid = true;
        s.visible = scene.escapes(it, s.wi);
    } else {
        auto ls = scene.sample_area_light(u_sel, u0, u1);
        if (!ls) return s;
        Vec3 to = ls->position - it.position;
        double d2 = length_squared(to);
        if (!(d2 > 0)) return s;
        s.wi = to / std::sqrt(d2);
        double cos_l = -dot(ls->normal, s.wi);
        s.valid = true;
        if (cos_l <= 0) return s;  // back of a one-sided emitter
        s.pdf = ls->pdf_area * d2 / cos_l;
        s.radiance = ls->radiance;
        s.visible = scene.visible(it, ls->position);
    }
    if (!s.visible || !(s.pdf > 0)) return s;
    Rgb f = bsdf.eval(s.wi);
    double cos_i = dot(s.wi, it.shading_normal);
    if (cos_i <= 0 || is_black(f)) return s;
    s.contribution = f * s.radiance * (cos_i / s.pdf);
    double bsdf_pdf = bsdf.pdf(s.wi);
    MisWeight w = balance_heuristic(s.pdf, 1, bsdf_pdf, 1);
    s.weighted = s.contribution * w.weight;
    return s;
}

}  // namespace tlmc
