#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "tlmc/baselines/residual_variance.hpp"
#include "tlmc/core/image.hpp"
#include "tlmc/core/octahedral.hpp"
#include "tlmc/core/pfm.hpp"

namespace tlmc {

// res x res octahedral map of fn over the whole sphere, in the local frame
// (z along the frame's normal); texel centres are decoded.
inline Image octahedral_map(int res, const Frame& frame, const std::function<Rgb(const Vec3&)>& fn) {
    Image img(res, res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            Vec3 local = octa_decode({(x + 0.5) / res, (y + 0.5) / res});
            img.at(x, y) = fn(frame.to_world(local));
        }
    return img;
}

// Tone mapping for previews only: exposure, clamp, gamma. Never used in metrics.
inline Rgb tonemap(const Rgb& c, double exposure = 1.0, double gamma = 2.2) {
    Rgb o;
    for (int i = 0; i < 3; ++i) o[i] = std::pow(std::clamp(c[i] * exposure, 0.0, 1.0), 1.0 / gamma);
    return o;
}

// Cached incident radiance around the primary hit of every stride-th pixel.
// Writes <dir>/<kind>_<x>_<y>.pfm; returns how many maps were written.
inline int dump_cache_hemispheres(const Scene& scene, const NeuralCache& cache, int stride, int res,
                                  const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    int written = 0;
    for (int y = stride / 2; y < scene.camera.height; y += stride)
        for (int x = stride / 2; x < scene.camera.width; x += stride) {
            auto it = pixel_center_vertex(scene, x, y);
            if (!it) continue;
            SurfaceEncoding<float> enc;
            cache.encode(make_surface_point(scene, *it), enc);
            Image img = octahedral_map(res, Frame(it->shading_normal), [&](const Vec3& d) {
                return dot(d, it->shading_normal) > 0 ? cache.evaluate(enc, d) : Rgb(0.0);
            });
            write_pfm((dir / (std::string(to_string(cache.kind())) + "_" + std::to_string(x) + "_" + std::to_string(y) + ".pfm")).string(), img);
            ++written;
        }
    return written;
}

}  // namespace tlmc
