#pragma once

#include <cmath>
#include <vector>

#include "tlmc/core/image.hpp"
#include "tlmc/core/sampling.hpp"
#include "tlmc/core/vec.hpp"

namespace tlmc {

enum class EnvironmentKind { None, Constant, Sky, LatLong };

// Analytic sky: horizon/zenith gradient above the horizon, flat ground below,
// plus an exponential sun lobe.
struct SkyParams {
    Rgb zenith{0.3, 0.5, 1.0};
    Rgb horizon{1.0, 1.0, 1.0};
    Rgb ground{0.2, 0.2, 0.2};
    Vec3 sun_direction{0.3, 0.8, 0.2};
    Rgb sun_radiance{0.0};
    double sun_exponent = 200.0;
};

// Distant illumination in a y-up world. Lat-long parameterization:
// u = phi / 2pi with phi = atan2(z, x), v = theta / pi with theta = acos(y).
class Environment {
public:
    Environment() = default;

    static Environment none() { return {}; }

    static Environment constant(const Rgb& radiance) {
        Environment e;
        e.kind_ = EnvironmentKind::Constant;
        e.constant_ = radiance;
        return e;
    }

    static Environment sky(const SkyParams& p, double scale = 1.0) {
        Environment e;
        e.kind_ = EnvironmentKind::Sky;
        e.sky_ = p;
        e.sky_.sun_direction = normalize(p.sun_direction);
        e.scale_ = scale;
        e.build_distribution(256, 128);
        return e;
    }

    static Environment latlong(Image img, double scale = 1.0) {
        Environment e;
        e.kind_ = EnvironmentKind::LatLong;
        e.image_ = std::move(img);
        e.scale_ = scale;
        e.build_distribution(e.image_.width(), e.image_.height());
        return e;
    }

    EnvironmentKind kind() const { return kind_; }
    bool present() const { return kind_ != EnvironmentKind::None; }

    Rgb eval(const Vec3& d) const {
        switch (kind_) {
            case EnvironmentKind::None: return Rgb(0.0);
            case EnvironmentKind::Constant: return constant_;
            case EnvironmentKind::Sky: return eval_sky(d) * scale_;
            case EnvironmentKind::LatLong: {
                auto [u, v] = to_uv(d);
                int x = std::clamp(int(u * image_.width()), 0, image_.width() - 1);
                int y = std::clamp(int(v * image_.height()), 0, image_.height() - 1);
                return image_.at(x, y) * scale_;
            }
        }
        return Rgb(0.0);
    }

    DirectionSample sample(double u0, double u1) const {
        if (kind_ == EnvironmentKind::None) return {};
        if (kind_ == EnvironmentKind::Constant) return {sample_uniform_sphere(u0, u1), uniform_sphere_pdf()};
        auto row = rows_.sample(u0);
        auto col = cols_[row.index].sample(u1);
        double u = col.offset, v = row.offset;
        Vec3 d = from_uv(u, v);
        return {d, pdf_uv(row.index, col.index, v)};
    }

    double pdf(const Vec3& d) const {
        if (kind_ == EnvironmentKind::None) return 0.0;
        if (kind_ == EnvironmentKind::Constant) return uniform_sphere_pdf();
        auto [u, v] = to_uv(d);
        int w = int(cols_.front().size()), h = int(rows_.size());
        int x = std::clamp(int(u * w), 0, w - 1);
        int y = std::clamp(int(v * h), 0, h - 1);
        return pdf_uv(std::size_t(y), std::size_t(x), v);
    }

    // Total power proxy used for light selection: average radiance.
    double average_luminance() const {
        switch (kind_) {
            case EnvironmentKind::None: return 0.0;
            case EnvironmentKind::Constant: return luminance(constant_);
            default: return mean_luminance_;
        }
    }

    static std::pair<double, double> to_uv(const Vec3& d) {
        double phi = std::atan2(d.z, d.x);
        if (phi < 0) phi += 2.0 * kPi;
        double theta = std::acos(std::clamp(d.y, -1.0, 1.0));
        return {phi / (2.0 * kPi), theta / kPi};
    }
    static Vec3 from_uv(double u, double v) {
        double phi = 2.0 * kPi * u, theta = kPi * v;
        double st = std::sin(theta);
        return {st * std::cos(phi), std::cos(theta), st * std::sin(phi)};
    }

private:
    Rgb eval_sky(const Vec3& d) const {
        Rgb base;
        if (d.y >= 0) {
            double t = std::sqrt(std::clamp(d.y, 0.0, 1.0));
            base = sky_.horizon * (1.0 - t) + sky_.zenith * t;
        } else {
            base = sky_.ground;
        }
        double c = dot(d, sky_.sun_direction);
        if (!is_black(sky_.sun_radiance)) base += sky_.sun_radiance * std::exp(sky_.sun_exponent * (c - 1.0));
        return base;
    }

    Rgb texel(int x, int y, int w, int h) const {
        if (kind_ == EnvironmentKind::LatLong) return image_.at(x, y) * scale_;
        return eval(from_uv((x + 0.5) / w, (y + 0.5) / h));
    }

    void build_distribution(int w, int h) {
        std::vector<double> row_weights(h);
        cols_.clear();
        cols_.reserve(h);
        double lum_sum = 0, solid = 0;
        for (int y = 0; y < h; ++y) {
            double st = std::sin(kPi * (y + 0.5) / h);
            std::vector<double> wts(w);
            double sum = 0;
            for (int x = 0; x < w; ++x) {
                double l = luminance(texel(x, y, w, h));
                // Floor keeps every direction samplable so MIS never sees a zero pdf.
                wts[x] = (l + 1e-3) * st;
                sum += wts[x];
                lum_sum += l * st;
                solid += st;
            }
            row_weights[y] = sum;
            cols_.emplace_back(wts);
        }
        rows_ = Distribution1D(row_weights);
        mean_luminance_ = solid > 0 ? lum_sum / solid : 0;
    }

    double pdf_uv(std::size_t row, std::size_t col, double v) const {
        double st = std::sin(kPi * v);
        if (st <= 0) return 0.0;
        double p = rows_.prob(row) * cols_[row].prob(col) * double(rows_.size()) * double(cols_[row].size());
        return p / (2.0 * kPi * kPi * st);
    }

    EnvironmentKind kind_ = EnvironmentKind::None;
    Rgb constant_{0.0};
    SkyParams sky_;
    Image image_;
    double scale_ = 1.0;
    Distribution1D rows_;
    std::vector<Distribution1D> cols_;
    double mean_luminance_ = 0;
};

}  // namespace tlmc
