#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "tlmc/scene/geometry.hpp"

namespace tlmc {

// Binary BVH built with binned SAH over triangles and spheres.
class Bvh {
public:
    Bvh() = default;

    void build(std::span<const Triangle> tris, std::span<const Sphere> spheres) {
        tris_ = tris;
        spheres_ = spheres;
        nodes_.clear();
        std::size_t n = tris.size() + spheres.size();
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0u);
        bounds_.resize(n);
        centroids_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            bounds_[i] = i < tris.size() ? tris[i].bounds() : spheres[i - tris.size()].bounds();
            centroids_[i] = bounds_[i].center();
        }
        if (n == 0) return;
        nodes_.reserve(2 * n);
        nodes_.push_back({});
        build_node(0, 0, std::uint32_t(n));
    }

    std::optional<PrimitiveHit> intersect(const Ray& ray, double t_min) const {
        if (nodes_.empty()) return std::nullopt;
        Vec3 inv(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        std::array<std::uint32_t, 64> stack;
        int sp = 0;
        stack[sp++] = 0;
        double t_max = ray.t_max;
        std::optional<PrimitiveHit> best;
        while (sp > 0) {
            const Node& node = nodes_[stack[--sp]];
            if (!intersect_aabb(node.bounds, ray.origin, inv, t_min, t_max)) continue;
            if (node.count > 0) {
                for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                    std::uint32_t prim = order_[i];
                    if (auto h = intersect_primitive(prim, ray, t_min, t_max)) {
                        t_max = h->t;
                        best = h;
                    }
                }
            } else {
                // Visit the nearer child first.
                std::uint32_t a = node.first, b = node.first + 1;
                if (ray.dir[node.axis] < 0) std::swap(a, b);
                stack[sp++] = b;
                stack[sp++] = a;
            }
        }
        return best;
    }

    bool occluded(const Ray& ray, double t_min) const {
        if (nodes_.empty()) return false;
        Vec3 inv(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        std::array<std::uint32_t, 64> stack;
        int sp = 0;
        stack[sp++] = 0;
        while (sp > 0) {
            const Node& node = nodes_[stack[--sp]];
            if (!intersect_aabb(node.bounds, ray.origin, inv, t_min, ray.t_max)) continue;
            if (node.count > 0) {
                for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
                    if (intersect_primitive(order_[i], ray, t_min, ray.t_max)) return true;
            } else {
                stack[sp++] = node.first;
                stack[sp++] = node.first + 1;
            }
        }
        return false;
    }

    // Reference implementation used to validate the tree.
    std::optional<PrimitiveHit> intersect_linear(const Ray& ray, double t_min) const {
        std::optional<PrimitiveHit> best;
        double t_max = ray.t_max;
        for (std::uint32_t p = 0; p < tris_.size() + spheres_.size(); ++p) {
            if (auto h = intersect_primitive(p, ray, t_min, t_max)) {
                t_max = h->t;
                best = h;
            }
        }
        return best;
    }

    Aabb bounds() const { return nodes_.empty() ? Aabb{} : nodes_[0].bounds; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Aabb bounds;
        std::uint32_t first = 0;  // primitive offset (leaf) or left child index (inner)
        std::uint32_t count = 0;  // 0 for inner nodes
        int axis = 0;
    };

    static constexpr int kBins = 12;
    static constexpr std::uint32_t kLeafSize = 2;

    std::optional<PrimitiveHit> intersect_primitive(std::uint32_t prim, const Ray& ray, double t_min, double t_max) const {
        PrimitiveHit h;
        h.prim = prim;
        if (prim < tris_.size()) {
            if (intersect_triangle(tris_[prim], ray, t_min, t_max, h.t, h.b1, h.b2)) return h;
        } else if (intersect_sphere(spheres_[prim - tris_.size()], ray, t_min, t_max, h.t)) {
            return h;
        }
        return std::nullopt;
    }

    void build_node(std::uint32_t index, std::uint32_t begin, std::uint32_t end) {
        Aabb bounds, cbounds;
        for (std::uint32_t i = begin; i < end; ++i) {
            bounds.expand(bounds_[order_[i]]);
            cbounds.expand(centroids_[order_[i]]);
        }
        nodes_[index].bounds = bounds;
        std::uint32_t count = end - begin;
        int axis = cbounds.longest_axis();
        double lo = cbounds.lo[axis], ext = cbounds.hi[axis] - lo;
        if (count <= kLeafSize || ext <= 0.0) {
            nodes_[index].first = begin;
            nodes_[index].count = count;
            return;
        }

        std::array<Aabb, kBins> bin_bounds;
        std::array<std::uint32_t, kBins> bin_count{};
        auto bin_of = [&](std::uint32_t prim) {
            int b = int(kBins * (centroids_[prim][axis] - lo) / ext);
            return std::clamp(b, 0, kBins - 1);
        };
        for (std::uint32_t i = begin; i < end; ++i) {
            int b = bin_of(order_[i]);
            ++bin_count[b];
            bin_bounds[b].expand(bounds_[order_[i]]);
        }
        double best_cost = std::numeric_limits<double>::infinity();
        int best_split = -1;
        for (int s = 1; s < kBins; ++s) {
            Aabb l, r;
            std::uint32_t nl = 0, nr = 0;
            for (int b = 0; b < s; ++b) { l.expand(bin_bounds[b]); nl += bin_count[b]; }
            for (int b = s; b < kBins; ++b) { r.expand(bin_bounds[b]); nr += bin_count[b]; }
            if (nl == 0 || nr == 0) continue;
            double cost = nl * l.surface_area() + nr * r.surface_area();
            if (cost < best_cost) {
                best_cost = cost;
                best_split = s;
            }
        }
        std::uint32_t mid;
        if (best_split < 0) {
            mid = begin + count / 2;
            std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                             [&](std::uint32_t a, std::uint32_t b) { return centroids_[a][axis] < centroids_[b][axis]; });
        } else {
            auto it = std::partition(order_.begin() + begin, order_.begin() + end,
                                     [&](std::uint32_t p) { return bin_of(p) < best_split; });
            mid = std::uint32_t(it - order_.begin());
        }
        std::uint32_t left = std::uint32_t(nodes_.size());
        nodes_.push_back({});
        nodes_.push_back({});
        nodes_[index].first = left;
        nodes_[index].count = 0;
        nodes_[index].axis = axis;
        build_node(left, begin, mid);
        build_node(left + 1, mid, end);
    }

    std::span<const Triangle> tris_;
    std::span<const Sphere> spheres_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
    std::vector<Aabb> bounds_;
    std::vector<Vec3> centroids_;
};

}  // namespace tlmc
