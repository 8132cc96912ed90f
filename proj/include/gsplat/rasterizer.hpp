#pragma once

#include "gsplat/gaussmath.hpp"
#include "gsplat/parallel.hpp"
#include "gsplat/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace gs {

struct RenderConfig {
    int tile_size = 16;
    double alpha_max = 0.99;
    double alpha_min = 1.0 / 255.0;
    double t_stop = 1e-4;
    double dilation = 0.3;
    // Minimum screen-space extent in standard deviations. The effective extent
    // also covers every pixel where opacity * G can still reach alpha_min.
    double extent_sigma = 3.0;
    bool euclidean_depth = false;
    int threads = 1;
};

/// Per-tile splat lists, each sorted front to back.
struct TileGrid {
    int tile_size = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> tiles;

    const std::vector<std::uint32_t>& at(int tx, int ty) const { return tiles[std::size_t(ty) * tiles_x + tx]; }
};

template <typename Scalar>
struct RenderOutput {
    Image<Scalar> color;
    Eigen::Array<Scalar, Eigen::Dynamic, 1> final_transmittance;
    Eigen::ArrayXi per_pixel_count;
    int degenerate_culled = 0;
};

template <typename Scalar>
struct CompositeResult {
    Vec3<Scalar> rgb = Vec3<Scalar>::Zero();
    Scalar transmittance = 1;
    int count = 0;
    // Number of list entries visited before termination; the backward pass
    // walks the same prefix in reverse.
    int stop = 0;
};

/// Screen-space half extent of a splat in pixels.
template <typename Scalar>
Scalar splat_radius(const Splat2D<Scalar>& s, const RenderConfig& cfg) {
    double k = cfg.extent_sigma;
    const double o = s.opacity;
    if (cfg.alpha_min > 0 && o > cfg.alpha_min)
        k = std::max(k, std::sqrt(2.0 * std::log(o / cfg.alpha_min)));
    return Scalar(k) * std::sqrt(max_eigenvalue2(s.cov2d));
}

/// Front-to-back compositing of `order` (indices into `splats`) at pixel p.
template <typename Scalar>
CompositeResult<Scalar> composite_ordered(std::span<const std::uint32_t> order,
                                          const std::vector<Splat2D<Scalar>>& splats,
                                          const Vec2<Scalar>& p, const Vec3<Scalar>& background,
                                          const RenderConfig& cfg) {
    const Scalar alpha_max = Scalar(cfg.alpha_max);
    const Scalar alpha_min = Scalar(cfg.alpha_min);
    const Scalar t_stop = Scalar(cfg.t_stop);

    CompositeResult<Scalar> r;
    std::size_t pos = 0;
    for (; pos < order.size(); ++pos) {
        const auto& s = splats[order[pos]];
        const Scalar alpha = std::min(s.opacity * eval_gaussian2(s, p), alpha_max);
        if (alpha < alpha_min)
            continue;
        r.rgb += (r.transmittance * alpha) * s.rgb;
        r.transmittance *= Scalar(1) - alpha;
        ++r.count;
        if (r.transmittance < t_stop) {
            ++pos;
            break;
        }
    }
    r.stop = static_cast<int>(pos);
    r.rgb += r.transmittance * background;
    return r;
}

/// Composites splats already ordered front to back.
template <typename Scalar>
CompositeResult<Scalar> composite_pixel(const std::vector<Splat2D<Scalar>>& ordered, const Vec2<Scalar>& p,
                                        const Vec3<Scalar>& background, const RenderConfig& cfg = {}) {
    std::vector<std::uint32_t> order(ordered.size());
    std::iota(order.begin(), order.end(), 0u);
    return composite_ordered<Scalar>(order, ordered, p, background, cfg);
}

template <typename Scalar>
Vec2<Scalar> pixel_center(int x, int y) {
    return {Scalar(x) + Scalar(0.5), Scalar(y) + Scalar(0.5)};
}

/// Splats produced for one view, in ascending source order.
template <typename Scalar>
struct ProjectedScene {
    std::vector<Splat2D<Scalar>> splats;
    int degenerate = 0;
};

/// Projects every Gaussian with depth in (near, far) and a valid 2D covariance.
/// With `cull_to_image`, also drops splats whose extent misses the image
/// rectangle grown by one tile.
template <typename Scalar>
ProjectedScene<Scalar> project_scene(const SceneModel<Scalar>& scene, const Camera<Scalar>& cam,
                                     const RenderConfig& cfg, bool cull_to_image) {
    const std::size_t n = scene.size();
    std::vector<std::optional<Splat2D<Scalar>>> slots(n);
    std::vector<char> degenerate(n, 0);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const auto& g = scene.gaussians[i];
        const Scalar z = world_to_camera(cam, g.mean).z();
        if (!(z > cam.near_plane && z < cam.far_plane))
            return;
        auto s = try_splat(g, cam, scene.sh_degree, Scalar(cfg.dilation), cfg.euclidean_depth);
        if (!s) {
            degenerate[i] = 1;
            return;
        }
        s->source_index = static_cast<int>(i);
        if (cull_to_image) {
            const Scalar r = splat_radius(*s, cfg);
            const Scalar margin = Scalar(cfg.tile_size);
            if (s->mean2d.x() + r < -margin || s->mean2d.x() - r > Scalar(cam.width) + margin ||
                s->mean2d.y() + r < -margin || s->mean2d.y() - r > Scalar(cam.height) + margin)
                return;
        }
        slots[i] = std::move(s);
    });

    ProjectedScene<Scalar> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.degenerate += degenerate[i];
        if (slots[i])
            out.splats.push_back(*slots[i]);
    }
    return out;
}

/// Indices of Gaussians that can touch the image.
template <typename Scalar>
std::vector<int> cull_frustum(const SceneModel<Scalar>& scene, const Camera<Scalar>& cam,
                              const RenderConfig& cfg = {}) {
    const auto projected = project_scene(scene, cam, cfg, true);
    std::vector<int> indices;
    indices.reserve(projected.splats.size());
    for (const auto& s : projected.splats)
        indices.push_back(s.source_index);
    return indices;
}

/// Splat indices sorted by (depth, source_index).
template <typename Scalar>
std::vector<std::uint32_t> depth_order(const std::vector<Splat2D<Scalar>>& splats) {
    std::vector<std::uint32_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (splats[a].depth != splats[b].depth)
            return splats[a].depth < splats[b].depth;
        return splats[a].source_index < splats[b].source_index;
    });
    return order;
}

template <typename Scalar>
TileGrid bin_and_sort(const std::vector<Splat2D<Scalar>>& splats, int width, int height,
                      const RenderConfig& cfg) {
    TileGrid grid;
    grid.tile_size = cfg.tile_size;
    grid.tiles_x = (width + cfg.tile_size - 1) / cfg.tile_size;
    grid.tiles_y = (height + cfg.tile_size - 1) / cfg.tile_size;
    grid.tiles.assign(std::size_t(grid.tiles_x) * grid.tiles_y, {});

    // Appending in global depth order keeps every tile list sorted.
    for (const std::uint32_t idx : depth_order(splats)) {
        const auto& s = splats[idx];
        const double r = splat_radius(s, cfg);
        const double ts = cfg.tile_size;
        const int tx0 = std::max(0, static_cast<int>(std::floor((s.mean2d.x() - r) / ts)));
        const int ty0 = std::max(0, static_cast<int>(std::floor((s.mean2d.y() - r) / ts)));
        const int tx1 = std::min(grid.tiles_x - 1, static_cast<int>(std::floor((s.mean2d.x() + r) / ts)));
        const int ty1 = std::min(grid.tiles_y - 1, static_cast<int>(std::floor((s.mean2d.y() + r) / ts)));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                grid.tiles[std::size_t(ty) * grid.tiles_x + tx].push_back(idx);
    }
    return grid;
}

template <typename Scalar>
TileGrid bin_and_sort(const std::vector<Splat2D<Scalar>>& splats, int width, int height, int tile_size) {
    RenderConfig cfg;
    cfg.tile_size = tile_size;
    return bin_and_sort(splats, width, height, cfg);
}

namespace detail {

/// Everything the forward pass produces; the backward pass replays it.
template <typename Scalar>
struct ForwardState {
    ProjectedScene<Scalar> projected;
    TileGrid grid;
    RenderOutput<Scalar> output;
    std::vector<int> stop;  // per pixel
};

template <typename Scalar>
ForwardState<Scalar> rasterize_forward(const SceneModel<Scalar>& scene, const Camera<Scalar>& cam,
                                       const RenderConfig& cfg) {
    if (cfg.tile_size <= 0 || (cfg.tile_size & (cfg.tile_size - 1)) != 0)
        throw Error(ErrorKind::Schema, "tile size must be a positive power of two");
    ForwardState<Scalar> st;
    st.projected = project_scene(scene, cam, cfg, true);
    st.grid = bin_and_sort(st.projected.splats, cam.width, cam.height, cfg);

    const int w = cam.width, h = cam.height;
    auto& out = st.output;
    out.color = Image<Scalar>(w, h);
    out.final_transmittance.resize(Eigen::Index(w) * h);
    out.per_pixel_count.resize(Eigen::Index(w) * h);
    out.degenerate_culled = st.projected.degenerate;
    st.stop.assign(std::size_t(w) * h, 0);

    const int ts = cfg.tile_size;
    parallel_for(st.grid.tiles.size(), cfg.threads, [&](std::size_t t) {
        const int tx = static_cast<int>(t) % st.grid.tiles_x;
        const int ty = static_cast<int>(t) / st.grid.tiles_x;
        const auto& list = st.grid.tiles[t];
        for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y) {
            for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x) {
                const auto r = composite_ordered<Scalar>(list, st.projected.splats, pixel_center<Scalar>(x, y),
                                                         scene.background, cfg);
                const auto i = out.color.index(x, y);
                out.color.pixels.row(i) = r.rgb.transpose().array();
                out.final_transmittance[i] = r.transmittance;
                out.per_pixel_count[i] = r.count;
                st.stop[std::size_t(i)] = r.stop;
            }
        }
    });
    return st;
}

} // namespace detail

/// Tiled forward render. Output bits do not depend on cfg.threads.
template <typename Scalar>
RenderOutput<Scalar> render(const SceneModel<Scalar>& scene, const Camera<Scalar>& cam,
                            const RenderConfig& cfg = {}) {
    return detail::rasterize_forward(scene, cam, cfg).output;
}

} // namespace gs
