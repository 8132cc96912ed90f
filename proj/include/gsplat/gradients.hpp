#pragma once

#include "gsplat/rasterizer.hpp"

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace gs {

/// Per-Gaussian gradient accumulators plus the screen-space gradient statistic
/// used by densification, in loss units per pixel. Parameter gradients reuse the Gaussian3D layout.
template <typename Scalar>
struct GradientBuffer {
    std::vector<Gaussian3D<Scalar>> grads;
    std::vector<Scalar> grad2d_norm_accum;
    std::vector<int> grad2d_count;

    GradientBuffer() = default;
    explicit GradientBuffer(std::size_t n) { resize(n); }

    std::size_t size() const { return grads.size(); }

    void resize(std::size_t n) {
        grads.assign(n, Gaussian3D<Scalar>::zero());
        grad2d_norm_accum.assign(n, Scalar(0));
        grad2d_count.assign(n, 0);
    }

    void zero_params() {
        for (auto& g : grads)
            g = Gaussian3D<Scalar>::zero();
    }
};

/// Gradient of the loss with respect to one splat's 2D quantities.
template <typename Scalar>
struct SplatGrad {
    Vec2<Scalar> mean2d = Vec2<Scalar>::Zero();
    Mat2<Scalar> inv_cov2d = Mat2<Scalar>::Zero();  // full symmetric derivative
    Vec3<Scalar> rgb = Vec3<Scalar>::Zero();
    Scalar opacity = 0;

    SplatGrad& operator+=(const SplatGrad& o) {
        mean2d += o.mean2d;
        inv_cov2d += o.inv_cov2d;
        rgb += o.rgb;
        opacity += o.opacity;
        return *this;
    }
};

namespace detail {

// Reverse of composite_ordered for one pixel. `local` is indexed by list position.
template <typename Scalar>
void backward_pixel(std::span<const std::uint32_t> order, int stop,
                    const std::vector<Splat2D<Scalar>>& splats, const Vec2<Scalar>& p,
                    const Vec3<Scalar>& background, Scalar final_transmittance, const Vec3<Scalar>& d_pixel,
                    const RenderConfig& cfg, std::vector<SplatGrad<Scalar>>& local) {
    const Scalar alpha_max = Scalar(cfg.alpha_max);
    const Scalar alpha_min = Scalar(cfg.alpha_min);

    Scalar t_after = final_transmittance;
    Vec3<Scalar> behind = background;
    for (int pos = stop - 1; pos >= 0; --pos) {
        const auto& s = splats[order[std::size_t(pos)]];
        const Vec2<Scalar> d = p - s.mean2d;
        const Scalar power = Scalar(-0.5) * d.dot(s.inv_cov2d * d);
        const Scalar gauss = std::exp(std::min(power, Scalar(0)));
        const Scalar raw_alpha = s.opacity * gauss;
        const Scalar alpha = std::min(raw_alpha, alpha_max);
        if (alpha < alpha_min)
            continue;

        const Scalar t_before = t_after / (Scalar(1) - alpha);
        auto& g = local[std::size_t(pos)];
        g.rgb += (t_before * alpha) * d_pixel;
        const Scalar d_alpha = t_before * d_pixel.dot(s.rgb - behind);
        behind = alpha * s.rgb + (Scalar(1) - alpha) * behind;
        t_after = t_before;

        if (raw_alpha > alpha_max)
            continue;
        g.opacity += d_alpha * gauss;
        const Scalar d_power = d_alpha * s.opacity * gauss;
        if (power < Scalar(0)) {
            g.mean2d += d_power * (s.inv_cov2d * d);
            g.inv_cov2d += (Scalar(-0.5) * d_power) * (d * d.transpose());
        }
    }
}

/// d(rotation matrix) / d(unit quaternion component), contracted with dR.
template <typename Scalar>
Vec4<Scalar> rotation_to_quat_grad(const Vec4<Scalar>& q, const Mat3<Scalar>& d_rot) {
    const Scalar w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3<Scalar> dw, dx, dy, dz;
    dw << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    dx << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    dy << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    dz << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    return {d_rot.cwiseProduct(dw).sum(), d_rot.cwiseProduct(dx).sum(), d_rot.cwiseProduct(dy).sum(),
            d_rot.cwiseProduct(dz).sum()};
}

/// Chains one splat's 2D gradient back to its Gaussian's raw parameters.
template <typename Scalar>
Gaussian3D<Scalar> backward_splat(const Gaussian3D<Scalar>& gauss, const Camera<Scalar>& cam, int sh_degree,
                                  const Splat2D<Scalar>& s, const SplatIntermediates<Scalar>& in,
                                  const SplatGrad<Scalar>& sg) {
    Gaussian3D<Scalar> out = Gaussian3D<Scalar>::zero();

    // Color through SH, including the view direction's dependence on the mean.
    Vec3<Scalar> d_rgb = sg.rgb;
    for (int c = 0; c < 3; ++c)
        if (in.rgb_clamped[c])
            d_rgb[c] = 0;
    const int n = sh_coeff_count(sh_degree);
    const auto basis = sh::basis(in.view_dir, sh_degree);
    out.sh.topRows(n) = basis.head(n) * d_rgb.transpose();
    Vec3<Scalar> d_mean = Vec3<Scalar>::Zero();
    if (sh_degree > 0) {
        const auto basis_grad = sh::basis_gradient(in.view_dir, sh_degree);
        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights = gauss.sh.topRows(n) * d_rgb;
        const Vec3<Scalar> d_dir = basis_grad.topRows(n).transpose() * weights;
        d_mean += (d_dir - in.view_dir * in.view_dir.dot(d_dir)) / in.view_dist;
    }

    out.opacity_logit = sg.opacity * s.opacity * (Scalar(1) - s.opacity);

    // inv_cov2d -> cov2d -> (J, camera-space covariance).
    const Mat2<Scalar> d_cov2d = -s.inv_cov2d * sg.inv_cov2d * s.inv_cov2d;
    const Mat23<Scalar>& j = in.jacobian;
    const Mat3<Scalar> d_cov_cam = j.transpose() * d_cov2d * j;
    const Mat23<Scalar> d_jac = Scalar(2) * d_cov2d * j * in.cov_cam;

    const Mat3<Scalar> d_sigma = cam.rotation.transpose() * d_cov_cam * cam.rotation;
    const Mat3<Scalar> l = in.rotation * in.scale.asDiagonal();
    const Mat3<Scalar> d_l = Scalar(2) * d_sigma * l;
    const Mat3<Scalar> d_rot = d_l * in.scale.asDiagonal();
    const Vec3<Scalar> d_scale = d_l.cwiseProduct(in.rotation).colwise().sum().transpose();
    out.log_scale = d_scale.cwiseProduct(in.scale);

    const Scalar qn = gauss.quat.norm();
    const Vec4<Scalar> q = gauss.quat / qn;
    const Vec4<Scalar> d_qhat = rotation_to_quat_grad(q, d_rot);
    out.quat = (d_qhat - q * q.dot(d_qhat)) / qn;

    // Camera-space position feeds both the projected mean and the Jacobian.
    const Scalar x = in.x_cam.x(), y = in.x_cam.y(), z = in.x_cam.z();
    const Scalar iz = Scalar(1) / z, iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3<Scalar> d_xcam = j.transpose() * sg.mean2d;
    d_xcam.x() += d_jac(0, 2) * (-cam.fx * iz2);
    d_xcam.y() += d_jac(1, 2) * (-cam.fy * iz2);
    d_xcam.z() += d_jac(0, 0) * (-cam.fx * iz2) + d_jac(0, 2) * (Scalar(2) * cam.fx * x * iz3) +
                  d_jac(1, 1) * (-cam.fy * iz2) + d_jac(1, 2) * (Scalar(2) * cam.fy * y * iz3);
    d_mean += cam.rotation.transpose() * d_xcam;
    out.mean = d_mean;
    return out;
}

template <typename Scalar>
void check_image_dims(const Camera<Scalar>& cam, const Image<Scalar>& img, const char* what) {
    if (img.width != cam.width || img.height != cam.height)
        throw Error(ErrorKind::DimensionMismatch,
                    std::string(what) + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        ", camera is " + std::to_string(cam.width) + "x" + std::to_string(cam.height));
}

} // namespace detail

/// Reverse-mode pass of a recorded tiled render: adds d(sum <d_image, render>) to
/// `buffer` and bumps the per-view screen-gradient statistics. Sorting, culling
/// and the alpha gates are treated as locally constant.
template <typename Scalar>
void backward_from_forward(const detail::ForwardState<Scalar>& st, const SceneModel<Scalar>& scene,
                           const Camera<Scalar>& cam, const RenderConfig& cfg, const Image<Scalar>& d_image,
                           GradientBuffer<Scalar>& buffer) {
    detail::check_image_dims(cam, d_image, "d_image");
    if (buffer.size() != scene.size())
        throw Error(ErrorKind::DimensionMismatch, "gradient buffer rows do not match scene size");

    const auto& splats = st.projected.splats;
    const int w = cam.width, h = cam.height, ts = cfg.tile_size;

    std::vector<std::vector<SplatGrad<Scalar>>> per_tile(st.grid.tiles.size());
    parallel_for(st.grid.tiles.size(), cfg.threads, [&](std::size_t t) {
        const auto& list = st.grid.tiles[t];
        auto& local = per_tile[t];
        local.assign(list.size(), SplatGrad<Scalar>{});
        if (list.empty())
            return;
        const int tx = static_cast<int>(t) % st.grid.tiles_x;
        const int ty = static_cast<int>(t) / st.grid.tiles_x;
        for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y) {
            for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x) {
                const auto i = st.output.color.index(x, y);
                const Vec3<Scalar> d_pixel = d_image.pixels.row(i).transpose().matrix();
                if (d_pixel.isZero(0))
                    continue;
                detail::backward_pixel<Scalar>(list, st.stop[std::size_t(i)], splats, pixel_center<Scalar>(x, y),
                                               scene.background, st.output.final_transmittance[i], d_pixel, cfg,
                                               local);
            }
        }
    });

    // Fixed-order merge keeps the result independent of thread scheduling.
    std::vector<SplatGrad<Scalar>> merged(splats.size());
    for (std::size_t t = 0; t < per_tile.size(); ++t) {
        const auto& list = st.grid.tiles[t];
        for (std::size_t k = 0; k < list.size(); ++k)
            merged[list[k]] += per_tile[t][k];
    }

    parallel_for(splats.size(), cfg.threads, [&](std::size_t k) {
        const auto& s = splats[k];
        const auto idx = static_cast<std::size_t>(s.source_index);
        const auto& gauss = scene.gaussians[idx];
        SplatIntermediates<Scalar> inter;
        try_splat(gauss, cam, scene.sh_degree, Scalar(cfg.dilation), cfg.euclidean_depth, &inter);
        const auto g = detail::backward_splat(gauss, cam, scene.sh_degree, s, inter, merged[k]);
        auto& dst = buffer.grads[idx];
        dst.mean += g.mean;
        dst.log_scale += g.log_scale;
        dst.quat += g.quat;
        dst.opacity_logit += g.opacity_logit;
        dst.sh += g.sh;
        buffer.grad2d_norm_accum[idx] += merged[k].mean2d.norm();
        buffer.grad2d_count[idx] += 1;
    });
}

/// Forward plus backward in one call; returns the forward output.
template <typename Scalar>
RenderOutput<Scalar> backward_render_into(const SceneModel<Scalar>& scene, const Camera<Scalar>& cam,
                                          const RenderConfig& cfg, const Image<Scalar>& d_image,
                                          GradientBuffer<Scalar>& buffer) {
    detail::check_image_dims(cam, d_image, "d_image");
    auto st = detail::rasterize_forward(scene, cam, cfg);
    backward_from_forward(st, scene, cam, cfg, d_image, buffer);
    return std::move(st.output);
}

template <typename Scalar>
GradientBuffer<Scalar> backward_render(const SceneModel<Scalar>& scene, const Camera<Scalar>& cam,
                                       const RenderConfig& cfg, const Image<Scalar>& d_image) {
    GradientBuffer<Scalar> buffer(scene.size());
    backward_render_into(scene, cam, cfg, d_image, buffer);
    return buffer;
}

// ---------------------------------------------------------------------------
// Finite-difference verification

/// Mean squared error over all pixel-channels and its gradient.
template <typename Scalar>
std::pair<Scalar, Image<Scalar>> mse_loss(const Image<Scalar>& rendered, const Image<Scalar>& target) {
    if (rendered.width != target.width || rendered.height != target.height)
        throw Error(ErrorKind::DimensionMismatch, "rendered and target images differ in size");
    const auto count = static_cast<Scalar>(rendered.pixels.size());
    Image<Scalar> grad(rendered.width, rendered.height);
    const auto diff = (rendered.pixels - target.pixels).eval();
    grad.pixels = (Scalar(2) / count) * diff;
    return {diff.square().sum() / count, std::move(grad)};
}

enum class ParamClass { Mean, LogScale, Quat, Opacity, Sh };

inline const char* param_class_name(ParamClass c) {
    switch (c) {
    case ParamClass::Mean: return "mean";
    case ParamClass::LogScale: return "log_scale";
    case ParamClass::Quat: return "quat";
    case ParamClass::Opacity: return "opacity_logit";
    case ParamClass::Sh: return "sh";
    }
    return "?";
}

inline ParamClass param_class_of(int coord) {
    if (coord < 3) return ParamClass::Mean;
    if (coord < 6) return ParamClass::LogScale;
    if (coord < 10) return ParamClass::Quat;
    if (coord < 11) return ParamClass::Opacity;
    return ParamClass::Sh;
}

struct GradCheckClass {
    std::string name;
    double max_rel_error = 0;
    double max_abs_error = 0;
    int coords = 0;
    int failures = 0;
};

struct GradCheckReport {
    std::array<GradCheckClass, 5> classes;
    std::vector<std::string> diagnostics;
    bool passed = false;
};

struct GradCheckOptions {
    double step = 1e-4;
    double tolerance = 1e-3;
    double abs_floor = 1e-8;
    std::uint64_t target_seed = 1;
    // Test hook: scales the analytic mean gradient to prove the checker bites.
    double corrupt_mean_scale = 1.0;
};

/// Render settings that keep finite differences away from the alpha gates:
/// no early termination and a skip threshold far below the difference step.
inline RenderConfig gradient_check_config() {
    RenderConfig cfg;
    cfg.alpha_min = 1e-12;
    cfg.t_stop = 0.0;
    return cfg;
}

/// Compares analytic gradients of MSE(render, random target) against central
/// differences in double precision.
inline GradCheckReport check_gradients(const Scened& scene, const Camera<double>& cam, const RenderConfig& cfg,
                                       const GradCheckOptions& opt = {}) {
    GradCheckReport report;
    for (int c = 0; c < 5; ++c)
        report.classes[std::size_t(c)].name = param_class_name(static_cast<ParamClass>(c));

    if (scene.size() > 64) {
        report.diagnostics.push_back("scene too large: " + std::to_string(scene.size()) + " > 64 Gaussians");
        return report;
    }
    if (!(opt.step >= 1e-8)) {
        report.diagnostics.push_back("step underflow: step " + std::to_string(opt.step) +
                                     " is below 1e-8 and central differences would be dominated by rounding");
        return report;
    }

    Image<double> target(cam.width, cam.height);
    std::mt19937_64 rng(opt.target_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index i = 0; i < target.pixels.size(); ++i)
        target.pixels.data()[i] = unit(rng);

    auto loss_of = [&](const Scened& s) { return mse_loss(render(s, cam, cfg).color, target).first; };

    const auto rendered = render(scene, cam, cfg);
    const auto d_image = mse_loss(rendered.color, target).second;
    auto analytic = backward_render(scene, cam, cfg, d_image);
    for (auto& g : analytic.grads)
        g.mean *= opt.corrupt_mean_scale;

    const int active = 11 + 3 * sh_coeff_count(scene.sh_degree);
    Scened probe = scene;
    for (std::size_t gi = 0; gi < scene.size(); ++gi) {
        std::vector<double*> params;
        probe.gaussians[gi].for_each_param([&](double& v) { params.push_back(&v); });
        std::vector<const double*> grads;
        analytic.grads[gi].for_each_param([&](double& v) { grads.push_back(&v); });

        for (int k = 0; k < active; ++k) {
            double& v = *params[std::size_t(k)];
            const double saved = v;
            v = saved + opt.step;
            const double up = loss_of(probe);
            v = saved - opt.step;
            const double down = loss_of(probe);
            v = saved;

            const double numeric = (up - down) / (2 * opt.step);
            const double exact = *grads[std::size_t(k)];
            const double abs_err = std::abs(numeric - exact);
            const double rel_err = abs_err / std::max({std::abs(numeric), std::abs(exact), 1e-300});
            auto& cls = report.classes[std::size_t(param_class_of(k))];
            ++cls.coords;
            cls.max_abs_error = std::max(cls.max_abs_error, abs_err);
            // Relative error is only meaningful for gradients above the floor.
            if (std::max(std::abs(numeric), std::abs(exact)) > opt.abs_floor)
                cls.max_rel_error = std::max(cls.max_rel_error, rel_err);
            if (abs_err > opt.abs_floor && rel_err >= opt.tolerance)
                ++cls.failures;
        }
    }

    report.passed = true;
    for (const auto& c : report.classes)
        report.passed = report.passed && c.failures == 0;
    return report;
}

/// Seeded well-conditioned scene for gradient checks: distinct depths,
/// footprints of a few pixels and SH colors that stay clear of the clamp.
inline std::pair<Scened, Camera<double>> make_gradient_check_scene(std::uint64_t seed, int count = 8,
                                                                   int size = 16, int sh_degree = 3) {
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

    Camera<double> cam;
    cam.width = cam.height = size;
    cam.fx = cam.fy = size;
    cam.cx = cam.cy = size / 2.0;

    std::vector<double> depths;
    for (int i = 0; i < count; ++i)
        depths.push_back(2.0 + 0.4 * i);
    std::shuffle(depths.begin(), depths.end(), rng);

    Scened scene;
    scene.sh_degree = sh_degree;
    scene.background = {0.1, 0.2, 0.3};
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
        Gaussian3D<double> g;
        const double z = depths[std::size_t(i)];
        const double u = uniform(0.25 * size, 0.75 * size), v = uniform(0.25 * size, 0.75 * size);
        g.mean = {(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z};
        for (int a = 0; a < 3; ++a)
            g.log_scale[a] = std::log(uniform(1.0, 3.0) * z / cam.fx);
        g.quat = {normal(rng), normal(rng), normal(rng), normal(rng)};
        g.quat *= uniform(0.5, 2.0) / g.quat.norm();
        g.opacity_logit = logit(uniform(0.3, 0.8));
        for (int c = 0; c < 3; ++c) {
            g.sh(0, c) = uniform(-0.2, 0.3) / sh::kC0;
            for (int k = 1; k < sh_coeff_count(sh_degree); ++k)
                g.sh(k, c) = uniform(-0.05, 0.05);
        }
        scene.gaussians.push_back(g);
    }
    return {scene, cam};
}

} // namespace gs
