#pragma once

// Slow reference renderers used to cross-check the tiled rasterizer.

#include "gsplat/rasterizer.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <utility>

namespace gs::oracle {

struct QuadratureConfig {
    double t_near = 0.01;
    double t_far = 100.0;
    int samples = 256;
    bool stratified = false;
    std::uint64_t seed = 0;
    // Multiplies the mixture density; lets a test convert opacity into a
    // physical absorption amplitude.
    double density_scale = 1.0;
    double eps_div = 1e-12;
    int threads = 1;

    void validate() const {
        if (!(t_near < t_far))
            throw Error(ErrorKind::Schema, "quadrature requires t_near < t_far");
        if (samples < 1)
            throw Error(ErrorKind::Schema, "quadrature requires at least one sample");
    }
};

struct DensityEmission {
    double sigma = 0;
    Vec3<double> emission = Vec3<double>::Zero();
};

/// The Gaussian mixture as continuous density and emission fields.
class MixtureField {
public:
    explicit MixtureField(const Scened& scene, double density_scale = 1.0) : scene_(&scene) {
        terms_.reserve(scene.size());
        for (const auto& g : scene.gaussians) {
            const Mat3<double> cov = build_covariance(g.log_scale, g.quat);
            terms_.push_back({g.mean, cov.inverse(), density_scale * sigmoid(g.opacity_logit)});
        }
    }

    /// Per-Gaussian colors for one viewing direction.
    std::vector<Vec3<double>> colors_for(const Vec3<double>& dir) const {
        std::vector<Vec3<double>> colors;
        colors.reserve(terms_.size());
        for (const auto& g : scene_->gaussians)
            colors.push_back(eval_sh<double>(g.sh, scene_->sh_degree, dir));
        return colors;
    }

    DensityEmission at(const Vec3<double>& x, const std::vector<Vec3<double>>& colors) const {
        DensityEmission out;
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            const auto& t = terms_[i];
            const Vec3<double> d = x - t.mean;
            const double w = t.amplitude * std::exp(-0.5 * d.dot(t.inv_cov * d));
            out.sigma += w;
            out.emission += w * colors[i];
        }
        return out;
    }

private:
    struct Term {
        Vec3<double> mean;
        Mat3<double> inv_cov;
        double amplitude;
    };
    const Scened* scene_;
    std::vector<Term> terms_;
};

/// sigma(x) = sum_i o_i G_i(x); emission(x) = sum_i c_i(dir) o_i G_i(x).
inline DensityEmission mixture_density_emission(const Scened& scene, const Vec3<double>& x,
                                                const Vec3<double>& dir) {
    MixtureField field(scene);
    return field.at(x, field.colors_for(dir));
}

struct RayResult {
    Vec3<double> rgb = Vec3<double>::Zero();
    double transmittance = 1;
};

/// Piecewise-constant quadrature of the emission-absorption integral over
/// uniform bins in [t_near, t_far]. `field(x)` returns the density and the
/// emission (density-weighted color) at x.
template <typename Field>
RayResult integrate_ray(Field&& field, const Vec3<double>& origin, const Vec3<double>& dir,
                        const QuadratureConfig& q, const Vec3<double>& background, std::mt19937_64* jitter = nullptr) {
    const double delta = (q.t_far - q.t_near) / q.samples;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RayResult r;
    for (int k = 0; k < q.samples; ++k) {
        const double u = jitter ? unit(*jitter) : 0.5;
        const double t = q.t_near + (k + u) * delta;
        const DensityEmission de = field(Vec3<double>(origin + t * dir));
        if (de.sigma <= 0)
            continue;
        const Vec3<double> color = de.emission / std::max(de.sigma, q.eps_div);
        const double absorbed = 1.0 - std::exp(-de.sigma * delta);
        r.rgb += r.transmittance * absorbed * color;
        r.transmittance *= 1.0 - absorbed;
    }
    r.rgb += r.transmittance * background;
    return r;
}

struct QuadratureOutput {
    Image<double> color;
    Eigen::ArrayXd final_transmittance;
};

/// World-space unit ray through a pixel center.
inline std::pair<Vec3<double>, Vec3<double>> pixel_ray(const Camera<double>& cam, int x, int y) {
    const Vec3<double> d_cam((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0);
    return {cam.center(), (cam.rotation.transpose() * d_cam).normalized()};
}

/// Quadrature render of an arbitrary field. `make_field(dir)` returns a
/// callable x -> DensityEmission for rays with direction dir.
template <typename MakeField>
QuadratureOutput render_field(MakeField&& make_field, const Camera<double>& cam, const QuadratureConfig& q,
                              const Vec3<double>& background) {
    q.validate();
    QuadratureOutput out{Image<double>(cam.width, cam.height), Eigen::ArrayXd(Eigen::Index(cam.width) * cam.height)};
    parallel_for(std::size_t(cam.height), q.threads, [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < cam.width; ++x) {
            const auto [origin, dir] = pixel_ray(cam, x, y);
            const auto i = out.color.index(x, y);
            std::mt19937_64 rng(q.seed * 0x9E3779B97F4A7C15ULL + std::uint64_t(i));
            auto field = make_field(dir);
            const auto r = integrate_ray(field, origin, dir, q, background, q.stratified ? &rng : nullptr);
            out.color.pixels.row(i) = r.rgb.transpose().array();
            out.final_transmittance[i] = r.transmittance;
        }
    });
    return out;
}

/// Volume rendering of the Gaussian mixture by numerical quadrature.
inline QuadratureOutput render_quadrature(const Scened& scene, const Camera<double>& cam, const QuadratureConfig& q) {
    const MixtureField mixture(scene, q.density_scale);
    return render_field(
        [&](const Vec3<double>& dir) {
            return [&mixture, colors = mixture.colors_for(dir)](const Vec3<double>& x) { return mixture.at(x, colors); };
        },
        cam, q, scene.background);
}

/// Splatting without tiles or image culling: every projectable splat is
/// composited at every pixel in global depth order.
template <typename Scalar>
RenderOutput<Scalar> render_bruteforce(const SceneModel<Scalar>& scene, const Camera<Scalar>& cam,
                                       const RenderConfig& cfg = {}) {
    const auto projected = project_scene(scene, cam, cfg, false);
    const auto order = depth_order(projected.splats);

    RenderOutput<Scalar> out;
    out.color = Image<Scalar>(cam.width, cam.height);
    out.final_transmittance.resize(Eigen::Index(cam.width) * cam.height);
    out.per_pixel_count.resize(Eigen::Index(cam.width) * cam.height);
    out.degenerate_culled = projected.degenerate;
    parallel_for(std::size_t(cam.height), cfg.threads, [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < cam.width; ++x) {
            const auto r = composite_ordered<Scalar>(order, projected.splats, pixel_center<Scalar>(x, y),
                                                     scene.background, cfg);
            const auto i = out.color.index(x, y);
            out.color.pixels.row(i) = r.rgb.transpose().array();
            out.final_transmittance[i] = r.transmittance;
            out.per_pixel_count[i] = r.count;
        }
    });
    return out;
}

} // namespace gs::oracle
