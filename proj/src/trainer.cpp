#include "gsplat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace gs::train {

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::Schema, "train config: " + msg); };
    if (iterations < 0)
        fail("iterations must be >= 0");
    if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1))
        fail("adam betas must lie in (0, 1)");
    if (!(adam_eps > 0))
        fail("adam_eps must be positive");
    for (const double lr : {lr_mean, lr_mean_final, lr_log_scale, lr_quat, lr_opacity, lr_sh})
        if (!(lr > 0))
            fail("learning rates must be positive");
    if (densify_start > densify_end)
        fail("need densify_start <= densify_end");
    if (densify_interval <= 0)
        fail("densify_interval must be positive");
    if (!(split_factor > 1))
        fail("split_factor must exceed 1");
    if (!(prune_opacity >= 0 && prune_opacity < 1))
        fail("prune_opacity must lie in [0, 1)");
    if (eval_interval <= 0)
        fail("eval_interval must be positive");
    for (const auto& [it, deg] : sh_degree_schedule)
        if (it < 0 || deg < 0 || deg > kMaxShDegree)
            fail("sh_degree_schedule entries need iteration >= 0 and degree in [0, 3]");
}

int TrainConfig::max_sh_degree() const {
    int d = 0;
    for (const auto& [it, deg] : sh_degree_schedule)
        d = std::max(d, deg);
    return d;
}

// ---------------------------------------------------------------------------
// Adam

void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> m, std::span<float> v,
                 long step, double lr, double beta1, double beta2, double eps) {
    const double bc1 = 1.0 - std::pow(beta1, double(step));
    const double bc2 = 1.0 - std::pow(beta2, double(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double mi = beta1 * m[i] + (1.0 - beta1) * g;
        const double vi = beta2 * v[i] + (1.0 - beta2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        params[i] = static_cast<float>(params[i] - lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
    }
}

namespace {

template <typename Derived>
std::span<float> coords(Eigen::MatrixBase<Derived>& x) {
    return {x.derived().data(), static_cast<std::size_t>(x.size())};
}

template <typename Derived>
std::span<const float> coords(const Eigen::MatrixBase<Derived>& x) {
    return {x.derived().data(), static_cast<std::size_t>(x.size())};
}

} // namespace

void adam_step(Scenef& scene, const GradientBuffer<float>& grads, AdamState& state, const LearningRates& lr,
               double beta1, double beta2, double eps) {
    if (grads.size() != scene.size() || state.size() != scene.size())
        throw Error(ErrorKind::DimensionMismatch, "adam_step: scene, gradient and moment rows differ");
    const long t = ++state.step;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        auto& p = scene.gaussians[i];
        const auto& g = grads.grads[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        adam_update(coords(p.mean), coords(g.mean), coords(m.mean), coords(v.mean), t, lr.mean, beta1, beta2, eps);
        adam_update(coords(p.log_scale), coords(g.log_scale), coords(m.log_scale), coords(v.log_scale), t,
                    lr.log_scale, beta1, beta2, eps);
        adam_update(coords(p.quat), coords(g.quat), coords(m.quat), coords(v.quat), t, lr.quat, beta1, beta2, eps);
        adam_update({&p.opacity_logit, 1}, {&g.opacity_logit, 1}, {&m.opacity_logit, 1}, {&v.opacity_logit, 1}, t,
                    lr.opacity, beta1, beta2, eps);
        adam_update(coords(p.sh), coords(g.sh), coords(m.sh), coords(v.sh), t, lr.sh, beta1, beta2, eps);
        p.log_scale = p.log_scale.cwiseMax(kMinLogScale).cwiseMin(kMaxLogScale);
    }
}

// ---------------------------------------------------------------------------
// Metrics

double psnr(const Image<float>& rendered, const Image<float>& target) {
    if (rendered.width != target.width || rendered.height != target.height)
        throw Error(ErrorKind::DimensionMismatch, "psnr: image sizes differ");
    const auto diff = rendered.pixels.cast<double>().cwiseMax(0.0).cwiseMin(1.0) - target.pixels.cast<double>();
    const double mse = diff.square().mean();
    if (mse < 1e-10)
        return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

// ---------------------------------------------------------------------------
// Initialization

std::vector<double> mean_knn_distance(const std::vector<Vec3<double>>& points, int k) {
    const std::size_t n = points.size();
    std::vector<double> out(n, 0.0);
    if (n < 2)
        return out;
    const std::size_t kk = std::min<std::size_t>(std::size_t(k), n - 1);

    // Sweep outward in x order; stop once the x gap alone exceeds the current
    // k-th best distance.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return points[a].x() < points[b].x() || (points[a].x() == points[b].x() && a < b);
    });
    std::vector<std::size_t> rank(n);
    for (std::size_t r = 0; r < n; ++r)
        rank[order[r]] = r;

    std::vector<double> best;
    for (std::size_t i = 0; i < n; ++i) {
        best.clear();
        const auto& p = points[i];
        auto consider = [&](std::size_t j) {
            const double d2 = (points[j] - p).squaredNorm();
            if (best.size() < kk) {
                best.push_back(d2);
                std::push_heap(best.begin(), best.end());
            } else if (d2 < best.front()) {
                std::pop_heap(best.begin(), best.end());
                best.back() = d2;
                std::push_heap(best.begin(), best.end());
            }
        };
        const std::size_t r = rank[i];
        std::size_t lo = r, hi = r + 1;
        bool go_lo = r > 0, go_hi = hi < n;
        while (go_lo || go_hi) {
            if (go_lo) {
                const std::size_t j = order[lo - 1];
                const double dx = p.x() - points[j].x();
                if (best.size() == kk && dx * dx > best.front()) {
                    go_lo = false;
                } else {
                    consider(j);
                    go_lo = --lo > 0;
                }
            }
            if (go_hi) {
                const std::size_t j = order[hi];
                const double dx = points[j].x() - p.x();
                if (best.size() == kk && dx * dx > best.front()) {
                    go_hi = false;
                } else {
                    consider(j);
                    go_hi = ++hi < n;
                }
            }
        }
        double sum = 0;
        for (const double d2 : best)
            sum += std::sqrt(d2);
        out[i] = sum / double(best.size());
    }
    return out;
}

Scenef init_from_point_cloud(const io::PointCloud& cloud, const InitConfig& cfg) {
    if (cloud.positions.empty())
        throw Error(ErrorKind::EmptyPointCloud, "cannot initialize from an empty point cloud");
    if (cloud.positions.size() != cloud.colors.size())
        throw Error(ErrorKind::DimensionMismatch, "point cloud positions and colors differ in length");
    const auto dist = mean_knn_distance(cloud.positions);
    const double fallback = 0.01 * cfg.scene_unit;

    Scenef scene;
    scene.sh_degree = cfg.sh_degree;
    scene.gaussians.reserve(cloud.positions.size());
    for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
        Gaussian3D<float> g;
        g.mean = cloud.positions[i].cast<float>();
        const double s = dist[i] > 0 ? dist[i] : fallback;
        g.log_scale.setConstant(static_cast<float>(std::log(s)));
        g.quat = {1, 0, 0, 0};
        g.opacity_logit = static_cast<float>(logit(cfg.initial_opacity));
        for (int c = 0; c < 3; ++c)
            g.sh(0, c) = static_cast<float>((cloud.colors[i][c] - 0.5) / sh::kC0);
        scene.gaussians.push_back(g);
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Adaptive density control

DensifyReport densify_and_prune(Scenef& scene, GradientBuffer<float>& grads, AdamState& adam,
                                const TrainConfig& cfg, int iteration, std::mt19937_64* rng) {
    DensifyReport report;
    if (iteration < cfg.densify_start || iteration > cfg.densify_end || iteration % cfg.densify_interval != 0) {
        report.skipped = true;
        report.warning = "densify_and_prune called at iteration " + std::to_string(iteration) +
                         " outside its schedule; no changes made";
        return report;
    }
    if (grads.size() != scene.size() || adam.size() != scene.size())
        throw Error(ErrorKind::DimensionMismatch, "densify_and_prune: scene, gradient and moment rows differ");
    if (!(cfg.scale_threshold > 0))
        throw Error(ErrorKind::Schema, "densify_and_prune: scale_threshold must be resolved to a positive value");

    const std::size_t n = scene.size();
    std::vector<char> remove(n, 0);
    std::vector<Gaussian3D<float>> added;

    for (std::size_t i = 0; i < n; ++i) {
        if (grads.grad2d_count[i] == 0)
            continue;
        const double mean_grad = grads.grad2d_norm_accum[i] / double(grads.grad2d_count[i]);
        if (!(float(mean_grad) > float(cfg.grad_threshold)))
            continue;
        const auto& g = scene.gaussians[i];
        Eigen::Index axis = 0;
        const float max_log_scale = g.log_scale.maxCoeff(&axis);
        const double max_scale = std::exp(double(max_log_scale));
        if (max_scale <= cfg.scale_threshold) {
            added.push_back(g);
            ++report.cloned;
            continue;
        }

        const Mat3<double> rot = quat_to_rotation(normalized_quat(Vec4<double>(g.quat.cast<double>())));
        const Vec3<double> scale = g.log_scale.cast<double>().array().exp().matrix();
        std::array<Vec3<double>, 2> offsets;
        if (cfg.stochastic_split && rng) {
            std::normal_distribution<double> normal(0.0, 1.0);
            for (auto& off : offsets)
                off = rot * Vec3<double>(scale.x() * normal(*rng), scale.y() * normal(*rng), scale.z() * normal(*rng));
        } else {
            const Vec3<double> principal = rot.col(axis) * max_scale;
            offsets = {principal, Vec3<double>(-principal)};
        }
        const float shrink = static_cast<float>(std::log(cfg.split_factor));
        for (const auto& off : offsets) {
            Gaussian3D<float> child = g;
            child.mean = (g.mean.cast<double>() + off).cast<float>();
            child.log_scale.array() -= shrink;
            added.push_back(child);
        }
        remove[i] = 1;
        ++report.split;
    }

    std::vector<Gaussian3D<float>> kept_g, kept_m, kept_v;
    kept_g.reserve(n + added.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (remove[i])
            continue;
        kept_g.push_back(scene.gaussians[i]);
        kept_m.push_back(adam.m[i]);
        kept_v.push_back(adam.v[i]);
    }
    for (const auto& g : added) {
        kept_g.push_back(g);
        kept_m.push_back(Gaussian3D<float>::zero());
        kept_v.push_back(Gaussian3D<float>::zero());
    }

    scene.gaussians.clear();
    adam.m.clear();
    adam.v.clear();
    for (std::size_t i = 0; i < kept_g.size(); ++i) {
        if (sigmoid(double(kept_g[i].opacity_logit)) < cfg.prune_opacity) {
            ++report.pruned;
            continue;
        }
        scene.gaussians.push_back(kept_g[i]);
        adam.m.push_back(kept_m[i]);
        adam.v.push_back(kept_v[i]);
    }
    grads.resize(scene.size());
    return report;
}

// ---------------------------------------------------------------------------
// Training loop

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_views(std::size_t count, int holdout_every) {
    std::vector<std::size_t> train_views, eval_views;
    for (std::size_t i = 0; i < count; ++i) {
        if (holdout_every > 0 && (i + 1) % std::size_t(holdout_every) == 0)
            eval_views.push_back(i);
        else
            train_views.push_back(i);
    }
    return {train_views, eval_views};
}

double scene_extent(const Scenef& scene) {
    if (scene.empty())
        return 0.0;
    Vec3<double> lo = scene.gaussians.front().mean.cast<double>(), hi = lo;
    for (const auto& g : scene.gaussians) {
        lo = lo.cwiseMin(g.mean.cast<double>());
        hi = hi.cwiseMax(g.mean.cast<double>());
    }
    return (hi - lo).norm();
}

std::vector<double> evaluate_views(const Scenef& scene, const TrainInputs& inputs,
                                   const std::vector<std::size_t>& views, const RenderConfig& cfg) {
    std::vector<double> out;
    out.reserve(views.size());
    for (const std::size_t v : views)
        out.push_back(psnr(render(scene, inputs.cameras[v], cfg).color, inputs.images[v]));
    return out;
}

namespace {

int scheduled_degree(const TrainConfig& cfg, int iteration) {
    int degree = 0, best_it = -1;
    for (const auto& [it, deg] : cfg.sh_degree_schedule)
        if (it <= iteration && it >= best_it) {
            best_it = it;
            degree = deg;
        }
    return degree;
}

std::size_t count_non_finite(const Scenef& scene) {
    std::size_t bad = 0;
    for (auto g : scene.gaussians)
        g.for_each_param([&](float& v) { bad += !std::isfinite(v); });
    return bad;
}

} // namespace

TrainResult train(Scenef initial, const TrainInputs& inputs, TrainConfig cfg) {
    cfg.validate();
    if (inputs.cameras.size() != inputs.images.size())
        throw Error(ErrorKind::DimensionMismatch, "train: camera and image counts differ");
    if (inputs.train_views.empty() && cfg.iterations > 0)
        throw Error(ErrorKind::Schema, "train: dataset has no training views");
    for (std::size_t i = 0; i < inputs.cameras.size(); ++i)
        detail::check_image_dims(inputs.cameras[i], inputs.images[i], "target image");

    TrainResult result;
    Scenef& scene = result.scene;
    scene = std::move(initial);
    scene.background = cfg.background;
    scene.sh_degree = scheduled_degree(cfg, 0);

    double extent = scene_extent(scene);
    if (!(extent > 0))
        extent = 1.0;
    if (!(cfg.scale_threshold > 0))
        cfg.scale_threshold = 0.01 * extent;

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order = inputs.train_views;
    std::shuffle(order.begin(), order.end(), rng);
    const auto& eval_views = inputs.eval_views.empty() ? inputs.train_views : inputs.eval_views;

    AdamState adam(scene.size());
    GradientBuffer<float> grads(scene.size());
    const auto start = std::chrono::steady_clock::now();
    double last_loss = 0;

    auto record = [&](int iteration) {
        MetricsRecord r;
        r.iteration = iteration;
        r.loss = last_loss;
        const auto p = evaluate_views(scene, inputs, eval_views, cfg.render);
        r.psnr = p.empty() ? 0.0 : std::accumulate(p.begin(), p.end(), 0.0) / double(p.size());
        r.gaussian_count = scene.size();
        r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(r);
    };

    if (cfg.iterations > 0) {
        const auto& cam = inputs.cameras[order.front()];
        last_loss = photometric_loss(render(scene, cam, cfg.render).color, inputs.images[order.front()]).first;
    }
    record(0);

    for (int it = 0; it < cfg.iterations; ++it) {
        scene.sh_degree = std::max(scene.sh_degree, scheduled_degree(cfg, it));
        const std::size_t view = order[std::size_t(it) % order.size()];
        const auto& cam = inputs.cameras[view];

        grads.zero_params();
        const auto st = detail::rasterize_forward(scene, cam, cfg.render);
        const auto [loss, d_image] = photometric_loss(st.output.color, inputs.images[view]);
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "non-finite loss at iteration " << it << " (view " << view << ", " << scene.size()
                << " Gaussians, " << count_non_finite(scene) << " non-finite parameters)";
            throw Error(ErrorKind::NonFinite, msg.str());
        }
        last_loss = loss;
        backward_from_forward(st, scene, cam, cfg.render, d_image, grads);

        const double progress = cfg.iterations > 1 ? double(it) / double(cfg.iterations - 1) : 0.0;
        LearningRates lr;
        lr.mean = extent * cfg.lr_mean * std::pow(cfg.lr_mean_final / cfg.lr_mean, progress);
        lr.log_scale = cfg.lr_log_scale;
        lr.quat = cfg.lr_quat;
        lr.opacity = cfg.lr_opacity;
        lr.sh = cfg.lr_sh;
        adam_step(scene, grads, adam, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

        const int done = it + 1;
        if (done >= cfg.densify_start && done <= cfg.densify_end && done % cfg.densify_interval == 0) {
            const auto rep = densify_and_prune(scene, grads, adam, cfg, done, &rng);
            result.totals.cloned += rep.cloned;
            result.totals.split += rep.split;
            result.totals.pruned += rep.pruned;
        }
        if (done % cfg.eval_interval == 0 || done == cfg.iterations)
            record(done);
    }
    return result;
}

std::string format_metrics(const std::vector<MetricsRecord>& log, bool include_timing) {
    std::string out = "iter,loss,psnr,gaussian_count,wall_ms\n";
    char line[160];
    for (const auto& r : log) {
        std::snprintf(line, sizeof line, "%d,%.9g,%.6f,%zu,%.3f\n", r.iteration, r.loss, r.psnr, r.gaussian_count,
                      include_timing ? r.wall_ms : 0.0);
        out += line;
    }
    return out;
}

} // namespace gs::train
