#pragma once

#include "gsplat/gradients.hpp"
#include "gsplat/rasterizer.hpp"
#include "gsplat/scene.hpp"
#include "gsplat/scene_io.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gs::train {

struct TrainConfig {
    int iterations = 2000;

    double lr_mean = 1.6e-4;  // multiplied by the scene extent
    double lr_mean_final = 1.6e-6;  // exponential decay target, also extent-scaled
    double lr_log_scale = 5e-3;
    double lr_quat = 1e-3;
    double lr_opacity = 5e-2;
    double lr_sh = 2.5e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    int densify_start = 500;
    int densify_end = 1800;
    int densify_interval = 100;
    double grad_threshold = 5e-6;  // mean |dL/d mean2d| per pixel, loss averaged over pixels and channels
    double scale_threshold = -1;   // world units; <= 0 means 1% of the scene extent
    double prune_opacity = 0.005;
    double split_factor = 1.6;
    bool stochastic_split = false;

    std::vector<std::pair<int, int>> sh_degree_schedule = {{0, 0}};
    std::uint64_t seed = 0;
    Vec3<float> background = Vec3<float>::Zero();
    int eval_interval = 100;

    RenderConfig render;

    /// Throws Error(Schema) naming the first violated invariant.
    void validate() const;
    int max_sh_degree() const;
};

/// Adam moments shaped like the parameters, one row per Gaussian.
struct AdamState {
    std::vector<Gaussian3D<float>> m;
    std::vector<Gaussian3D<float>> v;
    long step = 0;

    explicit AdamState(std::size_t n = 0) { resize(n); }
    std::size_t size() const { return m.size(); }
    void resize(std::size_t n) {
        m.assign(n, Gaussian3D<float>::zero());
        v.assign(n, Gaussian3D<float>::zero());
    }
};

struct LearningRates {
    double mean = 0, log_scale = 0, quat = 0, opacity = 0, sh = 0;
};

inline constexpr float kMinLogScale = -18.420680743952367f;  // log(1e-8)
inline constexpr float kMaxLogScale = 18.420680743952367f;   // log(1e8)

/// Bias-corrected Adam on a flat coordinate range; `step` is the 1-based
/// step index after increment.
void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> m, std::span<float> v,
                 long step, double lr, double beta1, double beta2, double eps);

/// One Adam step over every Gaussian with per-class learning rates, followed
/// by the log-scale clamp. Quaternions stay unnormalized.
void adam_step(Scenef& scene, const GradientBuffer<float>& grads, AdamState& state, const LearningRates& lr,
               double beta1, double beta2, double eps);

/// Mean squared error over pixel-channels and d loss / d rendered.
template <typename Scalar>
std::pair<Scalar, Image<Scalar>> photometric_loss(const Image<Scalar>& rendered, const Image<Scalar>& target) {
    return mse_loss(rendered, target);
}

/// 10 log10(1 / MSE) with values clamped to [0, 1]; capped at 99 dB.
double psnr(const Image<float>& rendered, const Image<float>& target);

struct InitConfig {
    double scene_unit = 1.0;
    int sh_degree = 0;
    double initial_opacity = 0.1;
};

/// One isotropic Gaussian per point, sized by the mean distance to its three
/// nearest neighbours.
Scenef init_from_point_cloud(const io::PointCloud& cloud, const InitConfig& cfg = {});

/// Mean distance to the k nearest neighbours of every point (fewer if the
/// cloud is smaller); 0 for a single point.
std::vector<double> mean_knn_distance(const std::vector<Vec3<double>>& points, int k = 3);

struct DensifyReport {
    int cloned = 0;
    int split = 0;
    int pruned = 0;
    bool skipped = false;
    std::string warning;
};

/// Clone/split by screen-gradient statistics, then prune by opacity. Keeps
/// scene, Adam rows and gradient rows in lockstep; statistics are reset.
/// `rng` is used only when cfg.stochastic_split is set.
DensifyReport densify_and_prune(Scenef& scene, GradientBuffer<float>& grads, AdamState& adam,
                                const TrainConfig& cfg, int iteration, std::mt19937_64* rng = nullptr);

/// Views used for training and for held-out evaluation. Every
/// `holdout_every`-th frame (1-based) is held out; 0 disables holdout.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_views(std::size_t count, int holdout_every);

struct MetricsRecord {
    int iteration = 0;
    double loss = 0;
    double psnr = 0;
    std::size_t gaussian_count = 0;
    double wall_ms = 0;
};

struct TrainInputs {
    std::vector<Camera<float>> cameras;
    std::vector<Image<float>> images;
    std::vector<std::size_t> train_views;
    std::vector<std::size_t> eval_views;
};

struct TrainResult {
    Scenef scene;
    std::vector<MetricsRecord> log;
    DensifyReport totals;
};

/// Bounding-box diagonal of the Gaussian means.
double scene_extent(const Scenef& scene);

TrainResult train(Scenef initial, const TrainInputs& inputs, TrainConfig cfg);

/// Header line plus one comma-separated record per entry; wall_ms is written
/// as 0 unless include_timing is set, so logs stay reproducible.
std::string format_metrics(const std::vector<MetricsRecord>& log, bool include_timing);

/// Per-view PSNR of the rendered scene against the given targets.
std::vector<double> evaluate_views(const Scenef& scene, const TrainInputs& inputs,
                                   const std::vector<std::size_t>& views, const RenderConfig& cfg);

} // namespace gs::train
