#include "gsplat/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace gs::io {

Camera<double> look_at(const Vec3<double>& eye, const Vec3<double>& target, int width, int height, double focal) {
    const Vec3<double> forward = (target - eye).normalized();
    Vec3<double> up(0, 0, 1);
    if (std::abs(forward.dot(up)) > 0.99)
        up = Vec3<double>(0, 1, 0);
    const Vec3<double> right = forward.cross(up).normalized();
    const Vec3<double> down = forward.cross(right);

    Camera<double> cam;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    cam.fx = cam.fy = focal;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    cam.width = width;
    cam.height = height;
    return cam;
}

namespace {

bool sees_all(const Camera<double>& cam, const Scenef& scene) {
    for (const auto& g : scene.gaussians) {
        const Vec3<double> x = world_to_camera(cam, Vec3<double>(g.mean.cast<double>()));
        if (!(x.z() > cam.near_plane && x.z() < cam.far_plane))
            return false;
        const Vec2<double> p = project_point(cam, x);
        if (p.x() < 0 || p.y() < 0 || p.x() > cam.width || p.y() > cam.height)
            return false;
    }
    return true;
}

} // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.count < 1 || cfg.camera_count < 1)
        throw Error(ErrorKind::Schema, "synthetic scene needs count >= 1 and camera_count >= 1");
    if (cfg.width < 1 || cfg.height < 1)
        throw Error(ErrorKind::Schema, "synthetic image size must be positive");

    std::mt19937_64 rng(cfg.seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticDataset ds;
    ds.truth.sh_degree = 0;
    for (int i = 0; i < cfg.count; ++i) {
        Gaussian3D<float> g;
        g.mean = Vec3<double>(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)).cast<float>();
        for (int a = 0; a < 3; ++a)
            g.log_scale[a] = static_cast<float>(uniform(std::log(0.05), std::log(0.2)));
        Vec4<double> q(normal(rng), normal(rng), normal(rng), normal(rng));
        g.quat = q.normalized().cast<float>();
        g.opacity_logit = static_cast<float>(uniform(logit(0.3), logit(0.9)));
        for (int c = 0; c < 3; ++c)
            g.sh(0, c) = static_cast<float>((uniform(0.1, 0.9) - 0.5) / sh::kC0);
        ds.truth.gaussians.push_back(g);
    }

    ds.manifest.version = 1;
    ds.manifest.scene_unit = 1.0;
    const double focal = cfg.focal_factor * cfg.width;
    for (int c = 0; c < cfg.camera_count; ++c) {
        Camera<double> cam;
        for (int attempt = 0;; ++attempt) {
            const Vec3<double> dir = Vec3<double>(normal(rng), normal(rng), normal(rng)).normalized();
            cam = look_at(cfg.camera_radius * dir, Vec3<double>::Zero(), cfg.width, cfg.height, focal);
            if (sees_all(cam, ds.truth))
                break;
            if (attempt > 10000)
                throw Error(ErrorKind::Schema, "synthetic rig: no camera position sees every Gaussian; "
                                               "increase camera_radius");
        }
        char name[32];
        std::snprintf(name, sizeof name, "images/%04d.ppm", c);
        ds.manifest.frames.push_back(camera_frame(cam, name));
    }

    RenderConfig rcfg;
    rcfg.threads = cfg.threads;
    for (const auto& f : ds.manifest.frames)
        ds.images.push_back(render(ds.truth, frame_camera(f, ds.manifest.scene_unit).cast<float>(), rcfg).color);

    for (const auto& g : ds.truth.gaussians) {
        const Vec3<double> jitter = Vec3<double>(normal(rng), normal(rng), normal(rng)).normalized();
        ds.init_points.positions.push_back(g.mean.cast<double>() + cfg.init_jitter * jitter);
        ds.init_points.colors.push_back(Vec3<double>::Constant(0.5));
    }
    return ds;
}

void write_synthetic(const SyntheticDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    for (std::size_t i = 0; i < ds.images.size(); ++i)
        save_ppm(ds.images[i], dir / ds.manifest.frames[i].image_path);
    write_manifest(ds.manifest, dir / "manifest.json");
    save_ply_points(ds.init_points, dir / "points.ply", PlyFormat::BinaryLittleEndian);
    save_checkpoint(ds.truth, dir / "truth.ckpt");
}

} // namespace gs::io
