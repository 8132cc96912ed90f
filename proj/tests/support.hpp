#pragma once

#include "gsplat/rasterizer.hpp"

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

namespace gs::testing {

template <typename Scalar>
Camera<Scalar> pinhole(int width, int height, Scalar focal) {
    Camera<Scalar> cam;
    cam.fx = cam.fy = focal;
    cam.cx = Scalar(width) / 2;
    cam.cy = Scalar(height) / 2;
    cam.width = width;
    cam.height = height;
    return cam;
}

/// Random scene in front of a pinhole camera at the origin. A few Gaussians
/// land behind the camera or off screen so culling paths are exercised.
template <typename Scalar>
std::pair<SceneModel<Scalar>, Camera<Scalar>> random_scene(std::uint64_t seed, int count, int size,
                                                            int sh_degree = 0) {
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto cam = pinhole<Scalar>(size, size, Scalar(size));
    SceneModel<Scalar> scene;
    scene.sh_degree = sh_degree;
    scene.background = Vec3<Scalar>(Scalar(0.2), Scalar(0.1), Scalar(0.3));
    for (int i = 0; i < count; ++i) {
        Gaussian3D<double> g;
        const double z = uniform(-0.5, 6.0);
        g.mean = Vec3<double>(uniform(-0.7, 0.7) * std::abs(z), uniform(-0.7, 0.7) * std::abs(z), z);
        for (int a = 0; a < 3; ++a)
            g.log_scale[a] = uniform(std::log(0.02), std::log(0.3));
        g.quat = Vec4<double>(normal(rng), normal(rng), normal(rng), normal(rng));
        g.opacity_logit = logit(uniform(0.05, 0.95));
        for (int k = 0; k < sh_coeff_count(sh_degree); ++k)
            for (int c = 0; c < 3; ++c)
                g.sh(k, c) = k == 0 ? uniform(-1.5, 1.5) : uniform(-0.3, 0.3);
        scene.gaussians.push_back(g.cast<Scalar>());
    }
    return {scene, cam};
}

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("gsplat_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace gs::testing
