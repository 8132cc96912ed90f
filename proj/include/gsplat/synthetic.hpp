#pragma once

#include "gsplat/rasterizer.hpp"
#include "gsplat/scene_io.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gs::io {

struct SyntheticConfig {
    std::uint64_t seed = 0;
    int count = 20;
    int camera_count = 40;
    int width = 64;
    int height = 64;
    double camera_radius = 4.0;
    double focal_factor = 1.2;  // fx = fy = focal_factor * width
    double init_jitter = 0.05;  // displacement of each initialization point, world units
    int threads = 1;
};

struct SyntheticDataset {
    Scenef truth;
    DatasetManifest manifest;
    std::vector<Image<float>> images;
    // Ground-truth means perturbed by init_jitter, colored mid-gray.
    PointCloud init_points;
};

/// Camera at `eye` looking at `target`, world +z as the up hint.
Camera<double> look_at(const Vec3<double>& eye, const Vec3<double>& target, int width, int height, double focal);

/// Seeded scene and camera rig. Camera positions are redrawn until every
/// ground-truth mean projects inside the image.
SyntheticDataset generate_synthetic(const SyntheticConfig& cfg);

/// Writes manifest.json, images/NNNN.ppm, points.ply and truth.ckpt into dir.
void write_synthetic(const SyntheticDataset& ds, const std::filesystem::path& dir);

} // namespace gs::io
