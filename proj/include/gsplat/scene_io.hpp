#pragma once

#include "gsplat/gaussmath.hpp"
#include "gsplat/scene.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gs::io {

// ---------------------------------------------------------------------------
// Color transfer

float srgb_to_linear(float v);
float linear_to_srgb(float v);
/// 8-bit sRGB code -> linear float, table driven.
float decode_srgb8(std::uint8_t code);
/// Linear float -> 8-bit sRGB code, clamping to [0, 1] first.
std::uint8_t encode_srgb8(float linear);

// ---------------------------------------------------------------------------
// PPM (P6, maxval 255)

struct Rgb8Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bytes;  // width * height * 3
};

Rgb8Image read_ppm_bytes(const std::filesystem::path& path);
void write_ppm_bytes(const Rgb8Image& img, const std::filesystem::path& path);

Image<float> load_ppm(const std::filesystem::path& path);
void save_ppm(const Image<float>& img, const std::filesystem::path& path);
Rgb8Image encode_image(const Image<float>& img);
Image<float> decode_image(const Rgb8Image& img);

// ---------------------------------------------------------------------------
// Dataset manifest

struct Frame {
    std::string image_path;  // relative to the manifest directory; empty for pose files
    Eigen::Matrix4d world_to_cam = Eigen::Matrix4d::Identity();
    double fx = 1, fy = 1, cx = 0, cy = 0;
    int width = 0, height = 0;

    bool operator==(const Frame&) const = default;
};

struct DatasetManifest {
    int version = 1;
    double scene_unit = 1.0;
    std::vector<Frame> frames;

    bool operator==(const DatasetManifest&) const = default;
};

inline constexpr double kRotationTolerance = 1e-4;

/// Camera for a frame. Near/far default to 0.01 and 100 scene units.
Camera<double> frame_camera(const Frame& f, double scene_unit = 1.0);
Frame camera_frame(const Camera<double>& cam, std::string image_path = {});

/// Parses and validates a manifest; does not touch the images.
DatasetManifest parse_manifest(const std::string& text, const std::string& origin = "manifest");
DatasetManifest read_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& m);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

struct Dataset {
    DatasetManifest manifest;
    std::filesystem::path root;
    std::vector<Camera<float>> cameras;
    std::vector<Image<float>> images;  // linear RGB
};

/// Manifest plus decoded images, each checked against the frame size.
Dataset load_manifest(const std::filesystem::path& path);

/// A single-frame pose file, or a manifest whose first frame is used.
Camera<double> load_pose_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// PLY point clouds

struct PointCloud {
    std::vector<Vec3<double>> positions;
    std::vector<Vec3<double>> colors;  // [0, 1]
};

enum class PlyFormat { Ascii, BinaryLittleEndian };

PointCloud load_ply_points(const std::filesystem::path& path);
/// Writes float32 positions and uchar colors.
void save_ply_points(const PointCloud& cloud, const std::filesystem::path& path, PlyFormat format);

// ---------------------------------------------------------------------------
// GSPLAT01 checkpoint and the 32-byte splat export

inline constexpr char kCheckpointMagic[8] = {'G', 'S', 'P', 'L', 'A', 'T', '0', '1'};

std::vector<std::uint8_t> encode_checkpoint(const Scenef& scene);
Scenef decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Scenef& scene, const std::filesystem::path& path);
Scenef load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_splat(const Scenef& scene);
void export_splat(const Scenef& scene, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// File helpers

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Write-to-temp then rename, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

} // namespace gs::io
