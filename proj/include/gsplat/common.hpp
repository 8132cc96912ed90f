#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gs {

template <typename Scalar> using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Vec4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar> using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar> using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar> using Mat23 = Eigen::Matrix<Scalar, 2, 3>;

/// Error categories surfaced by the library. The CLI maps them onto exit codes.
enum class ErrorKind {
    DegenerateQuaternion,
    SingularCovariance,
    BehindCamera,
    OutOfDepthRange,
    DegenerateSplat,
    UnsupportedDegree,
    DimensionMismatch,
    EmptyPointCloud,
    NonFinite,
    Io,
    Format,
    Schema,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Dense RGB image, one row per pixel in row-major scan order.
template <typename Scalar>
struct Image {
    using Pixels = Eigen::Array<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

    int width = 0;
    int height = 0;
    Pixels pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(Pixels::Zero(Eigen::Index(w) * h, 3)) {}

    Eigen::Index index(int x, int y) const { return Eigen::Index(y) * width + x; }
    auto at(int x, int y) { return pixels.row(index(x, y)); }
    auto at(int x, int y) const { return pixels.row(index(x, y)); }

    template <typename Other>
    Image<Other> cast() const {
        Image<Other> out;
        out.width = width;
        out.height = height;
        out.pixels = pixels.template cast<Other>();
        return out;
    }
};

} // namespace gs
