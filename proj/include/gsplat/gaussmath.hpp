#pragma once

#include "gsplat/common.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace gs {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = (kMaxShDegree + 1) * (kMaxShDegree + 1);
inline constexpr double kQuatNormFloor = 1e-12;
inline constexpr double kCov2dDetFloor = 1e-12;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
Scalar logit(Scalar p) {
    return std::log(p / (Scalar(1) - p));
}

/// One scene primitive. Scales are stored as log standard deviations and the
/// quaternion (w, x, y, z) is stored raw; both are mapped at the point of use.
template <typename Scalar>
struct Gaussian3D {
    using ShCoeffs = Eigen::Matrix<Scalar, kMaxShCoeffs, 3>;

    Vec3<Scalar> mean = Vec3<Scalar>::Zero();
    Vec3<Scalar> log_scale = Vec3<Scalar>::Zero();
    Vec4<Scalar> quat = Vec4<Scalar>(1, 0, 0, 0);
    Scalar opacity_logit = 0;
    // Row k holds the RGB coefficients of basis function k; rows past the
    // active degree are kept at zero.
    ShCoeffs sh = ShCoeffs::Zero();

    static Gaussian3D zero() {
        Gaussian3D g;
        g.quat.setZero();
        return g;
    }

    template <typename Other>
    Gaussian3D<Other> cast() const {
        Gaussian3D<Other> out;
        out.mean = mean.template cast<Other>();
        out.log_scale = log_scale.template cast<Other>();
        out.quat = quat.template cast<Other>();
        out.opacity_logit = static_cast<Other>(opacity_logit);
        out.sh = sh.template cast<Other>();
        return out;
    }

    // Parameter-space vector view, used by the optimizer and gradient checks.
    static constexpr int kParamCount = 3 + 3 + 4 + 1 + kMaxShCoeffs * 3;

    template <typename Fn>
    void for_each_param(Fn&& fn) {
        for (int i = 0; i < 3; ++i) fn(mean[i]);
        for (int i = 0; i < 3; ++i) fn(log_scale[i]);
        for (int i = 0; i < 4; ++i) fn(quat[i]);
        fn(opacity_logit);
        for (int k = 0; k < kMaxShCoeffs; ++k)
            for (int c = 0; c < 3; ++c) fn(sh(k, c));
    }
};

/// Pinhole camera; camera space is +x right, +y down, +z forward.
template <typename Scalar>
struct Camera {
    Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
    Vec3<Scalar> translation = Vec3<Scalar>::Zero();
    Scalar fx = 1, fy = 1, cx = 0, cy = 0;
    int width = 0, height = 0;
    Scalar near_plane = Scalar(0.01);
    Scalar far_plane = Scalar(100);

    Vec3<Scalar> center() const { return -rotation.transpose() * translation; }

    template <typename Other>
    Camera<Other> cast() const {
        Camera<Other> out;
        out.rotation = rotation.template cast<Other>();
        out.translation = translation.template cast<Other>();
        out.fx = Other(fx);
        out.fy = Other(fy);
        out.cx = Other(cx);
        out.cy = Other(cy);
        out.width = width;
        out.height = height;
        out.near_plane = Other(near_plane);
        out.far_plane = Other(far_plane);
        return out;
    }

    /// Pose with R^T, -R^T t.
    Camera inverse_pose() const {
        Camera out = *this;
        out.rotation = rotation.transpose();
        out.translation = -rotation.transpose() * translation;
        return out;
    }
};

/// Checks the rotation block for orthonormality and a positive determinant.
template <typename Scalar>
bool is_rotation(const Mat3<Scalar>& r, double tolerance) {
    const double ortho = (r * r.transpose() - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff();
    const double det = r.determinant();
    return ortho < tolerance && std::abs(det - 1.0) < tolerance;
}

/// A Gaussian projected into one view.
template <typename Scalar>
struct Splat2D {
    Vec2<Scalar> mean2d = Vec2<Scalar>::Zero();
    Mat2<Scalar> cov2d = Mat2<Scalar>::Identity();
    Mat2<Scalar> inv_cov2d = Mat2<Scalar>::Identity();
    Scalar depth = 1;
    Vec3<Scalar> rgb = Vec3<Scalar>::Zero();
    Scalar opacity = 0;
    int source_index = 0;
};

// ---------------------------------------------------------------------------
// Rotation and covariance

/// Rotation matrix of a unit quaternion (w, x, y, z).
template <typename Scalar>
Mat3<Scalar> quat_to_rotation(const Vec4<Scalar>& q) {
    const Scalar w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3<Scalar> r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

template <typename Scalar>
Vec4<Scalar> normalized_quat(const Vec4<Scalar>& q) {
    const Scalar n = q.norm();
    if (!(n > Scalar(kQuatNormFloor)))
        throw Error(ErrorKind::DegenerateQuaternion, "quaternion norm below 1e-12");
    return q / n;
}

/// Sigma = R diag(exp(log_scale))^2 R^T.
template <typename Scalar>
Mat3<Scalar> build_covariance(const Vec3<Scalar>& log_scale, const Vec4<Scalar>& quat) {
    const Mat3<Scalar> r = quat_to_rotation(normalized_quat(quat));
    const Mat3<Scalar> m = r * log_scale.array().exp().matrix().asDiagonal();
    const Mat3<Scalar> c = m * m.transpose();
    return Scalar(0.5) * (c + c.transpose());
}

/// Unnormalized 3D Gaussian density at x.
template <typename Scalar>
Scalar eval_gaussian3(const Vec3<Scalar>& mean, const Mat3<Scalar>& cov, const Vec3<Scalar>& x) {
    Eigen::LDLT<Mat3<Scalar>> ldlt(cov);
    if (!(cov.determinant() > 0) || ldlt.info() != Eigen::Success)
        throw Error(ErrorKind::SingularCovariance, "covariance is singular");
    const Vec3<Scalar> d = x - mean;
    const Scalar power = Scalar(-0.5) * d.dot(ldlt.solve(d));
    return std::exp(std::min(power, Scalar(0)));
}

// ---------------------------------------------------------------------------
// Camera model

template <typename Scalar>
Vec3<Scalar> world_to_camera(const Camera<Scalar>& cam, const Vec3<Scalar>& x_world) {
    return cam.rotation * x_world + cam.translation;
}

template <typename Scalar>
Vec2<Scalar> project_point(const Camera<Scalar>& cam, const Vec3<Scalar>& x_cam) {
    if (!(x_cam.z() > 0))
        throw Error(ErrorKind::BehindCamera, "point is behind the camera");
    return {cam.fx * x_cam.x() / x_cam.z() + cam.cx, cam.fy * x_cam.y() / x_cam.z() + cam.cy};
}

/// Jacobian of the pinhole projection at a camera-space point.
template <typename Scalar>
Mat23<Scalar> projection_jacobian(const Camera<Scalar>& cam, const Vec3<Scalar>& x_cam) {
    if (!(x_cam.z() > 0))
        throw Error(ErrorKind::BehindCamera, "point is behind the camera");
    const Scalar iz = Scalar(1) / x_cam.z();
    Mat23<Scalar> j;
    j << cam.fx * iz, 0, -cam.fx * x_cam.x() * iz * iz,
         0, cam.fy * iz, -cam.fy * x_cam.y() * iz * iz;
    return j;
}

// ---------------------------------------------------------------------------
// Spherical harmonics

namespace sh {

inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr std::array<double, 5> kC2 = {1.0925484305920792, -1.0925484305920792,
                                              0.31539156525252005, -1.0925484305920792,
                                              0.5462742152960396};
inline constexpr std::array<double, 7> kC3 = {-0.5900435899266435, 2.890611442640554,
                                              -0.4570457994644658, 0.3731763325901154,
                                              -0.4570457994644658, 1.445305721320277,
                                              -0.5900435899266435};

/// Real SH basis values for a unit direction, up to `degree`; unused entries are zero.
template <typename Scalar>
Eigen::Matrix<Scalar, kMaxShCoeffs, 1> basis(const Vec3<Scalar>& dir, int degree) {
    Eigen::Matrix<Scalar, kMaxShCoeffs, 1> y = Eigen::Matrix<Scalar, kMaxShCoeffs, 1>::Zero();
    const Scalar x = dir.x(), yy_ = dir.y(), z = dir.z();
    y[0] = Scalar(kC0);
    if (degree < 1)
        return y;
    y[1] = Scalar(-kC1) * yy_;
    y[2] = Scalar(kC1) * z;
    y[3] = Scalar(-kC1) * x;
    if (degree < 2)
        return y;
    const Scalar xx = x * x, yy = yy_ * yy_, zz = z * z;
    const Scalar xy = x * yy_, yz = yy_ * z, xz = x * z;
    y[4] = Scalar(kC2[0]) * xy;
    y[5] = Scalar(kC2[1]) * yz;
    y[6] = Scalar(kC2[2]) * (2 * zz - xx - yy);
    y[7] = Scalar(kC2[3]) * xz;
    y[8] = Scalar(kC2[4]) * (xx - yy);
    if (degree < 3)
        return y;
    y[9] = Scalar(kC3[0]) * yy_ * (3 * xx - yy);
    y[10] = Scalar(kC3[1]) * xy * z;
    y[11] = Scalar(kC3[2]) * yy_ * (4 * zz - xx - yy);
    y[12] = Scalar(kC3[3]) * z * (2 * zz - 3 * xx - 3 * yy);
    y[13] = Scalar(kC3[4]) * x * (4 * zz - xx - yy);
    y[14] = Scalar(kC3[5]) * z * (xx - yy);
    y[15] = Scalar(kC3[6]) * x * (xx - 3 * yy);
    return y;
}

/// d basis / d dir; row k is the gradient of basis function k.
template <typename Scalar>
Eigen::Matrix<Scalar, kMaxShCoeffs, 3> basis_gradient(const Vec3<Scalar>& dir, int degree) {
    Eigen::Matrix<Scalar, kMaxShCoeffs, 3> g = Eigen::Matrix<Scalar, kMaxShCoeffs, 3>::Zero();
    if (degree < 1)
        return g;
    const Scalar x = dir.x(), y = dir.y(), z = dir.z();
    const Scalar c1 = Scalar(kC1);
    g.row(1) << 0, -c1, 0;
    g.row(2) << 0, 0, c1;
    g.row(3) << -c1, 0, 0;
    if (degree < 2)
        return g;
    const Scalar xx = x * x, yy = y * y, zz = z * z;
    g.row(4) = Scalar(kC2[0]) * Vec3<Scalar>(y, x, 0);
    g.row(5) = Scalar(kC2[1]) * Vec3<Scalar>(0, z, y);
    g.row(6) = Scalar(kC2[2]) * Vec3<Scalar>(-2 * x, -2 * y, 4 * z);
    g.row(7) = Scalar(kC2[3]) * Vec3<Scalar>(z, 0, x);
    g.row(8) = Scalar(kC2[4]) * Vec3<Scalar>(2 * x, -2 * y, 0);
    if (degree < 3)
        return g;
    g.row(9) = Scalar(kC3[0]) * Vec3<Scalar>(6 * x * y, 3 * xx - 3 * yy, 0);
    g.row(10) = Scalar(kC3[1]) * Vec3<Scalar>(y * z, x * z, x * y);
    g.row(11) = Scalar(kC3[2]) * Vec3<Scalar>(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
    g.row(12) = Scalar(kC3[3]) * Vec3<Scalar>(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
    g.row(13) = Scalar(kC3[4]) * Vec3<Scalar>(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
    g.row(14) = Scalar(kC3[5]) * Vec3<Scalar>(2 * x * z, -2 * y * z, xx - yy);
    g.row(15) = Scalar(kC3[6]) * Vec3<Scalar>(3 * xx - 3 * yy, -6 * x * y, 0);
    return g;
}

} // namespace sh

/// View-dependent color: SH expansion plus a 0.5 offset, clamped below at zero.
template <typename Scalar>
Vec3<Scalar> eval_sh(const typename Gaussian3D<Scalar>::ShCoeffs& coeffs, int degree,
                     const Vec3<Scalar>& dir) {
    if (degree < 0 || degree > kMaxShDegree)
        throw Error(ErrorKind::UnsupportedDegree, "spherical harmonics degree must be in [0, 3]");
    const auto y = sh::basis(dir, degree);
    const int n = sh_coeff_count(degree);
    Vec3<Scalar> rgb = coeffs.topRows(n).transpose() * y.head(n);
    return (rgb.array() + Scalar(0.5)).cwiseMax(Scalar(0)).matrix();
}

// ---------------------------------------------------------------------------
// Splatting

/// Per-splat intermediates kept for the backward pass.
template <typename Scalar>
struct SplatIntermediates {
    Vec3<Scalar> x_cam;
    Mat23<Scalar> jacobian;
    Mat3<Scalar> rotation;          // from the normalized quaternion
    Vec3<Scalar> scale;             // exp(log_scale)
    Mat3<Scalar> cov_cam;           // R_w Sigma R_w^T
    Vec3<Scalar> view_dir;          // unit, camera center -> mean
    Scalar view_dist = 1;
    Eigen::Array<bool, 3, 1> rgb_clamped = Eigen::Array<bool, 3, 1>::Constant(false);
};

/// Projects one Gaussian; returns nullopt when it is outside (near, far) or its
/// 2D covariance falls below the determinant floor.
template <typename Scalar>
std::optional<Splat2D<Scalar>> try_splat(const Gaussian3D<Scalar>& g, const Camera<Scalar>& cam,
                                         int sh_degree, Scalar dilation, bool euclidean_depth = false,
                                         SplatIntermediates<Scalar>* inter = nullptr) {
    const Vec3<Scalar> x_cam = world_to_camera(cam, g.mean);
    if (!(x_cam.z() > cam.near_plane && x_cam.z() < cam.far_plane))
        return std::nullopt;

    const Vec4<Scalar> qn = normalized_quat(g.quat);
    const Mat3<Scalar> rot = quat_to_rotation(qn);
    const Vec3<Scalar> scale = g.log_scale.array().exp().matrix();
    const Mat3<Scalar> l = rot * scale.asDiagonal();
    const Mat3<Scalar> cov_cam = cam.rotation * (l * l.transpose()) * cam.rotation.transpose();
    const Mat23<Scalar> j = projection_jacobian(cam, x_cam);

    Splat2D<Scalar> s;
    s.cov2d = j * cov_cam * j.transpose();
    s.cov2d(0, 0) += dilation;
    s.cov2d(1, 1) += dilation;
    const Scalar det = s.cov2d.determinant();
    if (!(det >= Scalar(kCov2dDetFloor)) || !(s.cov2d.trace() > 0))
        return std::nullopt;
    s.inv_cov2d << s.cov2d(1, 1) / det, -s.cov2d(0, 1) / det, -s.cov2d(1, 0) / det, s.cov2d(0, 0) / det;
    s.mean2d = project_point(cam, x_cam);
    s.depth = euclidean_depth ? x_cam.norm() : x_cam.z();

    const Vec3<Scalar> offset = g.mean - cam.center();
    const Scalar dist = offset.norm();
    const Vec3<Scalar> dir = offset / dist;
    const auto y = sh::basis(dir, sh_degree);
    const int n = sh_coeff_count(sh_degree);
    const Vec3<Scalar> raw = g.sh.topRows(n).transpose() * y.head(n);
    const Eigen::Array<Scalar, 3, 1> shifted = raw.array() + Scalar(0.5);
    s.rgb = shifted.cwiseMax(Scalar(0)).matrix();
    s.opacity = sigmoid(g.opacity_logit);

    if (inter) {
        inter->x_cam = x_cam;
        inter->jacobian = j;
        inter->rotation = rot;
        inter->scale = scale;
        inter->cov_cam = cov_cam;
        inter->view_dir = dir;
        inter->view_dist = dist;
        inter->rgb_clamped = shifted < Scalar(0);
    }
    return s;
}

/// Throwing form of try_splat.
template <typename Scalar>
Splat2D<Scalar> splat_gaussian(const Gaussian3D<Scalar>& g, const Camera<Scalar>& cam, int sh_degree,
                               Scalar dilation) {
    if (sh_degree < 0 || sh_degree > kMaxShDegree)
        throw Error(ErrorKind::UnsupportedDegree, "spherical harmonics degree must be in [0, 3]");
    const Scalar z = world_to_camera(cam, g.mean).z();
    if (!(z > cam.near_plane && z < cam.far_plane))
        throw Error(ErrorKind::OutOfDepthRange, "Gaussian depth outside (near, far)");
    auto s = try_splat(g, cam, sh_degree, dilation);
    if (!s)
        throw Error(ErrorKind::DegenerateSplat, "projected covariance below determinant floor");
    return *s;
}

template <typename Scalar>
Scalar eval_gaussian2(const Splat2D<Scalar>& s, const Vec2<Scalar>& p) {
    const Vec2<Scalar> d = p - s.mean2d;
    const Scalar power = Scalar(-0.5) * d.dot(s.inv_cov2d * d);
    return std::exp(std::min(power, Scalar(0)));
}

/// Largest eigenvalue of a symmetric 2x2 matrix.
template <typename Scalar>
Scalar max_eigenvalue2(const Mat2<Scalar>& m) {
    const Scalar mid = Scalar(0.5) * (m(0, 0) + m(1, 1));
    const Scalar det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    return mid + std::sqrt(std::max(mid * mid - det, Scalar(0)));
}

} // namespace gs
