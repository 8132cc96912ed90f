#include "gsplat/gaussmath.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>

using namespace gs;

namespace {

Vec4<double> random_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return {n(rng), n(rng), n(rng), n(rng)};
}

Camera<double> test_camera(double f, double c) {
    Camera<double> cam;
    cam.fx = cam.fy = f;
    cam.cx = cam.cy = c;
    cam.width = cam.height = int(2 * c);
    return cam;
}

} // namespace

TEST_CASE("covariance: identity scales and rotation") {
    const Mat3<double> s = build_covariance<double>(Vec3<double>::Zero(), Vec4<double>(1, 0, 0, 0));
    CHECK((s - Mat3<double>::Identity()).norm() < 1e-15);
}

TEST_CASE("covariance: rotation permutes principal axes") {
    const double h = std::sqrt(0.5);
    const Mat3<double> s = build_covariance<double>(Vec3<double>(std::log(2.0), 0, 0), Vec4<double>(h, 0, 0, h));
    const Mat3<double> expected = Vec3<double>(1, 4, 1).asDiagonal();
    CHECK((s - expected).norm() < 1e-12);
}

TEST_CASE("covariance: eigenvalues are squared scales") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 1.0);
    for (int draw = 0; draw < 100; ++draw) {
        const Vec3<double> ls(u(rng), u(rng), u(rng));
        const Mat3<double> s = build_covariance(ls, random_quat(rng));
        Eigen::SelfAdjointEigenSolver<Mat3<double>> eig(s);
        Vec3<double> got = eig.eigenvalues();
        Vec3<double> want = (2.0 * ls.array()).exp().matrix();
        std::sort(got.data(), got.data() + 3);
        std::sort(want.data(), want.data() + 3);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((s - s.transpose()).norm() == 0.0);
    }
}

TEST_CASE("covariance: quaternion scale invariance and degenerate quaternion") {
    const Vec4<double> q(0.3, -0.2, 0.9, 0.1);
    const Vec3<double> ls(0.1, -0.5, 0.3);
    CHECK((build_covariance(ls, q) - build_covariance(ls, Vec4<double>(7.0 * q))).norm() < 1e-12);
    CHECK_THROWS_AS(build_covariance<double>(ls, Vec4<double>::Zero()), Error);
    try {
        normalized_quat<double>(Vec4<double>::Constant(1e-14));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateQuaternion);
    }
}

TEST_CASE("gaussian3: direct evaluation") {
    const Vec3<double> mu(1, 2, 3);
    CHECK(eval_gaussian3<double>(mu, Mat3<double>::Identity(), mu) == 1.0);
    CHECK(eval_gaussian3<double>(mu, Mat3<double>::Identity(), Vec3<double>(mu + Vec3<double>(0, 1, 0))) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    const Mat3<double> cov = Vec3<double>(4, 1, 1).asDiagonal();
    CHECK(eval_gaussian3<double>(mu, cov, Vec3<double>(mu + Vec3<double>(2, 0, 0))) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK_THROWS_AS(eval_gaussian3<double>(mu, Mat3<double>::Zero(), mu), Error);
}

TEST_CASE("camera: world to camera") {
    Camera<double> cam;
    CHECK(world_to_camera<double>(cam, Vec3<double>(1, 2, 3)) == Vec3<double>(1, 2, 3));
    cam.translation = Vec3<double>(0, 0, 5);
    CHECK(world_to_camera<double>(cam, Vec3<double>::Zero()) == Vec3<double>(0, 0, 5));

    std::mt19937_64 rng(3);
    cam.rotation = quat_to_rotation(normalized_quat(random_quat(rng)));
    cam.translation = Vec3<double>(0.3, -1.2, 2.0);
    const Vec3<double> x(0.7, 0.1, -0.4);
    const Vec3<double> back = world_to_camera(cam.inverse_pose(), world_to_camera(cam, x));
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(is_rotation(cam.rotation, 1e-9));
    CHECK_FALSE(is_rotation(Mat3<double>(2.0 * cam.rotation), 1e-4));
}

TEST_CASE("camera: projection") {
    const auto cam = test_camera(100, 50);
    for (double z : {0.5, 2.0, 40.0})
        CHECK(project_point<double>(cam, Vec3<double>(0, 0, z)) == Vec2<double>(50, 50));
    CHECK(project_point<double>(cam, Vec3<double>(1, 0, 2)) == Vec2<double>(100, 50));

    const Vec3<double> x(0.4, -0.3, 1.5);
    const Vec2<double> near = project_point(cam, x) - Vec2<double>(50, 50);
    const Vec2<double> far = project_point<double>(cam, Vec3<double>(x.x(), x.y(), 2 * x.z())) - Vec2<double>(50, 50);
    CHECK((far - 0.5 * near).norm() < 1e-12);
    CHECK_THROWS_AS(project_point<double>(cam, Vec3<double>(0, 0, -1)), Error);
}

TEST_CASE("camera: projection jacobian") {
    const auto cam = test_camera(100, 50);
    Mat23<double> expected;
    expected << 50, 0, 0, 0, 50, 0;
    CHECK((projection_jacobian<double>(cam, Vec3<double>(0, 0, 2)) - expected).norm() == 0.0);

    const Vec3<double> x(0.4, -0.3, 1.5);
    const Mat23<double> j = projection_jacobian(cam, x);
    const double h = 1e-5;
    for (int a = 0; a < 3; ++a) {
        Vec3<double> xp = x, xm = x;
        xp[a] += h;
        xm[a] -= h;
        const Vec2<double> fd = (project_point(cam, xp) - project_point(cam, xm)) / (2 * h);
        CHECK((fd - j.col(a)).cwiseAbs().maxCoeff() < 1e-5);
    }
    CHECK((projection_jacobian<double>(cam, Vec3<double>(2 * x)) - 0.5 * j).norm() < 1e-12);
}

TEST_CASE("splat: on-axis isotropic covariance") {
    const auto cam = test_camera(80, 40);
    for (double z : {1.0, 3.0, 9.0}) {
        Gaussian3D<double> g;
        const double sigma = 0.07;
        g.mean = Vec3<double>(0, 0, z);
        g.log_scale.setConstant(std::log(sigma));
        g.quat = Vec4<double>(0.2, 0.5, -0.1, 0.7);
        const auto s = splat_gaussian(g, cam, 0, 0.3);
        const double v = std::pow(80 * sigma / z, 2) + 0.3;
        CHECK((s.cov2d - v * Mat2<double>::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(s.opacity == 0.5);
        CHECK(s.mean2d == project_point(cam, world_to_camera(cam, g.mean)));
        CHECK((s.inv_cov2d * s.cov2d - Mat2<double>::Identity()).norm() < 1e-12);
    }
}

TEST_CASE("splat: visibility errors") {
    const auto cam = test_camera(80, 40);
    Gaussian3D<double> g;
    g.mean = Vec3<double>(0, 0, -2);
    CHECK_FALSE(try_splat(g, cam, 0, 0.3).has_value());
    CHECK_THROWS_AS(splat_gaussian(g, cam, 0, 0.3), Error);
    g.mean = Vec3<double>(0, 0, 2);
    CHECK_THROWS_AS(splat_gaussian(g, cam, 4, 0.3), Error);
    g.log_scale.setConstant(-40);
    CHECK_FALSE(try_splat(g, cam, 0, 0.0).has_value());
}

TEST_CASE("gaussian2: evaluation and symmetry") {
    Splat2D<double> s;
    s.mean2d = Vec2<double>(3, 4);
    CHECK(eval_gaussian2(s, s.mean2d) == 1.0);
    CHECK(eval_gaussian2<double>(s, Vec2<double>(s.mean2d + Vec2<double>(2, 0))) ==
          doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    s.cov2d << 2.0, 0.7, 0.7, 1.3;
    s.inv_cov2d = s.cov2d.inverse();
    const Vec2<double> d(0.9, -1.4);
    CHECK(eval_gaussian2<double>(s, Vec2<double>(s.mean2d + d)) ==
          doctest::Approx(eval_gaussian2<double>(s, Vec2<double>(s.mean2d - d))).epsilon(1e-14));
    Eigen::SelfAdjointEigenSolver<Mat2<double>> eig(s.cov2d);
    CHECK(max_eigenvalue2(s.cov2d) == doctest::Approx(eig.eigenvalues()[1]).epsilon(1e-12));
}

TEST_CASE("sh: constant and offset terms") {
    Gaussian3D<double>::ShCoeffs c = Gaussian3D<double>::ShCoeffs::Zero();
    CHECK(eval_sh<double>(c, 3, Vec3<double>(0, 0, 1)) == Vec3<double>::Constant(0.5));
    c.row(0) << 0.3, -0.4, 1.0;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 10; ++i) {
        const Vec3<double> dir = random_quat(rng).head<3>().normalized();
        const Vec3<double> rgb = eval_sh<double>(c, 0, dir);
        CHECK(rgb[0] == doctest::Approx(0.3 * 0.2820948 + 0.5).epsilon(1e-6));
        CHECK(rgb[1] == doctest::Approx(-0.4 * 0.2820948 + 0.5).epsilon(1e-6));
        CHECK(rgb[2] == doctest::Approx(1.0 * 0.2820948 + 0.5).epsilon(1e-6));
    }
    CHECK_THROWS_AS(eval_sh<double>(c, 4, Vec3<double>(0, 0, 1)), Error);
}

TEST_CASE("sh: band parity") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int degree = 1; degree <= 3; ++degree) {
        const int lo = degree * degree, hi = sh_coeff_count(degree);
        Gaussian3D<double>::ShCoeffs c = Gaussian3D<double>::ShCoeffs::Zero();
        for (int k = lo; k < hi; ++k)
            for (int ch = 0; ch < 3; ++ch)
                c(k, ch) = u(rng);
        for (int i = 0; i < 20; ++i) {
            const Vec3<double> dir = random_quat(rng).head<3>().normalized();
            const Vec3<double> a = eval_sh<double>(c, degree, dir).array() - 0.5;
            const Vec3<double> b = eval_sh<double>(c, degree, Vec3<double>(-dir)).array() - 0.5;
            // Odd bands flip sign, even bands are symmetric.
            const Vec3<double> residual = degree % 2 ? Vec3<double>(a + b) : Vec3<double>(a - b);
            CHECK(residual.cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("sh: basis gradient matches finite differences") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 10; ++i) {
        const Vec3<double> dir = random_quat(rng).head<3>().normalized();
        const auto g = sh::basis_gradient(dir, 3);
        const double h = 1e-6;
        for (int a = 0; a < 3; ++a) {
            Vec3<double> p = dir, m = dir;
            p[a] += h;
            m[a] -= h;
            const auto fd = ((sh::basis(p, 3) - sh::basis(m, 3)) / (2 * h)).eval();
            CHECK((fd - g.col(a)).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("sh: basis is orthonormal on the sphere") {
    // Monte Carlo estimate of the Gram matrix with 4*pi normalization.
    std::mt19937_64 rng(23);
    Eigen::Matrix<double, 16, 16> gram = Eigen::Matrix<double, 16, 16>::Zero();
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const Vec3<double> dir = random_quat(rng).head<3>().normalized();
        const auto y = sh::basis(dir, 3);
        gram += y * y.transpose();
    }
    gram *= 4 * M_PI / n;
    CHECK((gram - Eigen::Matrix<double, 16, 16>::Identity()).cwiseAbs().maxCoeff() < 0.03);
}
