#include "gsplat/gradients.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace gs;
using gs::testing::pinhole;

namespace {

bool all_zero(const Gaussian3D<double>& g) {
    bool zero = true;
    Gaussian3D<double> copy = g;
    copy.for_each_param([&](double& v) { zero = zero && v == 0.0; });
    return zero;
}

Image<double> constant_image(int w, int h, double v) {
    Image<double> img(w, h);
    img.pixels.setConstant(v);
    return img;
}

} // namespace

TEST_CASE("backward: zero cotangent gives zero gradients") {
    const auto [scene, cam] = make_gradient_check_scene(3);
    const auto buf = backward_render(scene, cam, RenderConfig{}, constant_image(cam.width, cam.height, 0.0));
    for (const auto& g : buf.grads)
        CHECK(all_zero(g));
}

TEST_CASE("backward: four-Gaussian scene passes the finite-difference check") {
    const auto [scene, cam] = make_gradient_check_scene(21, 4);
    const auto report = check_gradients(scene, cam, gradient_check_config());
    CHECK(report.passed);
    CHECK(report.diagnostics.empty());
    for (const auto& c : report.classes) {
        CHECK(c.coords > 0);
        CHECK(c.max_rel_error < 1e-3);
    }
}

TEST_CASE("backward: every SH degree passes") {
    for (int degree = 0; degree <= 3; ++degree) {
        const auto [scene, cam] = make_gradient_check_scene(30 + std::uint64_t(degree), 5, 16, degree);
        CHECK(check_gradients(scene, cam, gradient_check_config()).passed);
    }
}

TEST_CASE("backward: checker detects a corrupted mean gradient") {
    const auto [scene, cam] = make_gradient_check_scene(21, 4);
    GradCheckOptions opt;
    opt.corrupt_mean_scale = 2.0;
    const auto report = check_gradients(scene, cam, gradient_check_config(), opt);
    CHECK_FALSE(report.passed);
    CHECK(report.classes[0].failures > 0);
    CHECK(report.classes[1].failures == 0);
}

TEST_CASE("backward: step underflow is diagnosed") {
    const auto [scene, cam] = make_gradient_check_scene(21, 4);
    GradCheckOptions opt;
    opt.step = 1e-12;
    const auto report = check_gradients(scene, cam, gradient_check_config(), opt);
    CHECK_FALSE(report.passed);
    REQUIRE(report.diagnostics.size() == 1);
    CHECK(report.diagnostics[0].find("step underflow") != std::string::npos);
}

TEST_CASE("backward: opacity gradient sign") {
    Scened scene;
    Gaussian3D<double> g;
    g.mean = Vec3<double>(0, 0, 3);
    g.log_scale.setConstant(std::log(0.3));
    g.sh.row(0).setConstant(0.5 / sh::kC0);
    scene.gaussians.push_back(g);
    scene.background.setZero();
    const auto cam = pinhole<double>(16, 16, 16.0);
    const auto buf = backward_render(scene, cam, RenderConfig{}, constant_image(16, 16, 1.0));
    CHECK(buf.grads[0].opacity_logit > 0);
}

TEST_CASE("backward: quaternion gradient is tangent to the norm sphere") {
    const auto [scene, cam] = make_gradient_check_scene(5);
    const auto target = constant_image(cam.width, cam.height, 0.4);
    const auto d_image = mse_loss(render(scene, cam).color, target).second;
    const auto buf = backward_render(scene, cam, RenderConfig{}, d_image);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const double radial = scene.gaussians[i].quat.dot(buf.grads[i].quat);
        CHECK(std::abs(radial) <= 1e-12 * (1.0 + buf.grads[i].quat.norm()));
    }
}

TEST_CASE("backward: culled Gaussians get exactly zero gradient") {
    auto [scene, cam] = make_gradient_check_scene(8, 4);
    Gaussian3D<double> behind = scene.gaussians[0];
    behind.mean.z() = -2.0;
    Gaussian3D<double> off_screen = scene.gaussians[1];
    off_screen.mean.x() = 100.0;
    scene.gaussians.push_back(behind);
    scene.gaussians.push_back(off_screen);
    const auto buf = backward_render(scene, cam, RenderConfig{}, constant_image(cam.width, cam.height, 1.0));
    CHECK(all_zero(buf.grads[4]));
    CHECK(all_zero(buf.grads[5]));
    CHECK(buf.grad2d_count[4] == 0);
    CHECK(buf.grad2d_count[0] == 1);
}

TEST_CASE("backward: thread count does not change bits") {
    const auto [scene, cam] = make_gradient_check_scene(12, 8, 40, 2);
    const auto d_image = mse_loss(render(scene, cam).color, constant_image(cam.width, cam.height, 0.3)).second;
    RenderConfig one, many;
    many.threads = 8;
    many.tile_size = one.tile_size = 8;
    const auto a = backward_render(scene, cam, one, d_image);
    const auto b = backward_render(scene, cam, many, d_image);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        Gaussian3D<double> x = a.grads[i], y = b.grads[i];
        std::vector<double> vx, vy;
        x.for_each_param([&](double& v) { vx.push_back(v); });
        y.for_each_param([&](double& v) { vy.push_back(v); });
        CHECK(vx == vy);
        CHECK(a.grad2d_norm_accum[i] == b.grad2d_norm_accum[i]);
    }
}

TEST_CASE("backward: buffer and image shape errors") {
    const auto [scene, cam] = make_gradient_check_scene(1, 3);
    GradientBuffer<double> wrong(2);
    CHECK_THROWS_AS(backward_render_into(scene, cam, RenderConfig{}, constant_image(16, 16, 1.0), wrong), Error);
    CHECK_THROWS_AS(backward_render(scene, cam, RenderConfig{}, constant_image(8, 16, 1.0)), Error);
}

TEST_CASE("checker: oversized scene is refused with a diagnostic") {
    const auto [scene, cam] = make_gradient_check_scene(1, 65);
    const auto report = check_gradients(scene, cam, gradient_check_config());
    CHECK_FALSE(report.passed);
    CHECK(report.diagnostics.size() == 1);
}

TEST_CASE("loss: values and finite-difference gradient") {
    const auto a = constant_image(4, 3, 0.7);
    CHECK(mse_loss(a, a).first == 0.0);
    CHECK(mse_loss(a, constant_image(4, 3, 0.2)).first == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(mse_loss(a, constant_image(3, 4, 0.2)), Error);

    Image<double> r(5, 4), t(5, 4);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < r.pixels.size(); ++i) {
        r.pixels.data()[i] = u(rng);
        t.pixels.data()[i] = u(rng);
    }
    const auto grad = mse_loss(r, t).second;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < r.pixels.size(); ++i) {
        Image<double> up = r, down = r;
        up.pixels.data()[i] += h;
        down.pixels.data()[i] -= h;
        const double fd = (mse_loss(up, t).first - mse_loss(down, t).first) / (2 * h);
        CHECK(std::abs(fd - grad.pixels.data()[i]) <= 1e-6 * std::abs(grad.pixels.data()[i]));
    }
}
