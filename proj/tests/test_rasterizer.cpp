#include "gsplat/oracle.hpp"
#include "gsplat/rasterizer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace gs;
using gs::testing::pinhole;
using gs::testing::random_scene;

namespace {

Splat2D<double> unit_splat(Vec2<double> at, double opacity, Vec3<double> rgb, double depth, int index) {
    Splat2D<double> s;
    s.mean2d = at;
    s.opacity = opacity;
    s.rgb = rgb;
    s.depth = depth;
    s.source_index = index;
    return s;
}

template <typename Scalar>
double max_abs_diff(const Image<Scalar>& a, const Image<Scalar>& b) {
    return double((a.pixels - b.pixels).abs().maxCoeff());
}

} // namespace

TEST_CASE("composite: empty list") {
    const auto r = composite_pixel<double>({}, Vec2<double>(1, 1), Vec3<double>(0.1, 0.2, 0.3));
    CHECK(r.rgb == Vec3<double>(0.1, 0.2, 0.3));
    CHECK(r.transmittance == 1.0);
    CHECK(r.count == 0);
}

TEST_CASE("composite: one splat at its mean") {
    const Vec3<double> c(0.2, 0.6, 1.0);
    const auto s = unit_splat(Vec2<double>(4, 4), 0.7, c, 1, 0);
    const auto r = composite_pixel<double>({s}, s.mean2d, Vec3<double>::Zero());
    CHECK((r.rgb - 0.7 * c).norm() < 1e-15);
    CHECK(r.transmittance == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(r.count == 1);
}

TEST_CASE("composite: two half-transparent splats") {
    const Vec3<double> c1(1, 0, 0), c2(0, 0, 1);
    const Vec2<double> p(2, 2);
    const std::vector<Splat2D<double>> list = {unit_splat(p, 0.5, c1, 1, 0), unit_splat(p, 0.5, c2, 2, 1)};
    const auto r = composite_pixel<double>(list, p, Vec3<double>::Zero());
    CHECK((r.rgb - (0.5 * c1 + 0.25 * c2)).norm() < 1e-15);
    CHECK(r.transmittance == 0.25);
}

TEST_CASE("composite: alpha clamp, skip threshold and early stop") {
    const Vec2<double> p(0, 0);
    RenderConfig cfg;
    auto r = composite_pixel<double>({unit_splat(p, 1.0, Vec3<double>::Ones(), 1, 0)}, p, Vec3<double>::Zero(), cfg);
    CHECK(r.transmittance == doctest::Approx(0.01).epsilon(1e-12));

    r = composite_pixel<double>({unit_splat(p, 0.5 / 255, Vec3<double>::Ones(), 1, 0)}, p, Vec3<double>::Zero(), cfg);
    CHECK(r.count == 0);
    CHECK(r.transmittance == 1.0);

    std::vector<Splat2D<double>> wall;
    for (int i = 0; i < 5; ++i)
        wall.push_back(unit_splat(p, 0.99, Vec3<double>::Ones(), i + 1, i));
    r = composite_pixel<double>(wall, p, Vec3<double>::Zero(), cfg);
    // 0.01^2 = 1e-4 is not below the threshold; the third splat crosses it.
    CHECK(r.count == 3);
    CHECK(r.stop == 3);
    CHECK(r.transmittance < cfg.t_stop);
}

TEST_CASE("bin_and_sort: single splat footprint") {
    auto s = unit_splat(Vec2<double>(8, 8), 0.5, Vec3<double>::Ones(), 1, 0);
    s.cov2d = Mat2<double>::Identity() * 4.0;
    s.inv_cov2d = s.cov2d.inverse();
    const auto grid = bin_and_sort<double>({s}, 64, 64, 16);
    CHECK(grid.tiles_x == 4);
    CHECK(grid.tiles_y == 4);
    for (int ty = 0; ty < 4; ++ty)
        for (int tx = 0; tx < 4; ++tx)
            CHECK(grid.at(tx, ty).size() == (tx == 0 && ty == 0 ? 1u : 0u));

    s.mean2d = Vec2<double>(15, 15);
    const auto grid2 = bin_and_sort<double>({s}, 64, 64, 16);
    CHECK(grid2.at(0, 0).size() == 1);
    CHECK(grid2.at(1, 1).size() == 1);
    CHECK(grid2.at(2, 2).empty());
}

TEST_CASE("bin_and_sort: depth order and tie break") {
    auto far = unit_splat(Vec2<double>(20, 20), 0.5, Vec3<double>::Ones(), 2.0, 0);
    auto near = unit_splat(Vec2<double>(22, 20), 0.5, Vec3<double>::Ones(), 1.0, 1);
    far.cov2d = near.cov2d = Mat2<double>::Identity() * 25.0;
    const auto grid = bin_and_sort<double>({far, near}, 64, 64, 16);
    int shared = 0;
    for (const auto& list : grid.tiles)
        if (list.size() == 2) {
            ++shared;
            CHECK(list[0] == 1u);
        }
    CHECK(shared > 0);

    near.depth = 2.0;
    const auto tied = bin_and_sort<double>({near, far}, 64, 64, 16);
    for (const auto& list : tied.tiles)
        if (list.size() == 2)
            CHECK(list[0] == 1u);  // source_index 0 first
    CHECK_THROWS_AS(detail::rasterize_forward(Scened{}, pinhole<double>(8, 8, 8.0), RenderConfig{24}), Error);
}

TEST_CASE("cull: behind camera excluded, centered included, culling does not change the image") {
    Scened scene;
    Gaussian3D<double> g;
    g.log_scale.setConstant(std::log(0.05));
    g.mean = Vec3<double>(0, 0, 3);
    scene.gaussians.push_back(g);
    g.mean = Vec3<double>(0, 0, -3);
    scene.gaussians.push_back(g);
    g.mean = Vec3<double>(50, 0, 3);
    scene.gaussians.push_back(g);
    const auto cam = pinhole<double>(32, 32, 32.0);
    const auto kept = cull_frustum(scene, cam);
    CHECK(kept == std::vector<int>{0});

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto [rs, rc] = random_scene<double>(seed, 60, 48);
        const auto culled = cull_frustum(rs, rc);
        const auto all = project_scene(rs, rc, RenderConfig{}, false);
        CHECK(culled.size() <= all.splats.size());
        CHECK(max_abs_diff(render(rs, rc).color, oracle::render_bruteforce(rs, rc).color) <= 1e-6);
    }
}

TEST_CASE("render: empty scene is background") {
    Scenef scene;
    scene.background = Vec3<float>(0.25f, 0.5f, 0.75f);
    const auto out = render(scene, pinhole<float>(20, 12, 20.0f));
    for (Eigen::Index i = 0; i < out.color.pixels.rows(); ++i)
        CHECK((out.color.pixels.row(i) == scene.background.transpose().array()).all());
    CHECK((out.final_transmittance == 1.0f).all());
}

TEST_CASE("render: closed-form centered splat") {
    auto cam = pinhole<double>(64, 64, 64.0);
    cam.cx = cam.cy = 32.5;  // mean projects onto the center of pixel (32, 32)
    Scened scene;
    Gaussian3D<double> g;
    g.mean = Vec3<double>(0, 0, 4);
    g.log_scale.setConstant(std::log(0.5));
    g.opacity_logit = logit(0.9);
    g.sh.row(0) << 0.4 / sh::kC0, -0.1 / sh::kC0, 0.2 / sh::kC0;
    scene.gaussians.push_back(g);
    scene.background.setZero();
    const auto out = render(scene, cam);
    const Vec3<double> rgb(0.9, 0.4, 0.7);
    const Vec3<double> got = out.color.at(32, 32).transpose();
    CHECK((got - 0.9 * rgb).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("render: tiled equals brute force for every tile size") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        const auto [scene, cam] = random_scene<float>(seed, 100, 64, 2);
        const auto reference = oracle::render_bruteforce(scene, cam).color;
        for (int ts : {8, 16, 32}) {
            RenderConfig cfg;
            cfg.tile_size = ts;
            CHECK(max_abs_diff(render(scene, cam, cfg).color, reference) <= 1e-6);
        }
    }
}

TEST_CASE("render: weights and transmittance sum to one") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto [scene, cam] = random_scene<double>(seed, 100, 64);
        for (auto& g : scene.gaussians) {
            g.sh.setZero();
            g.sh.row(0).setConstant(0.5 / sh::kC0);
        }
        scene.background.setZero();
        const auto out = render(scene, cam);
        for (Eigen::Index i = 0; i < out.color.pixels.rows(); ++i)
            CHECK(std::abs(out.color.pixels(i, 0) + out.final_transmittance[i] - 1.0) <= 1e-6);
    }
}

TEST_CASE("render: background enters linearly through transmittance") {
    auto [scene, cam] = random_scene<double>(42, 80, 48);
    scene.background = Vec3<double>::Zero();
    const auto black = render(scene, cam);
    scene.background = Vec3<double>(0.9, 0.3, 0.6);
    const auto lit = render(scene, cam);
    for (Eigen::Index i = 0; i < lit.color.pixels.rows(); ++i) {
        const Eigen::Array3d d = lit.color.pixels.row(i) - black.color.pixels.row(i);
        CHECK((d - black.final_transmittance[i] * scene.background.array()).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("render: raising opacity never raises transmittance") {
    RenderConfig cfg;
    cfg.t_stop = 0;
    auto [scene, cam] = random_scene<double>(8, 60, 48);
    const auto before = render(scene, cam, cfg);
    for (auto& g : scene.gaussians)
        g.opacity_logit += 0.5;
    const auto after = render(scene, cam, cfg);
    CHECK((after.final_transmittance <= before.final_transmittance + 1e-15).all());
}

TEST_CASE("render: permutation of Gaussians and thread count do not change bits") {
    auto [scene, cam] = random_scene<float>(77, 120, 64, 1);
    RenderConfig cfg;
    const auto base = render(scene, cam, cfg);
    std::mt19937_64 rng(1);
    std::shuffle(scene.gaussians.begin(), scene.gaussians.end(), rng);
    CHECK(max_abs_diff(render(scene, cam, cfg).color, base.color) == 0.0);
    cfg.threads = 8;
    const auto threaded = render(scene, cam, cfg);
    CHECK(max_abs_diff(threaded.color, render(scene, cam, RenderConfig{}).color) == 0.0);
}

TEST_CASE("render: degenerate splats are counted, not drawn") {
    Scenef scene;
    Gaussian3D<float> g;
    g.mean = Vec3<float>(0, 0, 2);
    g.log_scale.setConstant(-30.0f);
    scene.gaussians.push_back(g);
    RenderConfig cfg;
    cfg.dilation = 0;
    const auto out = render(scene, pinhole<float>(16, 16, 16.0f), cfg);
    CHECK(out.degenerate_culled == 1);
    CHECK((out.per_pixel_count == 0).all());
}
