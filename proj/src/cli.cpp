#include "gsplat/cli.hpp"

#include "gsplat/gradients.hpp"
#include "gsplat/oracle.hpp"
#include "gsplat/rasterizer.hpp"
#include "gsplat/scene_io.hpp"
#include "gsplat/synthetic.hpp"
#include "gsplat/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

namespace gs::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::uint64_t seed = 0;
    int threads = 1;
    bool verbose = false;
};

struct GenerateArgs {
    Common common;
    int count = 20;
    int cameras = 40;
    int width = 64;
    int height = 64;
    double radius = 4.0;
    double jitter = 0.05;
    std::string out;
};

// Hyperparameter flags are optional so that a config file can sit between
// the defaults and the command line.
struct TrainArgs {
    Common common;
    std::string data;
    std::string out;
    std::string config;
    std::string log;
    bool timing = false;
    int holdout_every = 5;
    std::optional<int> iters;
    std::optional<double> lr_mean, lr_mean_final, lr_log_scale, lr_quat, lr_opacity, lr_sh;
    std::optional<double> adam_beta1, adam_beta2, adam_eps;
    std::optional<int> densify_start, densify_end, densify_interval, eval_interval;
    std::optional<double> grad_threshold, scale_threshold, prune_opacity, split_factor;
    std::optional<std::string> sh_schedule;
    std::optional<std::string> background;
    bool stochastic_split = false;
};

struct RenderArgs {
    Common common;
    std::string ckpt;
    std::string data;
    std::optional<int> pose_index;
    std::string pose_file;
    std::string out;
    std::string engine = "tiled";
    int samples = 1024;
    std::string background = "0,0,0";
};

struct EvalArgs {
    Common common;
    std::string ckpt;
    std::string data;
    std::string split = "test";
    int holdout_every = 5;
    std::string background = "0,0,0";
    std::optional<double> min_psnr;
};

struct ExportArgs {
    Common common;
    std::string ckpt;
    std::string out;
};

struct CheckArgs {
    Common common;
    int scenes = 1;
    int count = 8;
    int size = 16;
    int sh_degree = 3;
    double step = 1e-4;
    double tolerance = 1e-3;
    double abs_floor = 1e-8;
};

struct Args {
    GenerateArgs generate;
    TrainArgs train;
    RenderArgs render;
    EvalArgs eval;
    ExportArgs export_splat;
    CheckArgs check;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--threads", c.threads, "Worker threads; never changes output bits")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_flag("--verbose", c.verbose, "Human-readable progress on standard error");
}

std::unique_ptr<CLI::App> build_app(Args& a) {
    auto app = std::make_unique<CLI::App>("Differentiable 3D Gaussian splatting: generate, train, render, evaluate",
                                          "gsplat");
    app->require_subcommand(1);
    app->fallthrough(false);

    auto* gen = app->add_subcommand("generate-synthetic", "Write a seeded synthetic dataset");
    add_common(gen, a.generate.common);
    gen->add_option("--count", a.generate.count, "Number of ground-truth Gaussians")->capture_default_str();
    gen->add_option("--cameras", a.generate.cameras, "Number of cameras")->capture_default_str();
    gen->add_option("--width", a.generate.width, "Image width")->capture_default_str();
    gen->add_option("--height", a.generate.height, "Image height")->capture_default_str();
    gen->add_option("--radius", a.generate.radius, "Camera sphere radius")->capture_default_str();
    gen->add_option("--jitter", a.generate.jitter, "Init point displacement")->capture_default_str();
    gen->add_option("--out", a.generate.out, "Output directory")->required();

    auto* tr = app->add_subcommand("train", "Optimize Gaussians against a dataset");
    auto& t = a.train;
    add_common(tr, t.common);
    tr->add_option("--data", t.data, "Dataset directory (manifest.json, points.ply)")->required();
    tr->add_option("--out", t.out, "Output checkpoint")->required();
    tr->add_option("--config", t.config, "JSON file with TrainConfig keys");
    tr->add_option("--log", t.log, "Metrics log path (CSV)");
    tr->add_flag("--timing", t.timing, "Record wall_ms in the metrics log");
    tr->add_option("--holdout-every", t.holdout_every, "Hold out every Nth frame; 0 keeps all")->capture_default_str();
    tr->add_option("--iters", t.iters, "Iterations");
    tr->add_option("--lr-mean", t.lr_mean, "Mean learning rate (times scene extent)");
    tr->add_option("--lr-mean-final", t.lr_mean_final, "Final mean learning rate (times scene extent)");
    tr->add_option("--lr-log-scale", t.lr_log_scale, "Log-scale learning rate");
    tr->add_option("--lr-quat", t.lr_quat, "Quaternion learning rate");
    tr->add_option("--lr-opacity", t.lr_opacity, "Opacity-logit learning rate");
    tr->add_option("--lr-sh", t.lr_sh, "SH learning rate");
    tr->add_option("--adam-beta1", t.adam_beta1, "Adam beta1");
    tr->add_option("--adam-beta2", t.adam_beta2, "Adam beta2");
    tr->add_option("--adam-eps", t.adam_eps, "Adam epsilon");
    tr->add_option("--densify-start", t.densify_start, "First densification iteration");
    tr->add_option("--densify-end", t.densify_end, "Last densification iteration");
    tr->add_option("--densify-interval", t.densify_interval, "Iterations between densifications");
    tr->add_option("--grad-threshold", t.grad_threshold, "Screen-gradient threshold (1/pixel)");
    tr->add_option("--scale-threshold", t.scale_threshold, "Clone/split scale threshold (world units)");
    tr->add_option("--prune-opacity", t.prune_opacity, "Prune below this opacity");
    tr->add_option("--split-factor", t.split_factor, "Scale divisor for split children");
    tr->add_flag("--stochastic-split", t.stochastic_split, "Sample split children from the Gaussian");
    tr->add_option("--sh-schedule", t.sh_schedule, "SH degree schedule, e.g. 0:0,500:1");
    tr->add_option("--background", t.background, "Background color r,g,b");
    tr->add_option("--eval-interval", t.eval_interval, "Iterations between metrics records");

    auto* rd = app->add_subcommand("render", "Render a checkpoint to a PPM image");
    auto& r = a.render;
    add_common(rd, r.common);
    rd->add_option("--ckpt", r.ckpt, "Checkpoint")->required();
    rd->add_option("--data", r.data, "Dataset directory for --pose-index");
    auto* pi = rd->add_option("--pose-index", r.pose_index, "Frame index in the dataset manifest");
    auto* pf = rd->add_option("--pose-file", r.pose_file, "Pose file (one manifest frame)");
    pi->excludes(pf);
    rd->add_option("--out", r.out, "Output PPM")->required();
    rd->add_option("--engine", r.engine, "tiled | bruteforce | quadrature")
        ->check(CLI::IsMember({"tiled", "bruteforce", "quadrature"}))
        ->capture_default_str();
    rd->add_option("--samples", r.samples, "Quadrature samples per ray")->capture_default_str();
    rd->add_option("--background", r.background, "Background color r,g,b")->capture_default_str();

    auto* ev = app->add_subcommand("eval", "Per-view PSNR of a checkpoint");
    auto& e = a.eval;
    add_common(ev, e.common);
    ev->add_option("--ckpt", e.ckpt, "Checkpoint")->required();
    ev->add_option("--data", e.data, "Dataset directory")->required();
    ev->add_option("--split", e.split, "test | train | all")
        ->check(CLI::IsMember({"test", "train", "all"}))
        ->capture_default_str();
    ev->add_option("--holdout-every", e.holdout_every, "Hold out every Nth frame")->capture_default_str();
    ev->add_option("--background", e.background, "Background color r,g,b")->capture_default_str();
    ev->add_option("--min-psnr", e.min_psnr, "Exit 3 when the mean PSNR is below this");

    auto* ex = app->add_subcommand("export-splat", "Write the 32-byte-per-Gaussian viewer format");
    add_common(ex, a.export_splat.common);
    ex->add_option("--ckpt", a.export_splat.ckpt, "Checkpoint")->required();
    ex->add_option("--out", a.export_splat.out, "Output .splat file")->required();

    auto* ck = app->add_subcommand("check-gradients", "Finite-difference check of the analytic backward pass");
    auto& c = a.check;
    add_common(ck, c.common);
    ck->add_option("--scenes", c.scenes, "Number of seeded scenes")->capture_default_str();
    ck->add_option("--count", c.count, "Gaussians per scene (at most 64)")->capture_default_str();
    ck->add_option("--size", c.size, "Image width and height")->capture_default_str();
    ck->add_option("--sh-degree", c.sh_degree, "SH degree of the test scenes")->capture_default_str();
    ck->add_option("--step", c.step, "Central-difference step")->capture_default_str();
    ck->add_option("--tolerance", c.tolerance, "Relative error tolerance")->capture_default_str();
    ck->add_option("--abs-floor", c.abs_floor, "Absolute errors at or below this always pass")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    return app;
}

Vec3<double> parse_rgb(const std::string& s, const char* flag) {
    Vec3<double> v;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf%c", &v[0], &v[1], &v[2], &tail) != 3)
        throw CLI::ValidationError(flag, "expected r,g,b but got '" + s + "'");
    return v;
}

std::vector<std::pair<int, int>> parse_schedule(const std::string& s) {
    std::vector<std::pair<int, int>> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        int it = 0, deg = 0;
        char tail = 0;
        if (std::sscanf(item.c_str(), "%d:%d%c", &it, &deg, &tail) != 2)
            throw CLI::ValidationError("--sh-schedule", "expected iteration:degree pairs but got '" + item + "'");
        out.emplace_back(it, deg);
    }
    return out;
}

template <typename T>
void set_if(const std::optional<T>& v, T& dst) {
    if (v)
        dst = *v;
}

void apply_config_file(const std::string& path, train::TrainConfig& cfg) {
    const auto bytes = io::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Schema, path + ": invalid JSON: " + e.what());
    }
    if (!j.is_object())
        throw Error(ErrorKind::Schema, path + ": config must be a JSON object");

    std::map<std::string, double*> reals = {
        {"lr_mean", &cfg.lr_mean},         {"lr_mean_final", &cfg.lr_mean_final},
        {"lr_log_scale", &cfg.lr_log_scale}, {"lr_quat", &cfg.lr_quat},
        {"lr_opacity", &cfg.lr_opacity},   {"lr_sh", &cfg.lr_sh},
        {"adam_beta1", &cfg.adam_beta1},   {"adam_beta2", &cfg.adam_beta2},
        {"adam_eps", &cfg.adam_eps},       {"grad_threshold", &cfg.grad_threshold},
        {"scale_threshold", &cfg.scale_threshold}, {"prune_opacity", &cfg.prune_opacity},
        {"split_factor", &cfg.split_factor}};
    std::map<std::string, int*> ints = {{"iterations", &cfg.iterations},
                                        {"densify_start", &cfg.densify_start},
                                        {"densify_end", &cfg.densify_end},
                                        {"densify_interval", &cfg.densify_interval},
                                        {"eval_interval", &cfg.eval_interval}};
    for (const auto& [key, value] : j.items()) {
        const std::string where = path + ": '" + key + "'";
        if (auto it = reals.find(key); it != reals.end()) {
            if (!value.is_number())
                throw Error(ErrorKind::Schema, where + " must be a number");
            *it->second = value.get<double>();
        } else if (auto it2 = ints.find(key); it2 != ints.end()) {
            if (!value.is_number_integer())
                throw Error(ErrorKind::Schema, where + " must be an integer");
            *it2->second = value.get<int>();
        } else if (key == "seed") {
            if (!value.is_number_unsigned())
                throw Error(ErrorKind::Schema, where + " must be a non-negative integer");
            cfg.seed = value.get<std::uint64_t>();
        } else if (key == "stochastic_split") {
            if (!value.is_boolean())
                throw Error(ErrorKind::Schema, where + " must be a boolean");
            cfg.stochastic_split = value.get<bool>();
        } else if (key == "background") {
            if (!value.is_array() || value.size() != 3)
                throw Error(ErrorKind::Schema, where + " must be an array of 3 numbers");
            for (int c = 0; c < 3; ++c)
                cfg.background[c] = value[std::size_t(c)].get<float>();
        } else if (key == "sh_degree_schedule") {
            if (!value.is_array())
                throw Error(ErrorKind::Schema, where + " must be an array of [iteration, degree] pairs");
            cfg.sh_degree_schedule.clear();
            for (const auto& pair : value) {
                if (!pair.is_array() || pair.size() != 2)
                    throw Error(ErrorKind::Schema, where + " must be an array of [iteration, degree] pairs");
                cfg.sh_degree_schedule.emplace_back(pair[0].get<int>(), pair[1].get<int>());
            }
        } else {
            throw Error(ErrorKind::Schema, where + " is not a known TrainConfig key");
        }
    }
}

train::TrainInputs dataset_inputs(const io::Dataset& ds) {
    train::TrainInputs in;
    in.cameras = ds.cameras;
    in.images = ds.images;
    return in;
}

void log_verbose(const Common& c, std::ostream& err, const std::string& msg) {
    if (c.verbose)
        err << "[gsplat] " << msg << "\n";
}

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
    io::SyntheticConfig cfg;
    cfg.seed = a.common.seed;
    cfg.count = a.count;
    cfg.camera_count = a.cameras;
    cfg.width = a.width;
    cfg.height = a.height;
    cfg.camera_radius = a.radius;
    cfg.init_jitter = a.jitter;
    cfg.threads = a.common.threads;
    log_verbose(a.common, err, "generating " + std::to_string(a.count) + " Gaussians, " +
                                   std::to_string(a.cameras) + " cameras");
    const auto ds = io::generate_synthetic(cfg);
    io::write_synthetic(ds, a.out);
    out << "key,value\n";
    out << "gaussians," << ds.truth.size() << "\n";
    out << "frames," << ds.manifest.frames.size() << "\n";
    out << "manifest," << (fs::path(a.out) / "manifest.json").string() << "\n";
    return kSuccess;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    train::TrainConfig cfg;
    cfg.seed = a.common.seed;
    if (!a.config.empty())
        apply_config_file(a.config, cfg);
    set_if(a.iters, cfg.iterations);
    set_if(a.lr_mean, cfg.lr_mean);
    set_if(a.lr_mean_final, cfg.lr_mean_final);
    set_if(a.lr_log_scale, cfg.lr_log_scale);
    set_if(a.lr_quat, cfg.lr_quat);
    set_if(a.lr_opacity, cfg.lr_opacity);
    set_if(a.lr_sh, cfg.lr_sh);
    set_if(a.adam_beta1, cfg.adam_beta1);
    set_if(a.adam_beta2, cfg.adam_beta2);
    set_if(a.adam_eps, cfg.adam_eps);
    set_if(a.densify_start, cfg.densify_start);
    set_if(a.densify_end, cfg.densify_end);
    set_if(a.densify_interval, cfg.densify_interval);
    set_if(a.eval_interval, cfg.eval_interval);
    set_if(a.grad_threshold, cfg.grad_threshold);
    set_if(a.scale_threshold, cfg.scale_threshold);
    set_if(a.prune_opacity, cfg.prune_opacity);
    set_if(a.split_factor, cfg.split_factor);
    if (a.stochastic_split)
        cfg.stochastic_split = true;
    if (a.sh_schedule)
        cfg.sh_degree_schedule = parse_schedule(*a.sh_schedule);
    if (a.background)
        cfg.background = parse_rgb(*a.background, "--background").cast<float>();
    cfg.render.threads = a.common.threads;

    const fs::path root(a.data);
    const auto ds = io::load_manifest(root / "manifest.json");
    const auto cloud = io::load_ply_points(root / "points.ply");
    train::InitConfig init;
    init.scene_unit = ds.manifest.scene_unit;
    auto scene = train::init_from_point_cloud(cloud, init);

    auto inputs = dataset_inputs(ds);
    std::tie(inputs.train_views, inputs.eval_views) = train::split_views(ds.images.size(), a.holdout_every);
    log_verbose(a.common, err, "training " + std::to_string(cfg.iterations) + " iterations on " +
                                   std::to_string(inputs.train_views.size()) + " views");
    const auto result = train::train(std::move(scene), inputs, cfg);
    if (a.common.verbose)
        for (const auto& r : result.log)
            err << "[gsplat] iter " << r.iteration << " loss " << r.loss << " psnr " << r.psnr << " gaussians "
                << r.gaussian_count << "\n";

    io::save_checkpoint(result.scene, a.out);
    if (!a.log.empty())
        io::write_text_atomic(a.log, train::format_metrics(result.log, a.timing));

    const auto& last = result.log.back();
    char buf[64];
    out << "key,value\n";
    out << "iterations," << cfg.iterations << "\n";
    out << "gaussians," << result.scene.size() << "\n";
    out << "cloned," << result.totals.cloned << "\n";
    out << "split," << result.totals.split << "\n";
    out << "pruned," << result.totals.pruned << "\n";
    std::snprintf(buf, sizeof buf, "%.9g", last.loss);
    out << "final_loss," << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.6f", last.psnr);
    out << "eval_psnr," << buf << "\n";
    return kSuccess;
}

// Ray interval covering every Gaussian out to 4 standard deviations.
oracle::QuadratureConfig auto_quadrature(const Scened& scene, const Camera<double>& cam, int samples) {
    oracle::QuadratureConfig q;
    q.samples = samples;
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& g : scene.gaussians) {
        const double d = (g.mean - cam.center()).norm();
        const double reach = 4.0 * std::exp(g.log_scale.maxCoeff());
        lo = std::min(lo, d - reach);
        hi = std::max(hi, d + reach);
    }
    q.t_near = std::max(cam.near_plane, std::isfinite(lo) ? lo : cam.near_plane);
    q.t_far = std::max(q.t_near + 1e-6, std::min(cam.far_plane, hi));
    return q;
}

int cmd_render(const RenderArgs& a, std::ostream& out, std::ostream& err) {
    const auto scene_f = io::load_checkpoint(a.ckpt);
    Camera<double> cam;
    if (a.pose_index) {
        if (a.data.empty())
            throw CLI::ValidationError("--pose-index", "requires --data");
        const auto manifest = io::read_manifest(fs::path(a.data) / "manifest.json");
        if (*a.pose_index < 0 || std::size_t(*a.pose_index) >= manifest.frames.size())
            throw CLI::ValidationError("--pose-index", "frame " + std::to_string(*a.pose_index) + " not in manifest (" +
                                                           std::to_string(manifest.frames.size()) + " frames)");
        cam = io::frame_camera(manifest.frames[std::size_t(*a.pose_index)], manifest.scene_unit);
    } else if (!a.pose_file.empty()) {
        cam = io::load_pose_file(a.pose_file);
    } else {
        throw CLI::ValidationError("render", "one of --pose-index or --pose-file is required");
    }
    const Vec3<double> bg = parse_rgb(a.background, "--background");

    RenderConfig rcfg;
    rcfg.threads = a.common.threads;
    Image<float> image;
    if (a.engine == "quadrature") {
        Scened scene = scene_f.cast<double>();
        scene.background = bg;
        auto q = auto_quadrature(scene, cam, a.samples);
        q.threads = a.common.threads;
        q.seed = a.common.seed;
        image = oracle::render_quadrature(scene, cam, q).color.cast<float>();
    } else {
        Scenef scene = scene_f;
        scene.background = bg.cast<float>();
        const auto camf = cam.cast<float>();
        image = a.engine == "tiled" ? render(scene, camf, rcfg).color : oracle::render_bruteforce(scene, camf, rcfg).color;
    }
    log_verbose(a.common, err, "rendered " + std::to_string(cam.width) + "x" + std::to_string(cam.height) +
                                   " with engine " + a.engine);
    io::save_ppm(image, a.out);
    out << "key,value\n" << "engine," << a.engine << "\n" << "width," << cam.width << "\n"
        << "height," << cam.height << "\n";
    return kSuccess;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
    auto scene = io::load_checkpoint(a.ckpt);
    scene.background = parse_rgb(a.background, "--background").cast<float>();
    const auto ds = io::load_manifest(fs::path(a.data) / "manifest.json");
    const auto inputs = dataset_inputs(ds);
    auto [train_views, test_views] = train::split_views(ds.images.size(), a.holdout_every);
    std::vector<std::size_t> views;
    if (a.split == "test")
        views = test_views;
    else if (a.split == "train")
        views = train_views;
    else
        views = train::split_views(ds.images.size(), 0).first;
    if (views.empty())
        throw Error(ErrorKind::Schema, "eval: split '" + a.split + "' selects no views");

    RenderConfig rcfg;
    rcfg.threads = a.common.threads;
    const auto scores = train::evaluate_views(scene, inputs, views, rcfg);
    char buf[64];
    out << "view,psnr\n";
    for (std::size_t i = 0; i < views.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", views[i], scores[i]);
        out << buf;
    }
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / double(scores.size());
    std::snprintf(buf, sizeof buf, "mean,%.6f\n", mean);
    out << buf;
    if (a.min_psnr && !(mean >= *a.min_psnr))
        return kVerificationFailure;
    return kSuccess;
}

int cmd_export(const ExportArgs& a, std::ostream& out, std::ostream&) {
    const auto scene = io::load_checkpoint(a.ckpt);
    io::export_splat(scene, a.out);
    out << "key,value\n" << "records," << scene.size() << "\n" << "bytes," << scene.size() * 32 << "\n";
    return kSuccess;
}

int cmd_check(const CheckArgs& a, std::ostream& out, std::ostream& err) {
    if (a.scenes < 1)
        throw CLI::ValidationError("--scenes", "must be at least 1");
    GradCheckOptions opt;
    opt.step = a.step;
    opt.tolerance = a.tolerance;
    opt.abs_floor = a.abs_floor;
    RenderConfig cfg = gradient_check_config();
    cfg.threads = a.common.threads;

    bool all_pass = true;
    char buf[256];
    out << "scene,class,coords,max_rel_error,max_abs_error,failures\n";
    for (int s = 0; s < a.scenes; ++s) {
        const std::uint64_t seed = a.common.seed + std::uint64_t(s);
        const auto [scene, cam] = make_gradient_check_scene(seed, a.count, a.size, a.sh_degree);
        opt.target_seed = seed + 1;
        const auto report = check_gradients(scene, cam, cfg, opt);
        for (const auto& c : report.classes) {
            std::snprintf(buf, sizeof buf, "%d,%s,%d,%.3e,%.3e,%d\n", s, c.name.c_str(), c.coords, c.max_rel_error,
                          c.max_abs_error, c.failures);
            out << buf;
        }
        for (const auto& d : report.diagnostics) {
            out << s << ",diagnostic,0,0,0,0\n";
            err << "check-gradients: scene " << s << ": " << d << "\n";
        }
        all_pass = all_pass && report.passed;
    }
    out << "result," << (all_pass ? "pass" : "fail") << "\n";
    return all_pass ? kSuccess : kVerificationFailure;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Args a;
    auto app = build_app(a);
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app->parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app->help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        const auto subs = app->get_subcommands();
        err << "gsplat: " << e.what() << "\n" << (subs.empty() ? app->help() : subs.front()->help());
        return kUsageError;
    }

    const auto* sub = app->get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (name == "generate-synthetic") return cmd_generate(a.generate, out, err);
        if (name == "train") return cmd_train(a.train, out, err);
        if (name == "render") return cmd_render(a.render, out, err);
        if (name == "eval") return cmd_eval(a.eval, out, err);
        if (name == "export-splat") return cmd_export(a.export_splat, out, err);
        if (name == "check-gradients") return cmd_check(a.check, out, err);
    } catch (const CLI::ValidationError& e) {
        err << "gsplat " << name << ": " << e.what() << "\n" << sub->help();
        return kUsageError;
    } catch (const std::exception& e) {
        err << "gsplat " << name << ": " << e.what() << "\n";
        return kDataError;
    }
    return kUsageError;
}

std::vector<std::string> subcommands() {
    return {"generate-synthetic", "train", "render", "eval", "export-splat", "check-gradients"};
}

std::vector<std::string> subcommand_flags(const std::string& subcommand) {
    Args a;
    auto app = build_app(a);
    std::vector<std::string> flags;
    for (const auto* opt : app->get_subcommand(subcommand)->get_options()) {
        for (const auto& name : opt->get_lnames())
            flags.push_back("--" + name);
    }
    return flags;
}

} // namespace gs::cli
