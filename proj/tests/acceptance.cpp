// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. `acceptance 3 5` runs only criteria 3 and 5.

#include "splatctl/container.hpp"
#include "splatctl/error.hpp"
#include "splatctl/fit.hpp"
#include "splatctl/formats.hpp"
#include "splatctl/gradients.hpp"
#include "splatctl/scenes.hpp"
#include "splatctl/views.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace splatctl;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

double max_abs_diff(const FeatureMap &a, const FeatureMap &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        m = std::max(m, std::abs(a.values[i] - b.values[i]));
    }
    for (std::size_t i = 0; i < a.alpha.size(); ++i) {
        m = std::max(m, std::abs(a.alpha[i] - b.alpha[i]));
    }
    return m;
}

int worker_count() { return static_cast<int>(std::max(4u, std::thread::hardware_concurrency())); }

Outcome oracle_equivalence() {
    const auto t0 = Clock::now();
    struct Case {
        int w, h, c;
        std::size_t n;
    };
    std::vector<Case> cases = {{16, 16, 3, 5},      {32, 32, 8, 50},     {48, 40, 4, 200},   {64, 64, 8, 500},
                               {100, 60, 2, 1000},  {128, 128, 8, 2000}, {256, 256, 8, 5000}, {256, 200, 8, 3000},
                               {17, 93, 1, 40},     {200, 256, 6, 4000}};
    double worst = 0.0;
    int scenes_run = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        for (std::uint64_t rep = 0; rep < 2; ++rep) {
            const auto &c = cases[i];
            const auto cam = scenes::axis_camera(c.w, c.h, 0.9 * c.w);
            const auto g = scenes::random_gaussians(1000 + 10 * i + rep, c.n, cam, c.c);
            const int tile = rep == 0 ? 16 : 5 + static_cast<int>(i);
            worst = std::max(worst, max_abs_diff(render_bruteforce(g, cam), render_tiled(g, cam, {tile, 0, {}})));
            ++scenes_run;
        }
    }
    const double elapsed = seconds_since(t0);
    return {worst < 1e-10 && scenes_run >= 20 && elapsed < 120.0,
            std::to_string(scenes_run) + " scenes, 5..5000 gaussians, max |tiled-brute| = " + num(worst) + ", " +
                num(elapsed) + " s"};
}

Outcome gradient_verification() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_name;
    bool pass = true;
    std::size_t checked = 0;
    const auto fixtures = scenes::gradient_fixtures();
    for (const auto &s : fixtures) {
        const auto r = grad_check(s.field, s.model, s.mapping, s.state, s.camera, 7, 1e-5);
        pass = pass && r.pass;
        checked += r.checked;
        if (r.max_rel_err >= worst) {
            worst = r.max_rel_err;
            worst_name = s.name;
        }
    }
    const double elapsed = seconds_since(t0);
    return {pass && worst < 1e-4 && elapsed < 300.0,
            std::to_string(fixtures.size()) + " fixtures incl. occlusion, " + std::to_string(checked) +
                " params, max rel err " + num(worst) + " (" + worst_name + "), " + num(elapsed) + " s"};
}

Outcome two_gaussian_hand_case() {
    const auto cam = scenes::axis_camera(9, 9, 10.0);
    EmbeddedGaussians g;
    g.channels = 2;
    g.positions = {Vec3(0, 0, 1.0), Vec3(0, 0, 2.0)};
    g.scales = {0.1, 0.2};
    g.opacities = {0.5, 0.5};
    const double f1[2] = {0.7, -0.3};
    const double f2[2] = {-0.4, 0.9};
    g.features = {f1[0], f1[1], f2[0], f2[1]};
    g.source_texel = {0, 1};
    double err = 0.0;
    for (const auto &map : {render_bruteforce(g, cam), render_tiled(g, cam)}) {
        for (int c = 0; c < 2; ++c) {
            err = std::max(err, std::abs(map.value(4, 4, c) - (0.5 * f1[c] + 0.25 * f2[c])));
        }
        err = std::max(err, std::abs(map.alpha_at(4, 4) - 0.75));
    }
    return {err <= 1e-12, "centre pixel error " + num(err) + " (both renderers)"};
}

struct DemoSetup {
    SurfaceModel model = make_demo_head();
    UVMapping mapping;
    GaussianFieldUV field;
    explicit DemoSetup(int res) : mapping(build_uv_mapping(model, res)) {
        field = init_field(res, 8, 1, default_initial_scale(model));
    }
};

Outcome consistency_sweep_check() {
    DemoSetup d(64);
    const auto state = SurfaceState::neutral(d.model);
    SweepOptions options;
    const auto good = consistency_sweep(d.field, d.model, d.mapping, state, 60, 2024, options);
    options.fx_corruption = 0.01;
    const auto bad = consistency_sweep(d.field, d.model, d.mapping, state, 60, 2024, options);
    return {good.pass && good.max_reproj_err < 1e-6 && !bad.pass && bad.max_reproj_err > 1e-6,
            "60 views, " + std::to_string(good.pairs_checked) + " pairs: max err " + num(good.max_reproj_err) +
                " px; 1% fx corruption: " + num(bad.max_reproj_err) + " px (" + (bad.pass ? "passed" : "failed") +
                ")"};
}

Outcome cross_identity() {
    DemoSetup d(256);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    bool pass = true;
    int trials = 0;
    for (; trials < 4; ++trials) {
        std::vector<double> beta(4), beta_ref(4), psi(4);
        for (int k = 0; k < 4; ++k) {
            beta[k] = u(rng);
            beta_ref[k] = u(rng);
            psi[k] = u(rng);
        }
        const auto pose = RigidPose::from_euler_degrees(30 * u(rng), 20 * u(rng), 10 * u(rng), Vec3(u(rng), 0, 0));
        const auto self = cross_identity_gaussians(d.field, d.model, d.mapping, beta, psi, pose);
        const auto swapped = cross_identity_gaussians(d.field, d.model, d.mapping, beta_ref, psi, pose);
        pass = pass && self.features == swapped.features && self.opacities == swapped.opacities &&
               self.scales == swapped.scales && self.positions != swapped.positions;
    }
    return {pass, std::to_string(trials) + " random (beta, beta_ref, psi, pose) draws on 65536 gaussians: "
                      "attributes bitwise equal, positions differ"};
}

Outcome planted_recovery() {
    const auto t0 = Clock::now();
    const auto model = make_demo_head();
    ExperimentConfig config;
    const auto a = run_direct_experiment(model, config);
    const double elapsed = seconds_since(t0);
    const auto b = run_direct_experiment(model, config);
    const double reduction = a.fit.loss_trace.front() / a.fit.loss_trace.back();
    const bool same = a.fit.loss_trace == b.fit.loss_trace && a.fit.field.raw_feature == b.fit.field.raw_feature;

    // Paired run with a single training camera; logged, not gated.
    auto single = config;
    single.n_views = 1;
    const auto s = run_direct_experiment(model, single);
    const double single_reduction = s.fit.loss_trace.front() / s.fit.loss_trace.back();
    return {reduction >= 100.0 && same && elapsed < 600.0,
            "loss " + num(a.fit.loss_trace.front()) + " -> " + num(a.fit.loss_trace.back()) + " (" + num(reduction) +
                "x) in " + std::to_string(config.iters) + " iters, rerun " + (same ? "bitwise identical" : "DIFFERS") +
                ", " + num(elapsed) + " s; held-out 8 views " + num(a.heldout_loss) + " vs 1 view " +
                num(s.heldout_loss) + " (" + num(single_reduction) + "x)"};
}

Outcome proxy_supervision() {
    const auto t0 = Clock::now();
    const auto r = run_proxy_experiment(make_demo_head(), ExperimentConfig{});
    const double elapsed = seconds_since(t0);
    const double reduction = r.fit.loss_trace.front() / r.fit.loss_trace.back();
    const double ratio = r.final_variance / r.initial_variance;
    return {reduction >= 100.0 && ratio >= 10.0 && elapsed < 600.0,
            "rgb loss " + num(reduction) + "x down, channel variance " + num(r.initial_variance) + " -> " +
                num(r.final_variance) + " (" + num(ratio) + "x), expression diff " + num(r.expression_max_diff) +
                ", " + num(elapsed) + " s"};
}

Outcome performance() {
    DemoSetup d(256);
    const auto g = embed(d.field, deform(d.model, SurfaceState::neutral(d.model)), d.mapping);
    ViewSpec view;
    view.yaw = 15.0;
    view.pitch = 10.0;
    const auto cam = camera_from_view(view, Intrinsics::for_size(512, 512));

    auto time_best = [](int reps, const std::function<FeatureMap()> &fn, FeatureMap &out) {
        double best = 1e300;
        for (int i = 0; i < reps; ++i) {
            const auto t0 = Clock::now();
            out = fn();
            best = std::min(best, seconds_since(t0));
        }
        return best;
    };
    FeatureMap tiled_map, tiled_1t_map, brute_map;
    const double tiled = time_best(3, [&] { return render_tiled(g, cam); }, tiled_map);
    const double tiled_1t = time_best(3, [&] { return render_tiled(g, cam, {16, 1, {}}); }, tiled_1t_map);
    const double brute = time_best(1, [&] { return render_bruteforce(g, cam); }, brute_map);
    const double speedup = brute / tiled;
    const double speedup_1t = brute / tiled_1t;
    const double diff = max_abs_diff(tiled_map, brute_map);
    std::size_t covered = 0;
    for (double a : tiled_map.alpha) {
        covered += a > 0.5 ? 1 : 0;
    }

    nlohmann::json report{{"gaussians", g.size()},
                          {"image", {{"width", 512}, {"height", 512}, {"channels", 8}}},
                          {"uv_resolution", 256},
                          {"hardware_threads", std::thread::hardware_concurrency()},
                          {"render_threads", resolve_thread_count(0)},
                          {"tile_size", 16},
                          {"seconds", {{"tiled", tiled}, {"tiled_single_thread", tiled_1t}, {"bruteforce", brute}}},
                          {"speedup", speedup},
                          {"speedup_single_thread", speedup_1t},
                          {"max_abs_diff", diff},
                          {"alpha_coverage", static_cast<double>(covered) / tiled_map.pixel_count()}};
    const fs::path dir(SPLATCTL_BENCH_DIR);
    fs::create_directories(dir);
    std::ofstream(dir / "render_benchmark.json") << report.dump(2) << "\n";
    {
        std::ofstream md(dir / "render_benchmark.md");
        md << "# Render benchmark\n\n"
           << "Demo head, 256x256 UV field (" << g.size() << " Gaussians), 512x512x8 output, tile 16.\n"
           << "Hardware threads: " << std::thread::hardware_concurrency() << ".\n\n"
           << "| path | seconds |\n|---|---|\n"
           << "| brute force | " << num(brute) << " |\n"
           << "| tiled (default threads) | " << num(tiled) << " |\n"
           << "| tiled (1 thread) | " << num(tiled_1t) << " |\n\n"
           << "Speedup " << num(speedup) << "x (single thread " << num(speedup_1t) << "x). "
           << "Max |tiled - brute| = " << num(diff) << ".\n\n"
           << "Regenerate with `build/tests/acceptance 8`.\n";
    }
    return {speedup >= 5.0 && diff < 1e-10,
            std::to_string(g.size()) + " gaussians at 512x512x8: brute " + num(brute) + " s, tiled " + num(tiled) +
                " s (" + num(speedup) + "x; 1 thread " + num(speedup_1t) + "x), report in bench/"};
}

Outcome determinism() {
    const int n = worker_count();
    const auto s = scenes::demo_scene(64, 128, 9);
    const auto g = embed(s.field, deform(s.model, s.state), s.mapping);
    bool renders = true;
    const auto base = render_tiled(g, s.camera, {16, 1, {}});
    for (int threads : {1, 2, n}) {
        const auto again = render_tiled(g, s.camera, {16, threads, {}});
        renders = renders && again.values == base.values && again.alpha == base.alpha;
    }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> up(base.values.size());
    for (auto &x : up) {
        x = u(rng);
    }
    const auto gb = backward(g, s.camera, up, s.field, {16, 1, {}});
    bool grads = true;
    for (int threads : {1, 2, n}) {
        const auto again = backward(g, s.camera, up, s.field, {16, threads, {}});
        grads = grads && again.d_raw_feature == gb.d_raw_feature && again.d_raw_opacity == gb.d_raw_opacity &&
                again.d_raw_scale == gb.d_raw_scale;
    }
    ExperimentConfig config;
    config.iters = 40;
    config.render.threads = 1;
    const auto model = make_demo_head();
    const auto t1 = run_direct_experiment(model, config).fit.loss_trace;
    const auto p1 = run_proxy_experiment(model, config).fit.loss_trace;
    config.render.threads = n;
    const auto tn = run_direct_experiment(model, config).fit.loss_trace;
    const auto pn = run_proxy_experiment(model, config).fit.loss_trace;
    const bool traces = t1 == tn && p1 == pn;
    auto yes = [](bool b) { return b ? "identical" : "DIFFER"; };
    return {renders && grads && traces, std::string("threads 1 vs ") + std::to_string(n) + ": renders " + yes(renders) +
                                            ", backward " + yes(grads) + ", direct/proxy loss traces " + yes(traces)};
}

struct FuzzTally {
    int variants = 0;
    int typed_errors = 0;
    int accepted = 0;
    int untyped = 0;
};

void fuzz(const std::vector<std::uint8_t> &bytes, const std::function<void(const fs::path &)> &load,
          const fs::path &scratch, std::uint64_t seed, int count, FuzzTally &tally) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) {
        auto b = bytes;
        switch (i % 4) {
        case 0: // truncate anywhere
            b.resize(rng() % b.size());
            break;
        case 1: // flip bytes inside magic, length prefix or header
            for (int k = 0; k < 3; ++k) {
                b[rng() % std::min<std::size_t>(b.size(), 12 + 256)] ^= static_cast<std::uint8_t>(1 + rng() % 255);
            }
            break;
        case 2: { // rewrite the header length
            const std::uint32_t len = static_cast<std::uint32_t>(rng());
            std::memcpy(b.data() + 8, &len, 4);
            break;
        }
        default: // garbage payload bytes or appended tail
            if (rng() % 2) {
                b.push_back(static_cast<std::uint8_t>(rng()));
            } else {
                for (int k = 0; k < 16; ++k) {
                    b[rng() % b.size()] = static_cast<std::uint8_t>(rng());
                }
            }
        }
        std::ofstream(scratch, std::ios::binary).write(reinterpret_cast<const char *>(b.data()),
                                                       static_cast<std::streamsize>(b.size()));
        ++tally.variants;
        try {
            load(scratch);
            ++tally.accepted;
        } catch (const Error &) {
            ++tally.typed_errors;
        } catch (...) {
            ++tally.untyped;
        }
    }
}

Outcome format_round_trips() {
    const fs::path dir = fs::temp_directory_path() / ("splatctl-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    bool bitwise = true;

    const auto model = make_demo_head();
    save_surface(model, dir / "a.gsrf");
    save_surface(load_surface(dir / "a.gsrf"), dir / "b.gsrf");
    bitwise = bitwise && container::read_file_bytes(dir / "a.gsrf") == container::read_file_bytes(dir / "b.gsrf");

    auto field = init_field(32, 8, 4, 0.05);
    field.raw_opacity[3] = -1.0 / 3.0;
    save_field(field, dir / "a.gsfd");
    const auto field_back = load_field(dir / "a.gsfd");
    save_field(field_back, dir / "b.gsfd");
    bitwise = bitwise && field_back.raw_feature == field.raw_feature && field_back.raw_opacity == field.raw_opacity &&
              field_back.raw_scale == field.raw_scale &&
              container::read_file_bytes(dir / "a.gsfd") == container::read_file_bytes(dir / "b.gsfd");

    const auto s = scenes::demo_scene(16, 40, 2);
    const auto map = render_tiled(embed(s.field, deform(s.model, s.state), s.mapping), s.camera);
    write_feature_map(map, dir / "a.gsfm");
    write_feature_map(read_feature_map(dir / "a.gsfm"), dir / "b.gsfm");
    bitwise = bitwise && container::read_file_bytes(dir / "a.gsfm") == container::read_file_bytes(dir / "b.gsfm");

    FuzzTally tally;
    fuzz(container::read_file_bytes(dir / "a.gsrf"), [](const fs::path &p) { load_surface(p); }, dir / "f.gsrf", 1,
         120, tally);
    fuzz(container::read_file_bytes(dir / "a.gsfd"), [](const fs::path &p) { load_field(p); }, dir / "f.gsfd", 2, 120,
         tally);
    fuzz(container::read_file_bytes(dir / "a.gsfm"), [](const fs::path &p) { read_feature_map(p); }, dir / "f.gsfm", 3,
         120, tally);
    fs::remove_all(dir);
    return {bitwise && tally.untyped == 0 && tally.variants >= 100,
            std::string("GSRF/GSFD/GSFM round trips ") + (bitwise ? "bitwise" : "NOT bitwise") + "; " +
                std::to_string(tally.variants) + " corrupted variants: " + std::to_string(tally.typed_errors) +
                " typed errors, " + std::to_string(tally.accepted) + " accepted (payload-only damage), " +
                std::to_string(tally.untyped) + " untyped"};
}

} // namespace

int main(int argc, char **argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"oracle equivalence", oracle_equivalence},
        {"gradient verification", gradient_verification},
        {"two-gaussian blend", two_gaussian_hand_case},
        {"3D-consistency sweep", consistency_sweep_check},
        {"cross-identity invariant", cross_identity},
        {"planted-field recovery", planted_recovery},
        {"indirect supervision", proxy_supervision},
        {"tiled performance", performance},
        {"determinism", determinism},
        {"format round trips", format_round_trips},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) {
            continue;
        }
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << "[" << (o.pass ? "PASS" : "FAIL") << "] " << id << ". " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
