// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

// Batch front end. Exit codes: 0 success, 1 check failure, 2 usage or input error.

#include "splatctl/container.hpp"
#include "splatctl/error.hpp"
#include "splatctl/fit.hpp"
#include "splatctl/formats.hpp"
#include "splatctl/gradients.hpp"
#include "splatctl/scenes.hpp"
#include "splatctl/views.hpp"

#include "CLI11.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace splatctl;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

/// Raised for bad flag values that CLI11 cannot express.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Prints one `key=value` summary line.
class Summary {
  public:
    template <typename T> Summary &add(const std::string &key, const T &value) {
        if constexpr (std::is_floating_point_v<T>) {
            items_.push_back(key + "=" + fmt::format("{}", value));
        } else if constexpr (std::is_same_v<T, bool>) {
            items_.push_back(key + "=" + (value ? "true" : "false"));
        } else {
            std::ostringstream os;
            os << value;
            items_.push_back(key + "=" + os.str());
        }
        return *this;
    }
    void print() const {
        for (std::size_t i = 0; i < items_.size(); ++i) {
            std::cout << (i ? " " : "") << items_[i];
        }
        std::cout << std::endl;
    }

  private:
    std::vector<std::string> items_;
};

/// Inline JSON if the text parses, otherwise a path to a JSON file.
json json_arg(const std::string &text, const std::string &flag) {
    auto inline_value = json::parse(text, nullptr, false);
    if (!inline_value.is_discarded()) {
        return inline_value;
    }
    std::ifstream in(text);
    if (!in) {
        throw UsageError(flag + ": '" + text + "' is neither inline JSON nor a readable file");
    }
    auto from_file = json::parse(in, nullptr, false);
    if (from_file.is_discarded()) {
        throw UsageError(flag + ": file '" + text + "' is not valid JSON");
    }
    return from_file;
}

std::vector<double> coefficients_arg(const std::string &text, const std::string &flag) {
    if (text.empty()) {
        return {};
    }
    const auto j = json_arg(text, flag);
    if (!j.is_array()) {
        throw UsageError(flag + " must be a JSON array of numbers");
    }
    std::vector<double> out;
    for (const auto &x : j) {
        if (!x.is_number()) {
            throw UsageError(flag + " must be a JSON array of numbers");
        }
        out.push_back(x.get<double>());
    }
    return out;
}

Vec3 vec3_arg(const json &j, const std::string &what) {
    if (!j.is_array() || j.size() != 3) {
        throw UsageError(what + " must be an array of 3 numbers");
    }
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

/// {"rotation": [[..],[..],[..]], "translation": [..]} or {"yaw", "pitch", "roll" (degrees), "translation"}.
RigidPose pose_arg(const std::string &text) {
    if (text.empty()) {
        return RigidPose::identity();
    }
    const auto j = json_arg(text, "--pose");
    try {
        const Vec3 t = j.contains("translation") ? vec3_arg(j.at("translation"), "--pose translation") : Vec3::Zero();
        RigidPose pose;
        if (j.contains("rotation")) {
            const auto &r = j.at("rotation");
            for (int row = 0; row < 3; ++row) {
                for (int col = 0; col < 3; ++col) {
                    pose.rotation(row, col) = r.at(row).at(col).get<double>();
                }
            }
            pose.translation = t;
        } else {
            pose = RigidPose::from_euler_degrees(j.value("yaw", 0.0), j.value("pitch", 0.0), j.value("roll", 0.0), t);
        }
        pose.validate();
        return pose;
    } catch (const json::exception &e) {
        throw UsageError(std::string("--pose: ") + e.what());
    }
}

/// Full intrinsics/extrinsics object, or {"yaw", "pitch", "radius", "width", "height"} on the default orbit.
Camera camera_arg(const std::string &text) {
    const auto j = json_arg(text, "--camera");
    if (!j.is_object()) {
        throw UsageError("--camera must be a JSON object");
    }
    if (j.contains("fx")) {
        return camera_from_json(j);
    }
    try {
        ViewSpec view;
        view.yaw = j.value("yaw", 0.0);
        view.pitch = j.value("pitch", 0.0);
        view.radius = j.value("radius", view.radius);
        const int width = j.value("width", 512);
        const int height = j.value("height", width);
        if (width < 1 || height < 1) {
            throw UsageError("--camera width and height must be >= 1");
        }
        return camera_from_view(view, Intrinsics::for_size(width, height));
    } catch (const json::exception &e) {
        throw UsageError(std::string("--camera: ") + e.what());
    }
}

void write_json(const json &j, const fs::path &path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
    }
    out << j.dump(2) << "\n";
}

std::string file_hash(const fs::path &path) {
    return container::hex64(container::fnv1a64(container::read_file_bytes(path)));
}

std::vector<int> channel_list(const std::string &text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception &) {
            throw UsageError("--png-channels: '" + item + "' is not an integer");
        }
    }
    return out;
}

/// The surface/field/mapping trio most commands accept, defaulting to the built-in demo head.
struct SceneInputs {
    std::string surface;
    std::string field;
    std::string mapping;
    int resolution = 64;
    int channels = kDefaultFieldChannels;
    std::uint64_t field_seed = 1;

    void add_to(CLI::App *cmd) {
        cmd->add_option("--surface", surface, "GSRF surface container (default: built-in demo head)");
        cmd->add_option("--field", field, "GSFD field checkpoint (default: freshly initialised field)");
        cmd->add_option("--mapping", mapping, "GSUV mapping cache (default: built from the surface)");
        cmd->add_option("--resolution", resolution, "UV resolution when no field is given")->capture_default_str();
        cmd->add_option("--channels", channels, "Feature channels when no field is given")->capture_default_str();
        cmd->add_option("--field-seed", field_seed, "Seed when no field is given")->capture_default_str();
    }

    SurfaceModel load_model() const { return surface.empty() ? make_demo_head() : load_surface(surface); }

    GaussianFieldUV load_or_init_field(const SurfaceModel &model) const {
        if (!field.empty()) {
            return load_field(field);
        }
        if (resolution < 1) {
            throw UsageError("resolution must be ≥ 1");
        }
        return init_field(resolution, channels, field_seed, default_initial_scale(model));
    }

    UVMapping load_or_build_mapping(const SurfaceModel &model, int res) const {
        return mapping.empty() ? build_uv_mapping(model, res) : read_uv_mapping(mapping);
    }
};


/// Render options shared by every command; `--threads` lands here.
RenderOptions g_render;

std::string trace_path_for(const fs::path &manifest) {
    auto p = manifest;
    return p.replace_extension(".trace.csv").string();
}

std::string checkpoint_path_for(const fs::path &manifest) {
    auto p = manifest;
    return p.replace_extension(".field.gsfd").string();
}

// ---------------------------------------------------------------------------

int run_build_uv(const std::string &surface, int resolution, const std::string &out) {
    if (resolution < 1) {
        throw UsageError("resolution must be ≥ 1");
    }
    const auto model = load_surface(surface);
    const auto mapping = build_uv_mapping(model, resolution);
    write_uv_mapping(mapping, out);
    Summary()
        .add("out", out)
        .add("resolution", resolution)
        .add("texels", mapping.entries.size())
        .add("mapped_texels", mapping.mapped_count())
        .add("fnv1a64", file_hash(out))
        .print();
    return 0;
}

int run_init_field(const SceneInputs &in, double initial_scale, const std::string &out) {
    if (in.resolution < 1) {
        throw UsageError("resolution must be ≥ 1");
    }
    const double s0 = initial_scale > 0.0 ? initial_scale : default_initial_scale(in.load_model());
    const auto field = init_field(in.resolution, in.channels, in.field_seed, s0);
    save_field(field, out);
    Summary()
        .add("out", out)
        .add("resolution", field.resolution)
        .add("channels", field.channels)
        .add("initial_scale", s0)
        .add("fnv1a64", file_hash(out))
        .print();
    return 0;
}

struct RenderArgs {
    SceneInputs in;
    std::string beta;
    std::string psi;
    std::string pose;
    std::string camera;
    std::string out;
    std::string png_channels;
    std::string png_prefix;
    bool oracle = false;
    bool float32 = false;
};

int run_render(const RenderArgs &a) {
    const auto model = a.in.load_model();
    const auto field = a.in.load_or_init_field(model);
    const auto mapping = a.in.load_or_build_mapping(model, field.resolution);
    if (mapping.resolution != field.resolution) {
        throw Error(ErrorCode::ResolutionMismatch, "mapping resolution " + std::to_string(mapping.resolution) +
                                                       " does not match field resolution " +
                                                       std::to_string(field.resolution));
    }
    auto beta = coefficients_arg(a.beta, "--beta");
    auto psi = coefficients_arg(a.psi, "--psi");
    if (a.beta.empty()) {
        beta.assign(static_cast<std::size_t>(model.n_shape), 0.0);
    }
    if (a.psi.empty()) {
        psi.assign(static_cast<std::size_t>(model.n_expr), 0.0);
    }
    const auto cam = camera_arg(a.camera);
    const auto gaussians = embed(field, deform(model, beta, psi, pose_arg(a.pose)), mapping);

    auto options = g_render;
    options.precision = a.float32 ? Precision::Float32 : Precision::Float64;
    if (a.oracle && a.float32) {
        throw UsageError("--oracle and --float32 are mutually exclusive");
    }
    const auto map = a.oracle ? render_bruteforce(gaussians, cam) : render_tiled(gaussians, cam, options);
    write_feature_map(map, a.out);

    std::vector<std::string> images;
    for (int c : channel_list(a.png_channels)) {
        const fs::path base = a.png_prefix.empty() ? fs::path(a.out).replace_extension("") : fs::path(a.png_prefix);
        const std::string path = base.string() + "_c" + std::to_string(c) + ".png";
        export_channel_image(map, c, path);
        images.push_back(path);
    }
    std::size_t covered = 0;
    for (double x : map.alpha) {
        covered += x > 0.5 ? 1 : 0;
    }
    Summary s;
    s.add("out", a.out)
        .add("width", map.width)
        .add("height", map.height)
        .add("channels", map.channels)
        .add("gaussians", gaussians.size())
        .add("renderer", a.oracle ? "bruteforce" : (a.float32 ? "tiled-f32" : "tiled"))
        .add("coverage", static_cast<double>(covered) / static_cast<double>(map.pixel_count()))
        .add("images", images.size())
        .add("fnv1a64", file_hash(a.out));
    s.print();
    return 0;
}

int run_gradcheck(std::uint64_t seed, double h, const std::string &report_path) {
    if (!(h > 0.0)) {
        throw UsageError("--h must be > 0");
    }
    GradCheckOptions options;
    options.render = g_render;
    json fixtures = json::array();
    double worst = 0.0;
    std::string worst_fixture;
    std::size_t checked = 0;
    bool pass = true;
    for (const auto &scene : scenes::gradient_fixtures()) {
        const auto r = grad_check(scene.field, scene.model, scene.mapping, scene.state, scene.camera, seed, h, options);
        auto entry = r.to_json();
        entry["fixture"] = scene.name;
        fixtures.push_back(entry);
        checked += r.checked;
        pass = pass && r.pass;
        if (r.max_rel_err >= worst) {
            worst = r.max_rel_err;
            worst_fixture = scene.name;
        }
    }
    if (!report_path.empty()) {
        write_json({{"seed", seed},
                    {"h", h},
                    {"tolerance", options.tolerance},
                    {"max_rel_err", worst},
                    {"checked", checked},
                    {"pass", pass},
                    {"fixtures", fixtures}},
                   report_path);
    }
    Summary()
        .add("fixtures", fixtures.size())
        .add("checked", checked)
        .add("max_rel_err", worst)
        .add("worst_fixture", worst_fixture)
        .add("pass", pass)
        .print();
    return pass ? 0 : kExitCheckFailed;
}

struct FitArgs {
    std::string mode;
    std::string manifest;
    std::string surface;
    ExperimentConfig config;
};

json view_list(const std::vector<TrainingView> &views) {
    json out = json::array();
    for (const auto &v : views) {
        out.push_back({{"camera", camera_to_json(v.camera)}, {"beta", v.state.beta}, {"psi", v.state.psi}});
    }
    return out;
}

void write_trace(const std::vector<double> &trace, const std::string &path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
    }
    out << "iter,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << i << "," << fmt::format("{}", trace[i]) << "\n";
    }
}

int run_fit(const FitArgs &a) {
    if (a.config.resolution < 1) {
        throw UsageError("resolution must be ≥ 1");
    }
    if (a.config.iters < 1 || a.config.n_views < 1 || a.config.image_size < 1 || a.config.channels < 1) {
        throw UsageError("--iters, --n-views, --image-size and --channels must be ≥ 1");
    }
    const auto model = a.surface.empty() ? make_demo_head() : load_surface(a.surface);
    auto config = a.config;
    config.render = g_render;

    const fs::path manifest_path(a.manifest);
    if (manifest_path.has_parent_path()) {
        fs::create_directories(manifest_path.parent_path());
    }
    const auto trace_path = trace_path_for(manifest_path);
    const auto checkpoint_path = checkpoint_path_for(manifest_path);

    json manifest{{"mode", a.mode},
                  {"config", config.to_json()},
                  {"loss_trace_path", fs::path(trace_path).filename().string()},
                  {"checkpoints", {fs::path(checkpoint_path).filename().string()}}};
    Summary s;
    bool pass = false;
    const FitResult *fit = nullptr;
    DirectExperiment direct;
    ProxyExperiment proxy;
    if (a.mode == "direct") {
        direct = run_direct_experiment(model, config);
        fit = &direct.fit;
        manifest["views"] = view_list(direct.views);
        manifest["heldout_loss"] = direct.heldout_loss;
    } else {
        proxy = run_proxy_experiment(model, config);
        fit = &proxy.fit;
        manifest["views"] = view_list(proxy.views);
        manifest["initial_variance"] = proxy.initial_variance;
        manifest["final_variance"] = proxy.final_variance;
        manifest["expression_max_diff"] = proxy.expression_max_diff;
    }
    const auto &trace = fit->loss_trace;
    const double initial = trace.front();
    const double final_loss = trace.back();
    const double reduction = final_loss > 0.0 ? initial / final_loss : std::numeric_limits<double>::infinity();
    pass = reduction >= 100.0;
    s.add("mode", a.mode).add("iters", trace.size()).add("initial_loss", initial).add("final_loss", final_loss);
    s.add("reduction", reduction);
    if (a.mode == "direct") {
        s.add("heldout_loss", direct.heldout_loss);
    } else {
        const double ratio = proxy.final_variance / proxy.initial_variance;
        pass = pass && ratio >= 10.0;
        manifest["variance_ratio"] = ratio;
        s.add("variance_ratio", ratio);
    }
    manifest["initial_loss"] = initial;
    manifest["final_loss"] = final_loss;
    manifest["reduction"] = reduction;
    manifest["pass"] = pass;

    write_trace(trace, trace_path);
    save_field(fit->field, checkpoint_path);
    write_json(manifest, manifest_path);
    s.add("manifest", a.manifest).add("pass", pass).print();
    return pass ? 0 : kExitCheckFailed;
}

struct SynthArgs {
    int n = kDefaultViewsPerSubject;
    std::uint64_t seed = 0;
    std::string out_manifest;
    std::string subject = "subject-000";
    std::string label = "synthetic";
    std::string render_dir;
    int image_size = 512;
    double radius = 3.2;
    SceneInputs in;
};

int run_synth_views(const SynthArgs &a) {
    if (a.n < 1) {
        throw UsageError("--n must be ≥ 1");
    }
    if (a.image_size < 1) {
        throw UsageError("--image-size must be ≥ 1");
    }
    SampleLabel label;
    if (a.label == "real") {
        label.kind = SampleKind::Real;
    } else if (a.label == "synthetic") {
        label.kind = SampleKind::Synthetic;
    } else {
        throw UsageError("--label must be 'real' or 'synthetic'");
    }
    const auto views = sample_views(a.n, kDefaultYawRange, kDefaultPitchRange, a.radius, a.seed,
                                    Intrinsics::for_size(a.image_size, a.image_size));

    std::optional<EmbeddedGaussians> gaussians;
    if (!a.render_dir.empty()) {
        const auto model = a.in.load_model();
        const auto field = a.in.load_or_init_field(model);
        const auto mapping = a.in.load_or_build_mapping(model, field.resolution);
        gaussians = embed(field, deform(model, SurfaceState::neutral(model)), mapping);
        fs::create_directories(a.render_dir);
    }
    const fs::path manifest_path(a.out_manifest);
    if (manifest_path.has_parent_path()) {
        fs::create_directories(manifest_path.parent_path());
    }
    std::ofstream out(manifest_path);
    if (!out) {
        throw Error(ErrorCode::IoFailure, "cannot write '" + a.out_manifest + "'");
    }
    bool in_range = true;
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto &v = views[i];
        in_range = in_range && v.spec.yaw >= kDefaultYawRange.lo && v.spec.yaw <= kDefaultYawRange.hi &&
                   v.spec.pitch >= kDefaultPitchRange.lo && v.spec.pitch <= kDefaultPitchRange.hi;
        std::string map_path;
        if (gaussians) {
            map_path = (fs::path(a.render_dir) / fmt::format("{}_{:03}.gsfm", a.subject, i)).string();
            write_feature_map(render_tiled(*gaussians, v.camera, g_render), map_path);
        }
        out << dataset_record(a.subject, v.spec, v.camera, label, map_path).dump() << "\n";
    }
    out.close();
    Summary()
        .add("out_manifest", a.out_manifest)
        .add("entries", views.size())
        .add("label", label.name())
        .add("token_id", label.token_id())
        .add("rendered", gaussians.has_value())
        .add("in_range", in_range)
        .print();
    return in_range ? 0 : kExitCheckFailed;
}

struct SweepArgs {
    int n_views = kDefaultViewsPerSubject;
    std::uint64_t seed = 0;
    bool identical = false;
    double corrupt_fx = 0.0;
    bool no_render = false;
    int image_size = 128;
    std::string report;
    SceneInputs in;
};

int run_sweep(const SweepArgs &a) {
    if (a.n_views < 2) {
        throw UsageError("--n-views must be ≥ 2");
    }
    if (a.image_size < 1) {
        throw UsageError("--image-size must be ≥ 1");
    }
    const auto model = a.in.load_model();
    const auto field = a.in.load_or_init_field(model);
    const auto mapping = a.in.load_or_build_mapping(model, field.resolution);
    SweepOptions options;
    options.identical_views = a.identical;
    options.fx_corruption = a.corrupt_fx;
    options.render = !a.no_render;
    options.render_options = g_render;
    options.intrinsics = Intrinsics::for_size(a.image_size, a.image_size);
    const auto report = consistency_sweep(field, model, mapping, SurfaceState::neutral(model), a.n_views, a.seed, options);
    if (!a.report.empty()) {
        write_json(report.to_json(), a.report);
    }
    Summary()
        .add("n_views", report.n_views)
        .add("pairs_checked", report.pairs_checked)
        .add("points_checked", report.points_checked)
        .add("max_reproj_err", report.max_reproj_err)
        .add("pass", report.pass)
        .print();
    return report.pass ? 0 : kExitCheckFailed;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"splatctl: UV-anchored Gaussian feature fields on a deformable head surface"};
    app.require_subcommand(1);
    app.add_option("--threads", g_render.threads, "Render worker threads (default: GSPLAT_THREADS, else all cores)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--tile-size", g_render.tile_size, "Rasterizer tile edge in pixels")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    std::function<int()> action;

    auto *build_uv = app.add_subcommand("build-uv", "Build and cache the texel-to-face UV mapping");
    std::string bu_surface, bu_out;
    int bu_res = kDefaultFieldResolution;
    build_uv->add_option("--surface", bu_surface, "GSRF surface container")->required();
    build_uv->add_option("--resolution", bu_res, "UV grid resolution")->capture_default_str();
    build_uv->add_option("--out", bu_out, "Output GSUV mapping file")->required();
    build_uv->callback([&] { action = [&] { return run_build_uv(bu_surface, bu_res, bu_out); }; });

    auto *init = app.add_subcommand("init-field", "Write a freshly initialised field checkpoint");
    SceneInputs if_in;
    if_in.resolution = kDefaultFieldResolution;
    double if_scale = 0.0;
    std::string if_out;
    init->add_option("--surface", if_in.surface, "Surface used for the default initial scale (default: demo head)");
    init->add_option("--resolution", if_in.resolution, "UV grid resolution")->capture_default_str();
    init->add_option("--channels", if_in.channels, "Feature channels")->capture_default_str();
    init->add_option("--seed", if_in.field_seed, "Feature initialisation seed")->capture_default_str();
    init->add_option("--initial-scale", if_scale, "World-space scale (default: 0.7 x median edge length)");
    init->add_option("--out", if_out, "Output GSFD file")->required();
    init->callback([&] { action = [&] { return run_init_field(if_in, if_scale, if_out); }; });

    auto *render = app.add_subcommand("render", "Splat a field into a GSFM feature map");
    RenderArgs ra;
    ra.in.add_to(render);
    render->add_option("--beta", ra.beta, "Shape coefficients: inline JSON array or file (default: zeros)");
    render->add_option("--psi", ra.psi, "Expression coefficients: inline JSON array or file (default: zeros)");
    render->add_option("--pose", ra.pose,
                       "Head pose: {\"rotation\":3x3,\"translation\":[..]} or {\"yaw\",\"pitch\",\"roll\"} in degrees");
    render->add_option("--camera", ra.camera,
                       "Camera JSON {fx,fy,cx,cy,rotation,translation,width,height,near} or "
                       "{yaw,pitch,radius,width,height} on the default orbit")
        ->required();
    render->add_option("--out", ra.out, "Output GSFM file")->required();
    render->add_option("--png-channels", ra.png_channels, "Comma-separated channels to export as 8-bit PNG");
    render->add_option("--png-prefix", ra.png_prefix, "Path prefix for PNG exports (default: --out without extension)");
    render->add_flag("--oracle", ra.oracle, "Use the brute-force reference renderer");
    render->add_flag("--float32", ra.float32, "Use the single-precision tiled renderer");
    render->callback([&] { action = [&] { return run_render(ra); }; });

    auto *gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the backward pass on built-in fixtures");
    std::uint64_t gc_seed = 7;
    double gc_h = 1e-5;
    std::string gc_report;
    gradcheck->set_help_flag("--help", "Print this help message and exit");
    gradcheck->add_option("--seed", gc_seed, "Upstream gradient seed")->capture_default_str();
    gradcheck->add_option("--h", gc_h, "Central difference step")->capture_default_str();
    gradcheck->add_option("--report", gc_report, "Write the JSON report here");
    gradcheck->callback([&] { action = [&] { return run_gradcheck(gc_seed, gc_h, gc_report); }; });

    auto *fit = app.add_subcommand("fit", "Run the planted-field (direct) or proxy-decoder experiment");
    FitArgs fa;
    fit->add_option("--mode", fa.mode, "direct or proxy")->required()->check(CLI::IsMember({"direct", "proxy"}));
    fit->add_option("--manifest", fa.manifest, "Output experiment manifest (JSON); trace CSV and checkpoint go beside it")
        ->required();
    fit->add_option("--surface", fa.surface, "GSRF surface container (default: demo head)");
    fit->add_option("--resolution", fa.config.resolution, "UV grid resolution")->capture_default_str();
    fit->add_option("--channels", fa.config.channels, "Feature channels")->capture_default_str();
    fit->add_option("--image-size", fa.config.image_size, "Square training image size")->capture_default_str();
    fit->add_option("--n-views", fa.config.n_views, "Training views")->capture_default_str();
    fit->add_option("--iters", fa.config.iters, "Optimizer iterations")->capture_default_str();
    fit->add_option("--lr", fa.config.lr, "Adam learning rate")->capture_default_str();
    fit->add_option("--hidden-seed", fa.config.hidden_seed, "Planted field seed")->capture_default_str();
    fit->add_option("--init-seed", fa.config.init_seed, "Learned field initialisation seed")->capture_default_str();
    fit->add_option("--view-seed", fa.config.view_seed, "Training view seed")->capture_default_str();
    fit->add_option("--decoder-seed", fa.config.decoder_seed, "Proxy decoder seed")->capture_default_str();
    fit->callback([&] { action = [&] { return run_fit(fa); }; });

    auto *synth = app.add_subcommand("synth-views", "Sample a multi-view dataset manifest (JSON lines)");
    SynthArgs sa;
    synth->add_option("--n", sa.n, "Views per subject")->capture_default_str();
    synth->add_option("--seed", sa.seed, "View sampling seed")->capture_default_str();
    synth->add_option("--out-manifest", sa.out_manifest, "Output JSONL manifest")->required();
    synth->add_option("--subject", sa.subject, "Subject id")->capture_default_str();
    synth->add_option("--label", sa.label, "real or synthetic")->capture_default_str();
    synth->add_option("--radius", sa.radius, "Camera orbit radius")->capture_default_str();
    synth->add_option("--image-size", sa.image_size, "Square image size")->capture_default_str();
    synth->add_option("--render-dir", sa.render_dir, "Also render each view's feature map into this directory");
    sa.in.add_to(synth);
    synth->callback([&] { action = [&] { return run_synth_views(sa); }; });

    auto *sweep = app.add_subcommand("sweep", "Multi-view reprojection consistency sweep");
    SweepArgs wa;
    wa.in.resolution = 32;
    sweep->add_option("--n-views", wa.n_views, "Number of sampled views")->capture_default_str();
    sweep->add_option("--seed", wa.seed, "View sampling seed")->capture_default_str();
    sweep->add_flag("--identical-views", wa.identical, "Use the same camera for every view");
    sweep->add_option("--corrupt-fx", wa.corrupt_fx, "Relative fx error injected as a negative control, e.g. 0.01")
        ->capture_default_str();
    sweep->add_flag("--no-render", wa.no_render, "Skip per-view renders");
    sweep->add_option("--image-size", wa.image_size, "Square image size")->capture_default_str();
    sweep->add_option("--report", wa.report, "Write the JSON report here");
    wa.in.add_to(sweep);
    sweep->callback([&] { action = [&] { return run_sweep(wa); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }
    try {
        return action();
    } catch (const UsageError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
