// Copyright Contributors to the splatctl Project
// SPDX-License-Identifier: Apache-2.0

#include "splatctl/surface.hpp"

#include "splatctl/container.hpp"
#include "splatctl/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace splatctl {

namespace {

constexpr char kSurfaceMagic[] = "GSRF0001";
constexpr double kEdgeTolerance = 1e-9;
constexpr double kOrthoTolerance = 1e-9;

[[noreturn]] void malformed(const std::string &what) { throw Error(ErrorCode::MalformedContainer, what); }

void check_rotation(const Mat3 &r, ErrorCode code, const char *name) {
    if (!r.allFinite() || ((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > kOrthoTolerance ||
        std::abs(r.determinant() - 1.0) > kOrthoTolerance) {
        throw Error(code, std::string(name) + " is not a proper rotation");
    }
}

} // namespace

void SurfaceModel::validate() const {
    const auto nv = num_vertices();
    if (nv == 0) {
        malformed("template_vertices: mesh has no vertices");
    }
    for (const auto &v : template_vertices) {
        if (!v.allFinite()) {
            malformed("template_vertices: non-finite coordinate");
        }
    }
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto &face = faces[f];
        for (auto idx : face) {
            if (idx >= nv) {
                malformed("faces: face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                          " but num_vertices is " + std::to_string(nv));
            }
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            malformed("faces: face " + std::to_string(f) + " repeats a vertex index");
        }
    }
    if (shape_basis.size() != nv * 3 * n_shape) {
        malformed("shape_basis: expected " + std::to_string(nv * 3 * n_shape) + " entries, found " +
                  std::to_string(shape_basis.size()));
    }
    if (expr_basis.size() != nv * 3 * n_expr) {
        malformed("expr_basis: expected " + std::to_string(nv * 3 * n_expr) + " entries, found " +
                  std::to_string(expr_basis.size()));
    }
    if (!std::all_of(shape_basis.begin(), shape_basis.end(), [](double x) { return std::isfinite(x); })) {
        malformed("shape_basis: non-finite entry");
    }
    if (!std::all_of(expr_basis.begin(), expr_basis.end(), [](double x) { return std::isfinite(x); })) {
        malformed("expr_basis: non-finite entry");
    }
    if (uv_coords.size() != faces.size() * 3) {
        malformed("uv_coords: expected " + std::to_string(faces.size() * 3) + " corners, found " +
                  std::to_string(uv_coords.size()));
    }
    for (std::size_t i = 0; i < uv_coords.size(); ++i) {
        const auto &uv = uv_coords[i];
        if (!(uv.x() >= 0.0 && uv.x() <= 1.0 && uv.y() >= 0.0 && uv.y() <= 1.0)) {
            malformed("uv_coords: corner " + std::to_string(i) + " lies outside [0,1]^2");
        }
    }
}

RigidPose RigidPose::from_euler_degrees(double yaw, double pitch, double roll, const Vec3 &t) {
    constexpr double deg = std::numbers::pi / 180.0;
    RigidPose pose;
    pose.rotation = (Eigen::AngleAxisd(yaw * deg, Vec3::UnitY()) * Eigen::AngleAxisd(pitch * deg, Vec3::UnitX()) *
                     Eigen::AngleAxisd(roll * deg, Vec3::UnitZ()))
                        .toRotationMatrix();
    pose.translation = t;
    return pose;
}

void RigidPose::validate() const {
    check_rotation(rotation, ErrorCode::InvalidArgument, "pose.rotation");
    if (!translation.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "pose.translation is not finite");
    }
}

SurfaceState SurfaceState::neutral(const SurfaceModel &model) {
    return {std::vector<double>(model.n_shape, 0.0), std::vector<double>(model.n_expr, 0.0), RigidPose::identity()};
}

std::size_t UVMapping::mapped_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto &e) { return e.has_value(); }));
}

// ---------------------------------------------------------------------------
// Container I/O

void save_surface(const SurfaceModel &model, const std::filesystem::path &path) {
    model.validate();
    const std::size_t nv = model.num_vertices();
    const std::size_t nf = model.num_faces();

    container::Writer writer(kSurfaceMagic);
    container::Json offsets;
    std::vector<double> flat;
    flat.reserve(nv * 3);
    for (const auto &v : model.template_vertices) {
        flat.insert(flat.end(), {v.x(), v.y(), v.z()});
    }
    offsets["template_vertices"] = writer.payload_size();
    writer.put_f64(flat);
    offsets["shape_basis"] = writer.payload_size();
    writer.put_f64(model.shape_basis);
    offsets["expr_basis"] = writer.payload_size();
    writer.put_f64(model.expr_basis);

    flat.clear();
    for (const auto &uv : model.uv_coords) {
        flat.insert(flat.end(), {uv.x(), uv.y()});
    }
    offsets["uv_coords"] = writer.payload_size();
    writer.put_f64(flat);

    std::vector<std::uint32_t> indices;
    indices.reserve(nf * 3);
    for (const auto &f : model.faces) {
        indices.insert(indices.end(), f.begin(), f.end());
    }
    offsets["faces"] = writer.payload_size();
    writer.put_u32(indices);

    container::Json header = {{"num_vertices", nv},
                              {"num_faces", nf},
                              {"n_shape", model.n_shape},
                              {"n_expr", model.n_expr},
                              {"offsets", offsets}};
    writer.write(header, path);
}

SurfaceModel load_surface(const std::filesystem::path &path) {
    try {
        container::Reader reader(path, kSurfaceMagic);
        const auto &h = reader.header();
        const auto src = reader.source();
        // Counts are bounded by the payload so a corrupt header cannot trigger huge allocations.
        const std::uint64_t cap = reader.payload_size();
        const auto nv = container::header_count(h, "num_vertices", cap, src);
        const auto nf = container::header_count(h, "num_faces", cap, src);
        const auto ns = container::header_count(h, "n_shape", cap, src);
        const auto ne = container::header_count(h, "n_expr", cap, src);

        const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() / 16;
        const auto vert_bytes = container::checked_product({nv, 3, 8}, lim, "template_vertices");
        const auto shape_bytes = container::checked_product({nv, 3, ns, 8}, lim, "shape_basis");
        const auto expr_bytes = container::checked_product({nv, 3, ne, 8}, lim, "expr_basis");
        const auto uv_bytes = container::checked_product({nf, 6, 8}, lim, "uv_coords");
        const auto face_bytes = container::checked_product({nf, 3, 4}, lim, "faces");

        const auto offsets_it = h.find("offsets");
        if (offsets_it == h.end() || !offsets_it->is_object()) {
            malformed("header: offsets table missing");
        }
        std::uint64_t expected_offset = 0;
        for (const auto &[name, bytes] :
             {std::pair{"template_vertices", vert_bytes}, std::pair{"shape_basis", shape_bytes},
              std::pair{"expr_basis", expr_bytes}, std::pair{"uv_coords", uv_bytes}, std::pair{"faces", face_bytes}}) {
            if (container::header_count(*offsets_it, name, cap, src) != expected_offset) {
                malformed(std::string("offsets.") + name + ": expected " + std::to_string(expected_offset));
            }
            expected_offset += bytes;
        }
        reader.expect_payload_size(expected_offset);

        SurfaceModel model;
        model.n_shape = ns;
        model.n_expr = ne;
        const auto verts = reader.take_f64(nv * 3);
        model.template_vertices.resize(nv);
        for (std::size_t v = 0; v < nv; ++v) {
            model.template_vertices[v] = Vec3(verts[3 * v], verts[3 * v + 1], verts[3 * v + 2]);
        }
        model.shape_basis = reader.take_f64(nv * 3 * ns);
        model.expr_basis = reader.take_f64(nv * 3 * ne);
        const auto uvs = reader.take_f64(nf * 6);
        model.uv_coords.resize(nf * 3);
        for (std::size_t i = 0; i < nf * 3; ++i) {
            model.uv_coords[i] = Vec2(uvs[2 * i], uvs[2 * i + 1]);
        }
        const auto idx = reader.take_u32(nf * 3);
        model.faces.resize(nf);
        for (std::size_t f = 0; f < nf; ++f) {
            model.faces[f] = {idx[3 * f], idx[3 * f + 1], idx[3 * f + 2]};
        }
        model.validate();
        return model;
    } catch (const Error &e) {
        if (e.code() == ErrorCode::MissingFile || e.code() == ErrorCode::MalformedContainer) {
            throw;
        }
        malformed(e.what());
    }
}

// ---------------------------------------------------------------------------
// Geometry

DeformedMesh deform(const SurfaceModel &model, std::span<const double> beta, std::span<const double> psi,
                    const RigidPose &pose) {
    if (beta.size() != model.n_shape) {
        throw Error(ErrorCode::CoefficientLengthMismatch, "beta has " + std::to_string(beta.size()) +
                                                              " coefficients, model expects " +
                                                              std::to_string(model.n_shape));
    }
    if (psi.size() != model.n_expr) {
        throw Error(ErrorCode::CoefficientLengthMismatch, "psi has " + std::to_string(psi.size()) +
                                                              " coefficients, model expects " +
                                                              std::to_string(model.n_expr));
    }
    DeformedMesh mesh;
    mesh.faces = model.faces;
    mesh.vertices.resize(model.num_vertices());
    const std::size_t ns = model.n_shape;
    const std::size_t ne = model.n_expr;
    for (std::size_t v = 0; v < model.num_vertices(); ++v) {
        Vec3 p = model.template_vertices[v];
        for (int a = 0; a < 3; ++a) {
            const double *shape_row = model.shape_basis.data() + (v * 3 + a) * ns;
            const double *expr_row = model.expr_basis.data() + (v * 3 + a) * ne;
            double offset = 0.0;
            for (std::size_t k = 0; k < ns; ++k) {
                offset += shape_row[k] * beta[k];
            }
            for (std::size_t k = 0; k < ne; ++k) {
                offset += expr_row[k] * psi[k];
            }
            p[a] += offset;
        }
        mesh.vertices[v] = pose.rotation * p + pose.translation;
    }
    return mesh;
}

UVMapping build_uv_mapping(const SurfaceModel &model, int resolution) {
    if (resolution < 1) {
        throw Error(ErrorCode::InvalidDimension, "resolution must be >= 1");
    }
    UVMapping mapping;
    mapping.resolution = resolution;
    mapping.entries.assign(static_cast<std::size_t>(resolution) * resolution, std::nullopt);
    const double res = resolution;

    // Faces are visited in index order and never overwrite, so shared edges go to the lower face id.
    for (std::size_t f = 0; f < model.num_faces(); ++f) {
        const Vec2 &a = model.uv_coords[3 * f];
        const Vec2 &b = model.uv_coords[3 * f + 1];
        const Vec2 &c = model.uv_coords[3 * f + 2];
        const Vec2 e0 = b - a;
        const Vec2 e1 = c - a;
        const double det = e0.x() * e1.y() - e1.x() * e0.y();
        if (std::abs(det) < 1e-300) {
            continue;
        }
        const double umin = std::min({a.x(), b.x(), c.x()});
        const double umax = std::max({a.x(), b.x(), c.x()});
        const double vmin = std::min({a.y(), b.y(), c.y()});
        const double vmax = std::max({a.y(), b.y(), c.y()});
        const int col0 = std::max(0, static_cast<int>(std::floor(umin * res - 0.5)));
        const int col1 = std::min(resolution - 1, static_cast<int>(std::ceil(umax * res - 0.5)));
        const int row0 = std::max(0, static_cast<int>(std::floor(vmin * res - 0.5)));
        const int row1 = std::min(resolution - 1, static_cast<int>(std::ceil(vmax * res - 0.5)));

        for (int row = row0; row <= row1; ++row) {
            for (int col = col0; col <= col1; ++col) {
                auto &entry = mapping.entries[static_cast<std::size_t>(row) * resolution + col];
                if (entry) {
                    continue;
                }
                const Vec2 p((col + 0.5) / res, (row + 0.5) / res);
                const Vec2 d = p - a;
                double b1 = (d.x() * e1.y() - e1.x() * d.y()) / det;
                double b2 = (e0.x() * d.y() - d.x() * e0.y()) / det;
                double b0 = 1.0 - b1 - b2;
                if (b0 < -kEdgeTolerance || b1 < -kEdgeTolerance || b2 < -kEdgeTolerance) {
                    continue;
                }
                b0 = std::max(b0, 0.0);
                b1 = std::max(b1, 0.0);
                b2 = std::max(b2, 0.0);
                const double sum = b0 + b1 + b2;
                entry = TexelBinding{static_cast<std::uint32_t>(f), {b0 / sum, b1 / sum, b2 / sum}};
            }
        }
    }
    return mapping;
}

Vec3 surface_point(const DeformedMesh &mesh, const TexelBinding &binding) {
    const auto &face = mesh.faces[binding.face_id];
    const auto &w = binding.barycentric;
    return w[0] * mesh.vertices[face[0]] + w[1] * mesh.vertices[face[1]] + w[2] * mesh.vertices[face[2]];
}

double median_edge_length(const SurfaceModel &model) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> edges;
    for (const auto &f : model.faces) {
        for (int k = 0; k < 3; ++k) {
            auto i = f[k];
            auto j = f[(k + 1) % 3];
            if (i > j) {
                std::swap(i, j);
            }
            edges.emplace(std::pair{i, j}, (model.template_vertices[i] - model.template_vertices[j]).norm());
        }
    }
    if (edges.empty()) {
        return 0.0;
    }
    std::vector<double> lengths;
    lengths.reserve(edges.size());
    for (const auto &[key, len] : edges) {
        lengths.push_back(len);
    }
    const auto mid = lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2);
    std::nth_element(lengths.begin(), mid, lengths.end());
    if (lengths.size() % 2 == 1) {
        return *mid;
    }
    const double upper = *mid;
    const double lower = *std::max_element(lengths.begin(), mid);
    return 0.5 * (lower + upper);
}

// ---------------------------------------------------------------------------
// Demo asset

namespace {

struct CornerTriangle {
    std::array<std::uint32_t, 3> vertices;
    std::uint32_t source_face;
    std::array<Vec3, 3> bary; // w.r.t. the source icosahedron face
};

double smooth_bump(double x, double width) { return std::exp(-(x * x) / (width * width)); }

} // namespace

SurfaceModel make_demo_head() {
    constexpr int kLevels = 4;
    const double lat = std::atan(0.5);

    // Icosahedron: north pole, upper ring U0..U4, lower ring L0..L4 (offset 36 deg), south pole.
    std::vector<Vec3> unit;
    unit.emplace_back(0.0, 1.0, 0.0);
    for (int i = 0; i < 5; ++i) {
        const double lon = 2.0 * std::numbers::pi * i / 5.0;
        unit.emplace_back(std::cos(lat) * std::sin(lon), std::sin(lat), std::cos(lat) * std::cos(lon));
    }
    for (int i = 0; i < 5; ++i) {
        const double lon = 2.0 * std::numbers::pi * (i + 0.5) / 5.0;
        unit.emplace_back(std::cos(lat) * std::sin(lon), -std::sin(lat), std::cos(lat) * std::cos(lon));
    }
    unit.emplace_back(0.0, -1.0, 0.0);
    const auto U = [](int i) { return static_cast<std::uint32_t>(1 + (i % 5)); };
    const auto L = [](int i) { return static_cast<std::uint32_t>(6 + (i % 5)); };
    constexpr std::uint32_t N = 0;
    constexpr std::uint32_t S = 11;

    // Each longitude strip {N,Ui,Ui+1}, {Ui,Li,Ui+1}, {Ui+1,Li,Li+1}, {Li,S,Li+1} is a parallelogram in
    // the unfolded net; it maps affinely onto the rectangle [i/5,(i+1)/5] x [0,1].
    std::vector<Face> base_faces;
    std::vector<std::array<Vec2, 3>> base_uv;
    for (int i = 0; i < 5; ++i) {
        const double u0 = i / 5.0;
        const double u1 = (i + 1) / 5.0;
        base_faces.push_back({N, U(i), U(i + 1)});
        base_uv.push_back({Vec2(u0, 0.0), Vec2(u1, 0.0), Vec2(u0, 0.5)});
        base_faces.push_back({U(i), L(i), U(i + 1)});
        base_uv.push_back({Vec2(u1, 0.0), Vec2(u1, 0.5), Vec2(u0, 0.5)});
        base_faces.push_back({U(i + 1), L(i), L(i + 1)});
        base_uv.push_back({Vec2(u0, 0.5), Vec2(u1, 0.5), Vec2(u0, 1.0)});
        base_faces.push_back({L(i), S, L(i + 1)});
        base_uv.push_back({Vec2(u1, 0.5), Vec2(u1, 1.0), Vec2(u0, 1.0)});
    }

    std::vector<CornerTriangle> tris;
    for (std::uint32_t f = 0; f < base_faces.size(); ++f) {
        tris.push_back({base_faces[f], f, {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}});
    }
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint_cache;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
        const auto key = std::minmax(a, b);
        const auto it = midpoint_cache.find(key);
        if (it != midpoint_cache.end()) {
            return it->second;
        }
        unit.push_back((unit[a] + unit[b]).normalized());
        const auto id = static_cast<std::uint32_t>(unit.size() - 1);
        midpoint_cache.emplace(key, id);
        return id;
    };
    for (int level = 0; level < kLevels; ++level) {
        std::vector<CornerTriangle> next;
        next.reserve(tris.size() * 4);
        for (const auto &t : tris) {
            const auto [a, b, c] = t.vertices;
            const auto ab = midpoint(a, b);
            const auto bc = midpoint(b, c);
            const auto ca = midpoint(c, a);
            const Vec3 wab = 0.5 * (t.bary[0] + t.bary[1]);
            const Vec3 wbc = 0.5 * (t.bary[1] + t.bary[2]);
            const Vec3 wca = 0.5 * (t.bary[2] + t.bary[0]);
            next.push_back({{a, ab, ca}, t.source_face, {t.bary[0], wab, wca}});
            next.push_back({{ab, b, bc}, t.source_face, {wab, t.bary[1], wbc}});
            next.push_back({{ca, bc, c}, t.source_face, {wca, wbc, t.bary[2]}});
            next.push_back({{ab, bc, ca}, t.source_face, {wab, wbc, wca}});
        }
        tris = std::move(next);
    }

    SurfaceModel model;
    model.n_shape = 4;
    model.n_expr = 4;
    const std::size_t nv = unit.size();
    model.template_vertices.resize(nv);
    model.shape_basis.assign(nv * 3 * 4, 0.0);
    model.expr_basis.assign(nv * 3 * 4, 0.0);

    for (std::size_t v = 0; v < nv; ++v) {
        const Vec3 &p = unit[v];
        const double front = std::max(p.z(), 0.0);
        const double nose = 0.16 * smooth_bump(p.x(), 0.14) * smooth_bump(p.y() + 0.05, 0.2) * front * front;
        model.template_vertices[v] = Vec3(0.78 * p.x(), 1.0 * p.y(), 0.88 * p.z() + nose);

        auto set = [&](std::vector<double> &basis, int k, const Vec3 &d) {
            for (int a = 0; a < 3; ++a) {
                basis[(v * 3 + a) * 4 + k] = d[a];
            }
        };
        const double sx = p.x() >= 0.0 ? 1.0 : -1.0;
        // Identity: width, height, depth, chin length.
        set(model.shape_basis, 0, Vec3(0.1 * p.x(), 0.0, 0.0));
        set(model.shape_basis, 1, Vec3(0.0, 0.1 * p.y(), 0.0));
        set(model.shape_basis, 2, Vec3(0.0, 0.0, 0.1 * p.z()));
        const double chin = smooth_bump(p.y() + 0.75, 0.25) * front;
        set(model.shape_basis, 3, Vec3(0.0, -0.08 * chin, 0.04 * chin));
        // Expression: jaw open, smile, brow raise, cheek puff.
        const double jaw = std::max(0.0, -p.y() - 0.2) * front;
        set(model.expr_basis, 0, Vec3(0.0, -0.12 * jaw, -0.02 * jaw));
        const double corner = smooth_bump(std::abs(p.x()) - 0.3, 0.1) * smooth_bump(p.y() + 0.35, 0.1) * front;
        set(model.expr_basis, 1, Vec3(0.05 * sx * corner, 0.06 * corner, 0.0));
        const double brow = smooth_bump(p.y() - 0.35, 0.1) * front;
        set(model.expr_basis, 2, Vec3(0.0, 0.06 * brow, 0.0));
        const double cheek = smooth_bump(std::abs(p.x()) - 0.45, 0.14) * smooth_bump(p.y() + 0.1, 0.14) * front;
        set(model.expr_basis, 3, 0.07 * cheek * p);
    }

    model.faces.reserve(tris.size());
    model.uv_coords.reserve(tris.size() * 3);
    for (const auto &t : tris) {
        model.faces.push_back(t.vertices);
        const auto &corners = base_uv[t.source_face];
        for (const auto &w : t.bary) {
            Vec2 uv = w[0] * corners[0] + w[1] * corners[1] + w[2] * corners[2];
            uv = uv.cwiseMax(0.0).cwiseMin(1.0);
            model.uv_coords.push_back(uv);
        }
    }
    model.validate();
    return model;
}

} // namespace splatctl
