#include "nlos/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nlos/errors.hpp"

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

namespace nlos {

namespace {

using nlohmann::json;

class Reader {
  public:
    explicit Reader(const std::string& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        data_ = ss.str();
    }

    long long offset() const { return static_cast<long long>(pos_); }

    void raw(void* dst, std::size_t n, const char* what) {
        if (pos_ + n > data_.size())
            throw TruncatedPayloadError(path_ + ": truncated while reading " +
                                        std::string(what), offset());
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }

    template <typename T>
    T scalar(const char* what) {
        T v;
        raw(&v, sizeof(T), what);
        return v;
    }

    bool exhausted() const { return pos_ == data_.size(); }

  private:
    std::string path_;
    std::string data_;
    std::size_t pos_ = 0;
};

class Writer {
  public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw IoError("cannot open " + path + " for writing");
    }

    void raw(const void* src, std::size_t n) {
        out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
    }

    template <typename T>
    void scalar(T v) {
        raw(&v, sizeof(T));
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("write failed for " + path_);
    }

  private:
    std::ofstream out_;
    std::string path_;
};

void check_magic(Reader& r, const char expected[4], const std::string& path) {
    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, expected, 4) != 0)
        throw MalformedMagicError(path + ": bad magic", 0);
}

void check_version(Reader& r, const std::string& path) {
    auto version = r.scalar<std::uint16_t>("version");
    if (version != kFormatVersion)
        throw UnsupportedVersionError(path + ": unsupported version " +
                                      std::to_string(version), 4);
}

}  // namespace

TransientDataset read_dataset(const std::string& path) {
    Reader r(path);
    check_magic(r, kDatasetMagic, path);
    check_version(r, path);

    auto S = r.scalar<std::uint32_t>("shot count");
    auto P = r.scalar<std::uint32_t>("pixel count");
    auto T = r.scalar<std::uint32_t>("bin count");

    TransientDataset ds;
    ds.axis.c = r.scalar<double>("c");
    ds.axis.t0 = r.scalar<double>("t0");
    ds.axis.dt = r.scalar<double>("dt");
    ds.axis.bins = T;

    ds.lasers.positions.resize(S);
    r.raw(ds.lasers.positions.data(), sizeof(Vec3) * S, "laser positions");
    ds.lasers.laser_offsets.resize(S);
    r.raw(ds.lasers.laser_offsets.data(), sizeof(double) * S, "laser offsets");
    ds.wall.positions.resize(P);
    r.raw(ds.wall.positions.data(), sizeof(Vec3) * P, "wall positions");
    ds.wall.camera_offsets.resize(P);
    r.raw(ds.wall.camera_offsets.data(), sizeof(double) * P, "camera offsets");

    std::size_t count = static_cast<std::size_t>(S) * P * T;
    ds.intensity.resize(count);
    long long tensor_offset = r.offset();
    r.raw(ds.intensity.data(), sizeof(float) * count, "intensity tensor");

    for (std::size_t i = 0; i < count; ++i)
        if (!(ds.intensity[i] >= 0.0f) || !std::isfinite(ds.intensity[i]))
            throw NegativeIntensityError(
                path + ": invalid intensity value",
                tensor_offset + static_cast<long long>(i * sizeof(float)));

    ds.validate();
    return ds;
}

void write_dataset(const TransientDataset& ds, const std::string& path) {
    ds.validate();
    Writer w(path);
    w.raw(kDatasetMagic, 4);
    w.scalar(kFormatVersion);
    w.scalar(static_cast<std::uint32_t>(ds.shots()));
    w.scalar(static_cast<std::uint32_t>(ds.pixels()));
    w.scalar(static_cast<std::uint32_t>(ds.axis.bins));
    w.scalar(ds.axis.c);
    w.scalar(ds.axis.t0);
    w.scalar(ds.axis.dt);
    w.raw(ds.lasers.positions.data(), sizeof(Vec3) * ds.shots());
    w.raw(ds.lasers.laser_offsets.data(), sizeof(double) * ds.shots());
    w.raw(ds.wall.positions.data(), sizeof(Vec3) * ds.pixels());
    w.raw(ds.wall.camera_offsets.data(), sizeof(double) * ds.pixels());
    w.raw(ds.intensity.data(), sizeof(float) * ds.intensity.size());
    w.close();
}

VoxelGrid read_volume(const std::string& path) {
    Reader r(path);
    check_magic(r, kVolumeMagic, path);
    check_version(r, path);

    GridGeometry g;
    g.nx = r.scalar<std::uint32_t>("nx");
    g.ny = r.scalar<std::uint32_t>("ny");
    g.nz = r.scalar<std::uint32_t>("nz");
    r.raw(&g.bounds.min, sizeof(Vec3), "bounds min");
    r.raw(&g.bounds.max, sizeof(Vec3), "bounds max");
    auto mode_tag = r.scalar<std::uint8_t>("mode");
    if (mode_tag > 1)
        throw IoError(path + ": unknown accumulator mode " + std::to_string(mode_tag),
                      r.offset() - 1);
    if (g.nx == 0 || g.ny == 0 || g.nz == 0)
        throw IoError(path + ": zero resolution axis", 6);
    g.voxel_size = (g.bounds.max.x - g.bounds.min.x) / static_cast<double>(g.nx);

    VoxelGrid grid = VoxelGrid::from_parts(
        g, mode_tag == 0 ? AccumMode::Integer : AccumMode::Float);
    if (mode_tag == 0)
        r.raw(grid.ints().data(), sizeof(std::uint32_t) * g.cell_count(), "payload");
    else
        r.raw(grid.floats().data(), sizeof(double) * g.cell_count(), "payload");
    return grid;
}

void write_volume(const VoxelGrid& grid, const std::string& path) {
    const GridGeometry& g = grid.geometry();
    Writer w(path);
    w.raw(kVolumeMagic, 4);
    w.scalar(kFormatVersion);
    w.scalar(static_cast<std::uint32_t>(g.nx));
    w.scalar(static_cast<std::uint32_t>(g.ny));
    w.scalar(static_cast<std::uint32_t>(g.nz));
    w.raw(&g.bounds.min, sizeof(Vec3));
    w.raw(&g.bounds.max, sizeof(Vec3));
    w.scalar(static_cast<std::uint8_t>(grid.mode()));
    if (grid.mode() == AccumMode::Integer)
        w.raw(grid.ints().data(), sizeof(std::uint32_t) * g.cell_count());
    else
        w.raw(grid.floats().data(), sizeof(double) * g.cell_count());
    w.close();
}

namespace {

Vec3 parse_vec3(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
        !j[2].is_number())
        throw SceneParseError("scene: field '" + field + "' must be a 3-number array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const json& require(const json& j, const std::string& key, const std::string& context) {
    auto it = j.find(key);
    if (it == j.end())
        throw SceneParseError("scene: missing field '" + key + "' in " + context);
    return *it;
}

// Rectangle sampled on a grid matching its aspect ratio; sample count is
// round(density * area), each sample carrying an equal share of the area.
void sample_rectangle(std::vector<SurfaceSample>& out, const Vec3& origin, const Vec3& eu,
                      const Vec3& ev, double density, double albedo) {
    double len_u = norm(eu), len_v = norm(ev);
    double area = norm(cross(eu, ev));
    if (area <= 0.0) throw SceneParseError("scene: hidden rectangle has zero area");
    auto total = static_cast<std::size_t>(std::llround(density * area));
    if (total < 1) total = 1;
    auto nu = static_cast<std::size_t>(
        std::llround(std::sqrt(static_cast<double>(total) * len_u / len_v)));
    if (nu < 1) nu = 1;
    auto nv = static_cast<std::size_t>(
        std::llround(static_cast<double>(total) / static_cast<double>(nu)));
    if (nv < 1) nv = 1;
    double sample_area = area / static_cast<double>(nu * nv);
    Vec3 normal = normalized(cross(eu, ev));
    for (std::size_t j = 0; j < nv; ++j)
        for (std::size_t i = 0; i < nu; ++i) {
            double fu = (static_cast<double>(i) + 0.5) / static_cast<double>(nu);
            double fv = (static_cast<double>(j) + 0.5) / static_cast<double>(nv);
            out.push_back({origin + eu * fu + ev * fv, normal, sample_area, albedo});
        }
}

}  // namespace

HiddenScene parse_scene_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SceneParseError(std::string("scene: ") + e.what());
    }

    HiddenScene scene;
    const json& wall = require(j, "wall", "scene root");
    scene.wall.origin = parse_vec3(require(wall, "origin", "wall"), "wall.origin");
    scene.wall.edge_u = parse_vec3(require(wall, "edge_u", "wall"), "wall.edge_u");
    scene.wall.edge_v = parse_vec3(require(wall, "edge_v", "wall"), "wall.edge_v");
    scene.wall.pixels_u = require(wall, "pixels_u", "wall").get<std::size_t>();
    scene.wall.pixels_v = require(wall, "pixels_v", "wall").get<std::size_t>();
    if (scene.wall.pixels_u < 1 || scene.wall.pixels_v < 1)
        throw SceneParseError("scene: wall pixel counts must be >= 1");
    if (norm(cross(scene.wall.edge_u, scene.wall.edge_v)) <= 0.0)
        throw SceneParseError("scene: wall rectangle has zero area");

    const json& lasers = require(j, "laser_points", "scene root");
    if (lasers.is_array()) {
        for (std::size_t i = 0; i < lasers.size(); ++i)
            scene.laser_points.push_back(
                parse_vec3(lasers[i], "laser_points[" + std::to_string(i) + "]"));
    } else if (lasers.is_object()) {
        // Regular grid of virtual lights on the wall rectangle.
        auto nu = require(lasers, "grid_u", "laser_points").get<std::size_t>();
        auto nv = require(lasers, "grid_v", "laser_points").get<std::size_t>();
        if (nu < 1 || nv < 1) throw SceneParseError("scene: laser grid counts must be >= 1");
        for (std::size_t v = 0; v < nv; ++v)
            for (std::size_t u = 0; u < nu; ++u) {
                double fu = (static_cast<double>(u) + 0.5) / static_cast<double>(nu);
                double fv = (static_cast<double>(v) + 0.5) / static_cast<double>(nv);
                scene.laser_points.push_back(scene.wall.origin + scene.wall.edge_u * fu +
                                             scene.wall.edge_v * fv);
            }
    } else {
        throw SceneParseError("scene: laser_points must be an array or a grid object");
    }
    if (scene.laser_points.empty()) throw SceneParseError("scene: empty laser point set");

    scene.laser_origin = parse_vec3(require(j, "laser_origin", "scene root"), "laser_origin");
    scene.camera_origin =
        parse_vec3(require(j, "camera_origin", "scene root"), "camera_origin");

    if (auto it = j.find("temporal"); it != j.end()) {
        const json& t = *it;
        scene.dt = require(t, "dt", "temporal").get<double>();
        if (t.contains("c")) scene.c = t["c"].get<double>();
        if (t.contains("t0") && t["t0"].is_number()) scene.t0 = t["t0"].get<double>();
        if (t.contains("bins") && t["bins"].is_number_unsigned())
            scene.bins = t["bins"].get<std::size_t>();
    }

    if (auto it = j.find("hidden"); it != j.end()) {
        for (std::size_t i = 0; i < it->size(); ++i) {
            const json& h = (*it)[i];
            std::string ctx = "hidden[" + std::to_string(i) + "]";
            double albedo = h.contains("albedo") ? h["albedo"].get<double>() : 1.0;
            if (h.contains("rect")) {
                const json& rc = h["rect"];
                sample_rectangle(scene.hidden_surfaces,
                                 parse_vec3(require(rc, "origin", ctx), ctx + ".origin"),
                                 parse_vec3(require(rc, "edge_u", ctx), ctx + ".edge_u"),
                                 parse_vec3(require(rc, "edge_v", ctx), ctx + ".edge_v"),
                                 require(rc, "density", ctx).get<double>(), albedo);
            } else if (h.contains("point")) {
                const json& pt = h["point"];
                SurfaceSample s;
                s.position = parse_vec3(require(pt, "position", ctx), ctx + ".position");
                s.normal = normalized(parse_vec3(require(pt, "normal", ctx), ctx + ".normal"));
                s.area = require(pt, "area", ctx).get<double>();
                s.albedo = albedo;
                scene.hidden_surfaces.push_back(s);
            } else {
                throw SceneParseError("scene: " + ctx + " needs a 'rect' or 'point' entry");
            }
        }
    }

    try {
        scene.validate();
    } catch (const ValidationError& e) {
        throw SceneParseError(e.what());
    }
    return scene;
}

HiddenScene read_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scene_json(ss.str());
}

void export_ply(const VoxelGrid& grid, double threshold, const std::string& path,
                bool binary) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ValidationError("export: threshold must be in [0, 1]");
    const GridGeometry& g = grid.geometry();
    double cutoff = threshold * grid.max_value();

    struct Vertex {
        double x, y, z, confidence;
    };
    std::vector<Vertex> verts;
    for (std::size_t z = 0; z < g.nz; ++z)
        for (std::size_t y = 0; y < g.ny; ++y)
            for (std::size_t x = 0; x < g.nx; ++x) {
                double v = grid.value(g.index(x, y, z));
                if (v <= 0.0 || v < cutoff) continue;
                Vec3 c = g.voxel_center(x, y, z);
                verts.push_back({c.x, c.y, c.z, v});
            }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
        << "element vertex " << verts.size() << "\n"
        << "property float64 x\nproperty float64 y\nproperty float64 z\n"
        << "property float64 confidence\nend_header\n";
    if (binary) {
        out.write(reinterpret_cast<const char*>(verts.data()),
                  static_cast<std::streamsize>(verts.size() * sizeof(Vertex)));
    } else {
        out.precision(17);
        for (const auto& v : verts)
            out << v.x << ' ' << v.y << ' ' << v.z << ' ' << v.confidence << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

std::vector<std::string> export_slices(const VoxelGrid& grid, int axis,
                                       const std::string& prefix) {
    if (axis < 0 || axis > 2) throw ValidationError("export: axis must be 0, 1 or 2");
    const GridGeometry& g = grid.geometry();
    const std::size_t dims[3] = {g.nx, g.ny, g.nz};
    const int u_axis = (axis + 1) % 3;
    const int v_axis = (axis + 2) % 3;
    double max_v = grid.max_value();
    double scale = max_v > 0.0 ? 255.0 / max_v : 0.0;

    std::vector<std::string> written;
    std::size_t idx[3];
    for (std::size_t layer = 0; layer < dims[axis]; ++layer) {
        char name[32];
        std::snprintf(name, sizeof(name), "_%03zu.pgm", layer);
        std::string path = prefix + name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open " + path + " for writing");
        out << "P5\n" << dims[u_axis] << ' ' << dims[v_axis] << "\n255\n";
        idx[axis] = layer;
        for (std::size_t v = 0; v < dims[v_axis]; ++v)
            for (std::size_t u = 0; u < dims[u_axis]; ++u) {
                idx[u_axis] = u;
                idx[v_axis] = v;
                double val = grid.value(g.index(idx[0], idx[1], idx[2]));
                out.put(static_cast<char>(
                    static_cast<unsigned char>(std::lround(val * scale))));
            }
        if (!out) throw IoError("write failed for " + path);
        written.push_back(path);
    }
    return written;
}

void write_report(const std::vector<std::pair<std::string, std::string>>& entries,
                  const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& [key, value] : entries) out << key << '=' << value << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace nlos
