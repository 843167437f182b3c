#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlos/errors.hpp"
#include "nlos/io.hpp"
#include "nlos/reconstruct.hpp"

namespace py = pybind11;
using namespace nlos;

namespace {

Box3 box_from_tuple(const std::vector<double>& v) {
    if (v.size() != 6)
        throw ValidationError("bounds must be (x0, y0, z0, x1, y1, z1)");
    return {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
}

ReconstructionConfig make_config(std::size_t resolution, const std::string& method,
                                 const std::string& mode,
                                 const std::optional<std::vector<double>>& bounds,
                                 double epsilon, double threshold, bool g_correction,
                                 bool dedup, int max_level, unsigned threads) {
    ReconstructionConfig cfg;
    cfg.resolution = resolution;
    if (method == "fast")
        cfg.method = Method::Fast;
    else if (method == "traditional")
        cfg.method = Method::Traditional;
    else
        throw ValidationError("method must be 'fast' or 'traditional'");
    if (mode == "int")
        cfg.mode = AccumMode::Integer;
    else if (mode == "float")
        cfg.mode = AccumMode::Float;
    else
        throw ValidationError("mode must be 'int' or 'float'");
    if (bounds) cfg.bounds = box_from_tuple(*bounds);
    cfg.epsilon = epsilon;
    cfg.intensity_threshold = threshold;
    cfg.g_correction = g_correction;
    cfg.dedup = dedup;
    cfg.max_tess_level = max_level;
    cfg.threads = threads;
    return cfg;
}

py::dict stats_dict(const ReconstructionStats& st) {
    py::dict d;
    d["ellipsoids_emitted"] = st.ellipsoids_emitted;
    d["ellipsoids_skipped_zero"] = st.ellipsoids_skipped_zero;
    d["ellipsoids_degenerate"] = st.ellipsoids_degenerate;
    d["triangles_total"] = st.triangles_total;
    d["saturated_levels"] = st.saturated_levels;
    d["wall_time"] = st.wall_time;
    return d;
}

py::array volume_array(const VoxelGrid& g) {
    const GridGeometry& geom = g.geometry();
    std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(geom.nz),
                                   static_cast<py::ssize_t>(geom.ny),
                                   static_cast<py::ssize_t>(geom.nx)};
    py::array_t<double> out(shape);
    double* dst = out.mutable_data();
    for (std::size_t i = 0; i < g.cell_count(); ++i) dst[i] = g.value(i);
    return out;
}

}  // namespace

PYBIND11_MODULE(_nlosbp, m) {
    m.doc() = "Transient NLOS back-projection core";

    // later registrations are tried first, so the specific IoError wins
    py::register_exception<Error>(m, "Error", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    py::class_<HiddenScene>(m, "Scene")
        .def_property_readonly("pixel_count",
                               [](const HiddenScene& s) { return s.wall.pixel_count(); })
        .def_property_readonly(
            "laser_count", [](const HiddenScene& s) { return s.laser_points.size(); })
        .def_property_readonly("surface_samples", [](const HiddenScene& s) {
            return s.hidden_surfaces.size();
        });

    py::class_<TransientDataset>(m, "Dataset")
        .def_property_readonly("shots", &TransientDataset::shots)
        .def_property_readonly("pixels", &TransientDataset::pixels)
        .def_property_readonly("bins", &TransientDataset::time_bins)
        .def_property_readonly("t0", [](const TransientDataset& d) { return d.axis.t0; })
        .def_property_readonly("dt", [](const TransientDataset& d) { return d.axis.dt; })
        .def_property_readonly("c", [](const TransientDataset& d) { return d.axis.c; })
        .def_property_readonly("nonzero_bins", &TransientDataset::nonzero_bins)
        .def_property_readonly("intensity",
                               [](const TransientDataset& d) {
                                   std::vector<py::ssize_t> shape{
                                       static_cast<py::ssize_t>(d.shots()),
                                       static_cast<py::ssize_t>(d.pixels()),
                                       static_cast<py::ssize_t>(d.time_bins())};
                                   return py::array_t<float>(shape, d.intensity.data());
                               })
        .def("save", [](const TransientDataset& d, const std::string& path) {
            write_dataset(d, path);
        });

    py::class_<VoxelGrid>(m, "Volume")
        .def_property_readonly("shape",
                               [](const VoxelGrid& g) {
                                   const GridGeometry& geom = g.geometry();
                                   return py::make_tuple(geom.nz, geom.ny, geom.nx);
                               })
        .def_property_readonly("voxel_size",
                               [](const VoxelGrid& g) { return g.geometry().voxel_size; })
        .def_property_readonly("bounds",
                               [](const VoxelGrid& g) {
                                   const Box3& b = g.geometry().bounds;
                                   return py::make_tuple(b.min.x, b.min.y, b.min.z, b.max.x,
                                                         b.max.y, b.max.z);
                               })
        .def_property_readonly(
            "mode",
            [](const VoxelGrid& g) {
                return g.mode() == AccumMode::Integer ? "int" : "float";
            })
        .def_property_readonly("values", &volume_array)
        .def("save",
             [](const VoxelGrid& g, const std::string& path) { write_volume(g, path); });

    m.def("load_scene", &read_scene, py::arg("path"));
    m.def("parse_scene", &parse_scene_json, py::arg("text"));

    m.def(
        "simulate",
        [](const HiddenScene& scene, double noise_photons, std::uint64_t seed,
           unsigned threads) {
            SimulateOptions opt;
            opt.threads = threads;
            if (noise_photons > 0.0) {
                opt.shot_noise = true;
                opt.photons = noise_photons;
                opt.seed = seed;
            }
            return simulate_dataset(scene, opt);
        },
        py::arg("scene"), py::arg("noise_photons") = 0.0, py::arg("seed") = 0,
        py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());

    m.def(
        "reconstruct",
        [](const TransientDataset& ds, std::size_t resolution, const std::string& method,
           const std::string& mode, const std::optional<std::vector<double>>& bounds,
           double epsilon, double threshold, bool g_correction, bool dedup, int max_level,
           unsigned threads) {
            ReconstructionConfig cfg =
                make_config(resolution, method, mode, bounds, epsilon, threshold,
                            g_correction, dedup, max_level, threads);
            ReconstructionResult r;
            {
                py::gil_scoped_release release;
                r = cfg.method == Method::Fast ? reconstruct_fast(ds, cfg)
                                               : reconstruct_traditional(ds, cfg);
            }
            return py::make_tuple(std::move(r.grid), stats_dict(r.stats));
        },
        py::arg("dataset"), py::arg("resolution") = 64, py::arg("method") = "fast",
        py::arg("mode") = "int", py::arg("bounds") = py::none(), py::arg("epsilon") = 0.0,
        py::arg("threshold") = 0.0, py::arg("g_correction") = false,
        py::arg("dedup") = true, py::arg("max_level") = 5, py::arg("threads") = 0);

    m.def("laplacian_filter", &laplacian_filter, py::arg("volume"),
          py::call_guard<py::gil_scoped_release>());

    m.def(
        "compare",
        [](const VoxelGrid& a, const VoxelGrid& b) {
            GridComparison c = grid_compare(a, b);
            py::dict d;
            d["mse"] = c.mse;
            d["pearson"] = c.pearson;
            d["peak_offset"] = c.peak_offset;
            return d;
        },
        py::arg("a"), py::arg("b"));

    m.def("load_dataset", &read_dataset, py::arg("path"));
    m.def("load_volume", &read_volume, py::arg("path"));
    m.def("export_ply", &export_ply, py::arg("volume"), py::arg("threshold"),
          py::arg("path"), py::arg("binary") = false);
    m.def("export_slices", &export_slices, py::arg("volume"), py::arg("axis"),
          py::arg("prefix"));
}
