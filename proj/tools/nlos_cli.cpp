#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nlos/errors.hpp"
#include "nlos/io.hpp"
#include "nlos/parallel.hpp"
#include "nlos/reconstruct.hpp"

namespace {

using namespace nlos;
using nlohmann::json;

// Exit codes: 0 ok, 1 I/O, 2 usage/validation, 3 resource/budget.
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitResource = 3;

struct BudgetExceeded : Error {
    using Error::Error;
};

Box3 parse_bounds(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
    if (vals.size() != 6)
        throw ValidationError("--bounds needs 'auto' or x0,y0,z0,x1,y1,z1");
    Box3 b{{vals[0], vals[1], vals[2]}, {vals[3], vals[4], vals[5]}};
    if (b.empty()) throw ValidationError("--bounds box is empty");
    return b;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void append_stats(std::vector<std::pair<std::string, std::string>>& kv,
                  const std::string& prefix, const ReconstructionStats& st) {
    kv.emplace_back(prefix + "ellipsoids_emitted", std::to_string(st.ellipsoids_emitted));
    kv.emplace_back(prefix + "ellipsoids_skipped_zero",
                    std::to_string(st.ellipsoids_skipped_zero));
    kv.emplace_back(prefix + "ellipsoids_degenerate",
                    std::to_string(st.ellipsoids_degenerate));
    kv.emplace_back(prefix + "triangles_total", std::to_string(st.triangles_total));
    kv.emplace_back(prefix + "saturated_levels", std::to_string(st.saturated_levels));
    kv.emplace_back(prefix + "wall_time", fmt(st.wall_time));
}

int run_simulate(const std::string& scene_path, const std::string& out_path, double noise,
                 std::uint64_t seed, unsigned threads) {
    HiddenScene scene = read_scene(scene_path);
    SimulateOptions opt;
    opt.threads = threads;
    if (noise > 0.0) {
        opt.shot_noise = true;
        opt.photons = noise;
        opt.seed = seed;
    }
    TransientDataset ds = simulate_dataset(scene, opt);
    write_dataset(ds, out_path);
    std::cout << "shots=" << ds.shots() << "\npixels=" << ds.pixels()
              << "\nbins=" << ds.axis.bins << "\nnonzero_fraction="
              << fmt(static_cast<double>(ds.nonzero_bins()) /
                     static_cast<double>(ds.intensity.size()))
              << "\n";
    return 0;
}

ReconstructionResult run_method(const TransientDataset& ds, const ReconstructionConfig& cfg) {
    return cfg.method == Method::Fast ? reconstruct_fast(ds, cfg)
                                      : reconstruct_traditional(ds, cfg);
}

int run_bench(const std::string& plan_path, const std::string& report_path) {
    std::ifstream in(plan_path);
    if (!in) throw IoError("cannot open " + plan_path);
    json plan;
    try {
        plan = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("bench plan: ") + e.what());
    }

    if (!plan.contains("dataset")) throw ValidationError("bench plan: missing 'dataset'");
    TransientDataset ds = read_dataset(plan["dataset"].get<std::string>());

    std::vector<std::size_t> resolutions =
        plan.value("resolutions", std::vector<std::size_t>{});
    std::vector<std::string> methods = plan.value("methods", std::vector<std::string>{});
    std::vector<json> epsilons;
    if (plan.contains("epsilons"))
        epsilons.assign(plan["epsilons"].begin(), plan["epsilons"].end());
    else
        epsilons.push_back(json("voxel"));
    int repetitions = plan.value("repetitions", 1);
    int warmup = plan.value("warmup", 0);
    double budget = plan.value("time_budget_seconds", 0.0);
    unsigned threads = plan.value("threads", 0u);
    if (resolutions.empty() || methods.empty() || epsilons.empty())
        throw ValidationError("bench plan: sweeps must be nonempty");
    if (repetitions < 1) throw ValidationError("bench plan: repetitions must be >= 1");

    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("dataset", plan["dataset"].get<std::string>());

    // cell key -> median wall time, for speed-up ratios
    std::vector<std::tuple<std::string, std::size_t, std::string, double>> cells;

    int cell_id = 0;
    for (std::size_t res : resolutions)
        for (const json& eps : epsilons)
            for (const std::string& method : methods) {
                ReconstructionConfig cfg;
                cfg.resolution = res;
                cfg.threads = threads;
                cfg.mode = AccumMode::Integer;
                if (method == "fast")
                    cfg.method = Method::Fast;
                else if (method == "traditional")
                    cfg.method = Method::Traditional;
                else
                    throw ValidationError("bench plan: unknown method '" + method + "'");
                std::string eps_str = "voxel";
                if (eps.is_number()) {
                    cfg.epsilon = eps.get<double>();
                    eps_str = fmt(cfg.epsilon);
                }

                std::vector<double> times;
                ReconstructionStats last{};
                for (int rep = 0; rep < warmup + repetitions; ++rep) {
                    ReconstructionResult r = run_method(ds, cfg);
                    if (rep >= warmup) times.push_back(r.stats.wall_time);
                    last = r.stats;
                    if (budget > 0.0 && r.stats.wall_time > budget)
                        throw BudgetExceeded("bench: cell exceeded time budget of " +
                                             fmt(budget) + " s");
                }
                std::sort(times.begin(), times.end());
                double median = times[times.size() / 2];

                std::string prefix = "cell." + std::to_string(cell_id) + ".";
                kv.emplace_back(prefix + "method", method);
                kv.emplace_back(prefix + "resolution", std::to_string(res));
                kv.emplace_back(prefix + "epsilon", eps_str);
                kv.emplace_back(prefix + "time_median", fmt(median));
                append_stats(kv, prefix, last);
                if (last.ellipsoids_emitted > 0)
                    kv.emplace_back(prefix + "triangles_per_ellipsoid",
                                    fmt(static_cast<double>(last.triangles_total) /
                                        static_cast<double>(last.ellipsoids_emitted)));
                cells.emplace_back(method, res, eps_str, median);
                ++cell_id;
            }

    // fast-over-traditional speed-up for matching (resolution, epsilon) cells
    for (const auto& [m1, r1, e1, t1] : cells) {
        if (m1 != "traditional") continue;
        for (const auto& [m2, r2, e2, t2] : cells) {
            if (m2 != "fast" || r1 != r2 || e1 != e2) continue;
            kv.emplace_back("speedup.res" + std::to_string(r1) + ".eps" + e1,
                            fmt(t2 > 0.0 ? t1 / t2 : 0.0));
        }
    }

    write_report(kv, report_path);
    std::cout << "report=" << report_path << "\ncells=" << cell_id << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NLOS transient back-projection toolkit"};
    app.require_subcommand(1);

    // simulate
    std::string scene_path, out_path;
    double noise = 0.0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    auto* sim = app.add_subcommand("simulate", "Render a synthetic transient dataset");
    sim->add_option("--scene", scene_path, "scene description (JSON)")->required();
    sim->add_option("--out", out_path, "output dataset path")->required();
    sim->add_option("--noise", noise, "photon count for Poisson shot noise (0 = off)");
    sim->add_option("--seed", seed, "noise RNG seed");
    sim->add_option("--threads", threads, "worker count (0 = hardware)");

    // reconstruct
    std::string in_path, method = "fast", bounds = "auto", mode = "int", eps = "voxel";
    std::string volume_out, stats_out;
    std::size_t res = 64;
    double rel_threshold = 0.0;
    int max_level = 5;
    bool no_dedup = false, g_correction = false, filter = false;
    auto* rec = app.add_subcommand("reconstruct", "Back-project a dataset into a volume");
    rec->add_option("--in", in_path, "input dataset")->required();
    rec->add_option("--method", method, "fast|traditional")
        ->check(CLI::IsMember({"fast", "traditional"}));
    rec->add_option("--res", res, "linear voxel resolution");
    rec->add_option("--bounds", bounds, "auto or x0,y0,z0,x1,y1,z1");
    rec->add_option("--mode", mode, "int|float")->check(CLI::IsMember({"int", "float"}));
    rec->add_option("--eps", eps, "tessellation error bound: 'voxel' or meters");
    rec->add_option("--threshold", rel_threshold, "relative intensity cutoff [0,1)");
    rec->add_option("--max-level", max_level, "tessellation atlas depth");
    rec->add_flag("--no-dedup", no_dedup, "count every (triangle, voxel) emission");
    rec->add_flag("--g-correction", g_correction, "apply G^-1 (traditional, float)");
    rec->add_flag("--filter", filter, "apply the Laplacian filter");
    rec->add_option("--out", volume_out, "output volume path");
    rec->add_option("--stats", stats_out, "stats report path");
    rec->add_option("--threads", threads, "worker count (0 = hardware)");

    // filter
    std::string filter_in, filter_out;
    auto* flt = app.add_subcommand("filter", "Laplacian-filter a volume");
    flt->add_option("--in", filter_in, "input volume")->required();
    flt->add_option("--out", filter_out, "output volume")->required();

    // export
    std::string export_in, export_out, format = "ply";
    double export_threshold = 0.0;
    int slice_axis = 2;
    bool binary_ply = false;
    auto* exp = app.add_subcommand("export", "Export a volume as PLY or PGM slices");
    exp->add_option("--in", export_in, "input volume")->required();
    exp->add_option("--out", export_out, "output path (PLY) or prefix (slices)")->required();
    exp->add_option("--format", format, "ply|slices")
        ->check(CLI::IsMember({"ply", "slices"}));
    exp->add_option("--threshold", export_threshold, "confidence cutoff in [0,1]");
    exp->add_option("--axis", slice_axis, "slice axis 0|1|2");
    exp->add_flag("--binary", binary_ply, "binary PLY payload");

    // compare
    std::string cmp_a, cmp_b;
    auto* cmp = app.add_subcommand("compare", "Compare two volumes");
    cmp->add_option("--a", cmp_a, "first volume")->required();
    cmp->add_option("--b", cmp_b, "second volume")->required();

    // bench
    std::string plan_path, report_path;
    auto* bench = app.add_subcommand("bench", "Run a reconstruction benchmark sweep");
    bench->add_option("--plan", plan_path, "plan file (JSON)")->required();
    bench->add_option("--report", report_path, "report output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (sim->parsed()) return run_simulate(scene_path, out_path, noise, seed, threads);

        if (rec->parsed()) {
            TransientDataset ds = read_dataset(in_path);
            ReconstructionConfig cfg;
            cfg.resolution = res;
            cfg.method = method == "fast" ? Method::Fast : Method::Traditional;
            cfg.mode = mode == "int" ? AccumMode::Integer : AccumMode::Float;
            if (eps != "voxel") cfg.epsilon = std::stod(eps);
            cfg.intensity_threshold = rel_threshold;
            cfg.g_correction = g_correction;
            cfg.dedup = !no_dedup;
            cfg.max_tess_level = max_level;
            cfg.threads = threads;
            if (bounds != "auto") cfg.bounds = parse_bounds(bounds);

            ReconstructionResult result = run_method(ds, cfg);
            VoxelGrid filtered;
            if (filter) filtered = laplacian_filter(result.grid);
            const VoxelGrid& out_grid = filter ? filtered : result.grid;
            if (!volume_out.empty()) write_volume(out_grid, volume_out);

            std::vector<std::pair<std::string, std::string>> kv;
            kv.emplace_back("method", method);
            kv.emplace_back("resolution", std::to_string(res));
            append_stats(kv, "", result.stats);
            for (const auto& [k, v] : kv) std::cout << k << '=' << v << '\n';
            if (!stats_out.empty()) write_report(kv, stats_out);
            return 0;
        }

        if (flt->parsed()) {
            VoxelGrid grid = read_volume(filter_in);
            write_volume(laplacian_filter(grid), filter_out);
            return 0;
        }

        if (exp->parsed()) {
            VoxelGrid grid = read_volume(export_in);
            if (format == "ply") {
                export_ply(grid, export_threshold, export_out, binary_ply);
            } else {
                auto files = export_slices(grid, slice_axis, export_out);
                std::cout << "slices=" << files.size() << '\n';
            }
            return 0;
        }

        if (cmp->parsed()) {
            GridComparison c = grid_compare(read_volume(cmp_a), read_volume(cmp_b));
            std::cout << "mse=" << fmt(c.mse) << "\npearson=" << fmt(c.pearson)
                      << "\npeak_offset=" << c.peak_offset << '\n';
            return 0;
        }

        if (bench->parsed()) return run_bench(plan_path, report_path);
    } catch (const AccumulatorOverflowError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitResource;
    } catch (const ResolutionCapError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitResource;
    } catch (const BudgetExceeded& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitResource;
    } catch (const SceneParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n(see --help for usage)\n";
        return kExitUsage;
    } catch (const GeometryMismatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigConflictError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return 0;
}
