// Acceptance suite: one pass/fail line per criterion, exit code = #failures.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nlos/errors.hpp"
#include "nlos/io.hpp"
#include "nlos/reconstruct.hpp"

using namespace nlos;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("criterion %d (%s): %s  %s\n", id, name.c_str(), pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double elapsed(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

std::array<std::size_t, 3> coords(const GridGeometry& g, std::size_t idx) {
    return {idx % g.nx, (idx / g.nx) % g.ny, idx / (g.nx * g.ny)};
}

// Two planar patches behind a 1 m square wall at z = 0.
HiddenScene two_patch_scene(std::size_t wall_pixels, std::size_t lasers,
                            std::size_t patch_samples) {
    HiddenScene scene;
    scene.wall = {{-0.5, -0.5, 0}, {1, 0, 0}, {0, 1, 0}, wall_pixels, wall_pixels};
    for (std::size_t i = 0; i < lasers; ++i) {
        double a = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(lasers);
        scene.laser_points.push_back({0.35 * std::cos(a), 0.35 * std::sin(a), 0.0});
    }
    scene.laser_origin = {0, 0, -1};
    scene.camera_origin = {0.05, 0, -1};

    auto add_patch = [&](Vec3 origin, Vec3 eu, Vec3 ev, double albedo) {
        Vec3 n = normalized(cross(eu, ev));
        if (n.z > 0.0) n = n * -1.0;  // patches must face the wall at z = 0
        double cell_area = norm(cross(eu, ev)) /
                           static_cast<double>(patch_samples * patch_samples);
        for (std::size_t j = 0; j < patch_samples; ++j)
            for (std::size_t i = 0; i < patch_samples; ++i) {
                double fu = (static_cast<double>(i) + 0.5) / static_cast<double>(patch_samples);
                double fv = (static_cast<double>(j) + 0.5) / static_cast<double>(patch_samples);
                scene.hidden_surfaces.push_back(
                    {origin + eu * fu + ev * fv, n, cell_area, albedo});
            }
    };
    add_patch({-0.35, -0.15, 0.45}, {0.3, 0, 0}, {0, 0.3, 0.05}, 1.0);
    add_patch({0.1, -0.05, 0.7}, {0.25, 0, 0}, {0, 0.25, -0.04}, 0.8);
    scene.dt = 0.01 / scene.c;  // 1 cm path resolution
    return scene;
}

// Re-fit the temporal axis of a scene to an exact bin count.
void fit_bins(HiddenScene& scene, std::size_t bins) {
    TransientDataset probe = simulate_dataset(scene);
    double span = probe.axis.dt * static_cast<double>(probe.axis.bins);
    scene.dt = span / static_cast<double>(bins - 2);
    scene.t0 = probe.axis.t0;
    scene.bins = bins;
}

Box3 hidden_bounds() { return {{-0.55, -0.55, 0.05}, {0.55, 0.55, 1.15}}; }

void criterion_1_oracle_equivalence() {
    auto t0 = Clock::now();
    SphereAtlas atlas = build_sphere_atlas(5);
    ProlateSpheroid e = ellipsoid_from_measurement({-0.5, 0, 0}, {0.5, 0, 0}, 2.2);
    VoxelGrid grid =
        VoxelGrid::create({{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}}, 32, AccumMode::Integer);
    const GridGeometry& g = grid.geometry();
    splat_ellipsoid(grid, e, 1.0, atlas, g.voxel_size);

    double hw = std::sqrt(3.0) * g.voxel_size / 2.0;
    std::size_t agree = 0;
    bool disagreements_on_boundary = true;
    for (std::size_t z = 0; z < g.nz; ++z)
        for (std::size_t y = 0; y < g.ny; ++y)
            for (std::size_t x = 0; x < g.nx; ++x) {
                bool touched = grid.ints()[g.index(x, y, z)] != 0;
                // thin voxelization samples cell centers: the oracle asks
                // whether the center lies within the shell half-width
                Vec3 c = g.voxel_center(x, y, z);
                bool oracle = shell_overlap_oracle(e, {c, c}, hw);
                if (touched == oracle) {
                    ++agree;
                    continue;
                }
                double dev = std::abs(e.focal_sum(c) - e.path_length);
                if (dev > hw + std::sqrt(3.0) * g.voxel_size)
                    disagreements_on_boundary = false;
            }
    double frac = static_cast<double>(agree) / static_cast<double>(g.cell_count());
    double secs = elapsed(t0);
    report(1, "oracle equivalence", frac >= 0.95 && disagreements_on_boundary && secs < 1.0,
           fmt("agreement=%.4f boundary_only=%d runtime=%.2fs", frac,
               disagreements_on_boundary ? 1 : 0, secs));
}

void criterion_2_method_agreement() {
    auto t0 = Clock::now();
    HiddenScene scene = two_patch_scene(16, 8, 10);
    fit_bins(scene, 256);
    TransientDataset ds = simulate_dataset(scene);

    ReconstructionConfig cfg;
    cfg.bounds = hidden_bounds();
    cfg.resolution = 64;
    cfg.mode = AccumMode::Float;
    cfg.method = Method::Traditional;
    VoxelGrid trad = reconstruct_traditional(ds, cfg).grid;
    cfg.method = Method::Fast;
    VoxelGrid fast = reconstruct_fast(ds, cfg).grid;

    GridComparison cmp = grid_compare(trad, fast);
    double secs = elapsed(t0);
    bool nonzero = ds.nonzero_bins() > 0 && trad.max_value() > 0 && fast.max_value() > 0;
    report(2, "method agreement",
           nonzero && cmp.pearson >= 0.9 && cmp.peak_offset <= 1 && secs < 300.0,
           fmt("S=%zu P=%zu T=%zu nonzero=%zu pearson=%.4f peak_offset=%lld runtime=%.1fs",
               ds.shots(), ds.pixels(), ds.time_bins(), ds.nonzero_bins(), cmp.pearson,
               cmp.peak_offset, secs));
}

void criterion_3_localization() {
    HiddenScene scene;
    scene.wall = {{-0.5, -0.5, 0}, {1, 0, 0}, {0, 1, 0}, 12, 12};
    scene.laser_points = {{-0.3, -0.3, 0}, {0.3, -0.3, 0}, {-0.3, 0.3, 0},
                          {0.3, 0.3, 0},   {0.0, 0.0, 0}};
    scene.laser_origin = {0, 0, -1};
    scene.camera_origin = {0, 0, -1};
    // center the target in a known voxel of the 64^3 grid so "the voxel
    // containing the point" is unambiguous
    Vec3 target = VoxelGrid::create(hidden_bounds(), 64, AccumMode::Float)
                      .geometry()
                      .voxel_center(38, 27, 27);
    scene.hidden_surfaces.push_back({target, {0, 0, -1}, 0.01, 1.0});
    scene.dt = 0.005 / scene.c;
    TransientDataset ds = simulate_dataset(scene);

    ReconstructionConfig cfg;
    cfg.bounds = hidden_bounds();
    cfg.resolution = 64;
    cfg.mode = AccumMode::Float;
    cfg.epsilon = 0.25 * 1.1 / 64;  // quarter voxel, reduces tessellation bias

    bool pass = true;
    std::string detail;
    for (Method m : {Method::Traditional, Method::Fast}) {
        cfg.method = m;
        ReconstructionResult r = m == Method::Fast ? reconstruct_fast(ds, cfg)
                                                   : reconstruct_traditional(ds, cfg);
        const GridGeometry& g = r.grid.geometry();
        auto c = coords(g, r.grid.argmax());
        Box3 vb = g.voxel_box(c[0], c[1], c[2]);
        bool contains = target.x >= vb.min.x && target.x < vb.max.x &&
                        target.y >= vb.min.y && target.y < vb.max.y &&
                        target.z >= vb.min.z && target.z < vb.max.z;
        pass = pass && contains;
        detail += fmt("%s=(%zu,%zu,%zu)%s ", m == Method::Fast ? "fast" : "trad", c[0],
                      c[1], c[2], contains ? "" : "!");
    }
    report(3, "localization", pass, detail);
}

void criterion_4_scaling() {
    auto t0 = Clock::now();
    // Fixed dataset: P = 8x8 wall, S = 16 shots, T = 256 bins. Far-field
    // target (~5 m behind the wall) with the volume fitted around it.
    HiddenScene scene;
    scene.wall = {{-0.5, -0.5, 0}, {1, 0, 0}, {0, 1, 0}, 8, 8};
    for (int i = 0; i < 16; ++i) {
        double a = 2.0 * M_PI * i / 16.0;
        scene.laser_points.push_back({0.35 * std::cos(a), 0.35 * std::sin(a), 0.0});
    }
    scene.laser_origin = {0, 0, -1};
    scene.camera_origin = {0.05, 0, -1};
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i)
            scene.hidden_surfaces.push_back(
                {{-0.1 + 0.1 * i, -0.1 + 0.1 * j, 4.95 + 0.05 * j}, {0, 0, -1}, 0.01, 1.0});
    scene.dt = 0.01 / scene.c;
    fit_bins(scene, 256);
    TransientDataset ds = simulate_dataset(scene);

    ReconstructionConfig cfg;
    cfg.bounds = Box3{{-0.55, -0.55, 4.45}, {0.55, 0.55, 5.55}};
    cfg.mode = AccumMode::Integer;
    // Fixed tessellation budget across the sweep: resolution then only
    // affects the rasterization fill, not the triangle count.
    cfg.max_tess_level = 4;

    auto timed = [&](Method m, std::size_t res, int reps) {
        cfg.method = m;
        cfg.resolution = res;
        double best = 1e300;
        for (int rep = 0; rep < reps; ++rep) {
            ReconstructionResult r = m == Method::Fast ? reconstruct_fast(ds, cfg)
                                                       : reconstruct_traditional(ds, cfg);
            best = std::min(best, r.stats.wall_time);
        }
        return best;
    };

    // Fast runs first (min-of-3 to de-noise single-core timing); the long
    // traditional runs have huge margin on their ratio and get one rep.
    double fast64 = timed(Method::Fast, 64, 3);
    double fast256 = timed(Method::Fast, 256, 3);
    double trad64 = timed(Method::Traditional, 64, 1);
    double trad256 = timed(Method::Traditional, 256, 1);

    double trad_ratio = trad256 / trad64;
    double fast_ratio = fast256 / fast64;
    double speedup = trad256 / fast256;
    double secs = elapsed(t0);
    report(4, "scaling",
           trad_ratio >= 20.0 && fast_ratio <= 8.0 && speedup >= 10.0 && secs < 1800.0,
           fmt("trad 64->256 ratio=%.1f fast ratio=%.1f speedup@256=%.1f "
               "(trad256=%.1fs fast256=%.2fs) runtime=%.0fs",
               trad_ratio, fast_ratio, speedup, trad256, fast256, secs));
}

void criterion_5_tessellation_plateau() {
    HiddenScene scene = two_patch_scene(8, 4, 4);
    fit_bins(scene, 128);
    TransientDataset ds = simulate_dataset(scene);

    const int max_sweep = 5, ref_level = 6;
    ReconstructionConfig cfg;
    cfg.bounds = hidden_bounds();
    cfg.resolution = 128;
    cfg.mode = AccumMode::Float;
    cfg.method = Method::Fast;

    // Pin each run to one tessellation level: tiny epsilon saturates the
    // atlas at its max level.
    cfg.epsilon = 1e-12;

    cfg.max_tess_level = ref_level;
    VoxelGrid reference = reconstruct_fast(ds, cfg).grid;

    // Round-robin the timing reps across levels so a transient slowdown on
    // this single-core box cannot sink one level's minimum alone.
    std::vector<double> mse(max_sweep + 1), wall(max_sweep + 1, 1e300);
    std::vector<double> a_values;
    for (int rep = 0; rep < 3; ++rep)
        for (int o = 0; o <= max_sweep; ++o) {
            cfg.max_tess_level = o;
            ReconstructionResult r = reconstruct_fast(ds, cfg);
            auto u = static_cast<std::size_t>(o);
            wall[u] = std::min(wall[u], r.stats.wall_time);
            if (rep == 0) mse[u] = grid_compare(reference, r.grid).mse;
        }

    // Median semi-major axis over emitted ellipsoids.
    {
        const std::size_t P = ds.pixels(), T = ds.time_bins();
        for (std::size_t s = 0; s < ds.shots(); ++s)
            for (std::size_t p = 0; p < P; ++p) {
                double offset = ds.lasers.laser_offsets[s] + ds.wall.camera_offsets[p];
                double fd = distance(ds.lasers.positions[s], ds.wall.positions[p]);
                for (std::size_t k = 0; k < T; ++k) {
                    if (!(ds.at(s, p, k) > 0.0f)) continue;
                    double d = ds.axis.c * (ds.axis.bin_to_time(k) - offset);
                    if (d > fd * (1 + 1e-9) && d > 0) a_values.push_back(d / 2);
                }
            }
    }
    std::sort(a_values.begin(), a_values.end());
    double a_median = a_values.empty() ? 0.0 : a_values[a_values.size() / 2];

    SphereAtlas atlas = build_sphere_atlas(max_sweep);
    double voxel = VoxelGrid::create(hidden_bounds(), 128, AccumMode::Float)
                       .geometry().voxel_size;
    int plateau = max_sweep;
    for (int o = 0; o <= max_sweep; ++o)
        if (atlas.at(o).alpha * a_median < voxel) {
            plateau = o;
            break;
        }

    bool mse_ok = true, time_ok = true;
    std::string detail = fmt("plateau_level=%d a_median=%.2f ", plateau, a_median);
    // "Changes < 5%" is read off the convergence curve: past the plateau
    // level, each step moves by less than 5% of the sweep's full range
    // (the level-0 MSE).
    double range = std::max(mse[0], 1e-300);
    for (int o = 0; o < max_sweep; ++o) {
        auto u = static_cast<std::size_t>(o);
        if (mse[u + 1] > mse[u] * (1.0 + 1e-9)) mse_ok = false;
        if (o >= plateau && std::abs(mse[u + 1] - mse[u]) >= 0.05 * range)
            mse_ok = false;
        if (wall[u + 1] <= wall[u]) time_ok = false;
    }
    for (int o = 0; o <= max_sweep; ++o)
        detail += fmt("L%d:mse=%.3g,t=%.3fs ", o, mse[static_cast<std::size_t>(o)],
                      wall[static_cast<std::size_t>(o)]);
    report(5, "tessellation plateau", a_median > 0.0 && mse_ok && time_ok, detail);
}

void criterion_6_quantization_fidelity() {
    HiddenScene scene = two_patch_scene(12, 6, 6);
    fit_bins(scene, 192);
    TransientDataset ds = simulate_dataset(scene);

    ReconstructionConfig cfg;
    cfg.bounds = hidden_bounds();
    cfg.resolution = 48;
    cfg.method = Method::Fast;
    cfg.mode = AccumMode::Integer;
    VoxelGrid gi = reconstruct_fast(ds, cfg).grid;
    cfg.mode = AccumMode::Float;
    VoxelGrid gf = reconstruct_fast(ds, cfg).grid;

    double mi = gi.max_value(), mf = gf.max_value();
    bool nonzero = mi > 0.0 && mf > 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < gi.cell_count(); ++i)
        worst = std::max(worst, std::abs(gi.value(i) / mi - gf.value(i) / mf));
    report(6, "quantization fidelity", nonzero && worst <= 0.02,
           fmt("nonzero=%d max_voxel_diff=%.4f", nonzero ? 1 : 0, worst));
}

void criterion_7_determinism() {
    HiddenScene scene = two_patch_scene(8, 4, 4);
    fit_bins(scene, 128);
    TransientDataset ds = simulate_dataset(scene);

    ReconstructionConfig cfg;
    cfg.bounds = hidden_bounds();
    cfg.resolution = 48;
    cfg.method = Method::Fast;
    cfg.mode = AccumMode::Integer;

    cfg.threads = 1;
    VoxelGrid base = reconstruct_fast(ds, cfg).grid;
    cfg.threads = 4;
    VoxelGrid threaded = reconstruct_fast(ds, cfg).grid;
    cfg.threads = 7;
    VoxelGrid threaded7 = reconstruct_fast(ds, cfg).grid;

    // reversed shot order
    TransientDataset rev = ds;
    std::size_t S = ds.shots();
    for (std::size_t s = 0; s < S; ++s) {
        std::size_t src = S - 1 - s;
        rev.lasers.positions[s] = ds.lasers.positions[src];
        rev.lasers.laser_offsets[s] = ds.lasers.laser_offsets[src];
        std::memcpy(rev.intensity.data() + s * ds.pixels() * ds.time_bins(),
                    ds.intensity.data() + src * ds.pixels() * ds.time_bins(),
                    ds.pixels() * ds.time_bins() * sizeof(float));
    }
    cfg.threads = 3;
    VoxelGrid reversed = reconstruct_fast(rev, cfg).grid;

    bool pass = base.ints() == threaded.ints() && base.ints() == threaded7.ints() &&
                base.ints() == reversed.ints();
    report(7, "determinism", pass,
           pass ? "bitwise identical across threads and shot order" : "grids diverged");
}

void criterion_8_io() {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "nlos_acceptance_io";
    fs::create_directories(dir);
    bool pass = true;
    std::string detail;

    try {
        HiddenScene scene = two_patch_scene(4, 2, 2);
        TransientDataset ds = simulate_dataset(scene);
        std::string p1 = (dir / "a.nltd").string(), p2 = (dir / "b.nltd").string();
        write_dataset(ds, p1);
        write_dataset(read_dataset(p1), p2);
        std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
        std::stringstream s1, s2;
        s1 << f1.rdbuf();
        s2 << f2.rdbuf();
        if (s1.str() != s2.str() || s1.str().empty()) {
            pass = false;
            detail += "dataset round trip not bitwise; ";
        }

        VoxelGrid grid = VoxelGrid::create({{0, 0, 0}, {1, 1, 1}}, 8, AccumMode::Integer);
        grid.ints()[5] = 1234;
        std::string v1 = (dir / "a.nlvg").string(), v2 = (dir / "b.nlvg").string();
        write_volume(grid, v1);
        write_volume(read_volume(v1), v2);
        std::ifstream g1(v1, std::ios::binary), g2(v2, std::ios::binary);
        std::stringstream t1, t2;
        t1 << g1.rdbuf();
        t2 << g2.rdbuf();
        if (t1.str() != t2.str()) {
            pass = false;
            detail += "volume round trip not bitwise; ";
        }

        // malformed headers must raise typed errors, never crash
        std::string broken = t1.str();
        broken[0] = 'Z';
        std::ofstream(dir / "broken.nlvg", std::ios::binary) << broken;
        try {
            read_volume((dir / "broken.nlvg").string());
            pass = false;
            detail += "bad magic accepted; ";
        } catch (const MalformedMagicError&) {
        }
        std::string short_ds = s1.str().substr(0, 20);
        std::ofstream(dir / "short.nltd", std::ios::binary) << short_ds;
        try {
            read_dataset((dir / "short.nltd").string());
            pass = false;
            detail += "truncated dataset accepted; ";
        } catch (const TruncatedPayloadError&) {
        }
    } catch (const std::exception& e) {
        pass = false;
        detail += std::string("unexpected exception: ") + e.what();
    }
    fs::remove_all(dir);
    report(8, "I/O round trips and typed errors", pass,
           pass ? "bitwise round trips, typed failures" : detail);
}

void criterion_9_sparsity_accounting() {
    HiddenScene scene = two_patch_scene(8, 4, 4);
    fit_bins(scene, 128);
    TransientDataset ds = simulate_dataset(scene);

    ReconstructionConfig cfg;
    cfg.bounds = hidden_bounds();
    cfg.method = Method::Fast;

    bool pass = ds.nonzero_bins() > 0;
    std::uint64_t first_emitted = 0;
    std::string detail;
    for (std::size_t res : {32, 64, 128}) {
        cfg.resolution = res;
        ReconstructionStats st = reconstruct_fast(ds, cfg).stats;
        std::uint64_t total =
            st.ellipsoids_emitted + st.ellipsoids_skipped_zero + st.ellipsoids_degenerate;
        if (total != ds.intensity.size()) pass = false;
        if (first_emitted == 0)
            first_emitted = st.ellipsoids_emitted;
        else if (st.ellipsoids_emitted != first_emitted)
            pass = false;
        detail += fmt("res%zu:emitted=%llu ", res,
                      static_cast<unsigned long long>(st.ellipsoids_emitted));
    }
    detail += fmt("SPT=%zu", ds.intensity.size());
    report(9, "sparsity accounting", pass, detail);
}

}  // namespace

int main(int argc, char** argv) {
    // Optional args restrict the run to the listed criterion numbers.
    auto wanted = [&](int n) {
        if (argc < 2) return true;
        for (int i = 1; i < argc; ++i)
            if (std::atoi(argv[i]) == n) return true;
        return false;
    };
    if (wanted(1)) criterion_1_oracle_equivalence();
    if (wanted(2)) criterion_2_method_agreement();
    if (wanted(3)) criterion_3_localization();
    if (wanted(4)) criterion_4_scaling();
    if (wanted(5)) criterion_5_tessellation_plateau();
    if (wanted(6)) criterion_6_quantization_fidelity();
    if (wanted(7)) criterion_7_determinism();
    if (wanted(8)) criterion_8_io();
    if (wanted(9)) criterion_9_sparsity_accounting();
    if (failures == 0)
        std::printf("all criteria passed\n");
    else
        std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
