#include "nlos/reconstruct.hpp"

#include <atomic>
#include <chrono>
#include <cmath>

#include "nlos/errors.hpp"
#include "nlos/parallel.hpp"

namespace nlos {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint32_t quantize_weight(float intensity, float max_intensity) {
    // 8-bit normalization of the intensities for integer accumulation.
    return static_cast<std::uint32_t>(
        std::lround(255.0 * static_cast<double>(intensity) / static_cast<double>(max_intensity)));
}

}  // namespace

void ReconstructionConfig::validate() const {
    if (resolution < 1) throw ValidationError("config: resolution must be >= 1");
    if (!(intensity_threshold >= 0.0 && intensity_threshold < 1.0))
        throw ValidationError("config: intensity_threshold must be in [0, 1)");
    if (max_tess_level < 0 || max_tess_level > 7)
        throw ValidationError("config: max_tess_level must be in [0, 7]");
    if (g_correction && mode == AccumMode::Integer)
        throw ConfigConflictError("config: g_correction requires float mode");
}

Box3 auto_bounds(const TransientDataset& ds) {
    if (ds.wall.positions.empty()) throw ValidationError("auto bounds: empty wall sampling");
    Box3 wall = Box3::around(ds.wall.positions.front());
    for (const auto& p : ds.wall.positions) wall.expand(p);

    Vec3 ext = wall.extent();
    int thin = 0;
    if (ext.y < ext[thin]) thin = 1;
    if (ext.z < ext[thin]) thin = 2;
    double depth = std::max({ext.x, ext.y, ext.z});
    if (depth <= 0.0) depth = 1.0;

    Box3 box = wall;
    box.min[thin] = wall.max[thin];
    box.max[thin] = wall.max[thin] + depth;
    for (int axis = 0; axis < 3; ++axis) {
        if (box.max[axis] - box.min[axis] <= 0.0) {
            box.min[axis] -= depth * 0.5;
            box.max[axis] += depth * 0.5;
        }
        double c = (box.min[axis] + box.max[axis]) * 0.5;
        double half = (box.max[axis] - box.min[axis]) * 0.5 * 1.1;
        box.min[axis] = c - half;
        box.max[axis] = c + half;
    }
    // never reach behind the wall plane
    box.min[thin] = std::max(box.min[thin], wall.max[thin]);
    return box;
}

Box3 resolve_bounds(const TransientDataset& ds, const ReconstructionConfig& cfg) {
    return cfg.bounds ? *cfg.bounds : auto_bounds(ds);
}

ReconstructionResult reconstruct_traditional(const TransientDataset& ds,
                                             const ReconstructionConfig& cfg) {
    cfg.validate();
    ds.validate();
    auto start = Clock::now();

    VoxelGrid grid = VoxelGrid::create(resolve_bounds(ds, cfg), cfg.resolution, cfg.mode);
    const GridGeometry& g = grid.geometry();

    const std::size_t S = ds.shots(), P = ds.pixels();
    const float max_i = ds.max_intensity();
    const bool integer = cfg.mode == AccumMode::Integer;

    struct Pair {
        Vec3 l, w;
        double offset;
        const float* row;
    };
    std::vector<Pair> pairs;
    pairs.reserve(S * P);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t p = 0; p < P; ++p)
            pairs.push_back({ds.lasers.positions[s], ds.wall.positions[p],
                             ds.lasers.laser_offsets[s] + ds.wall.camera_offsets[p],
                             ds.intensity.data() + (s * P + p) * ds.axis.bins});

    parallel_blocks(g.cell_count(), cfg.threads, [&](unsigned, std::size_t begin,
                                                     std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            std::size_t ix = idx % g.nx;
            std::size_t iy = (idx / g.nx) % g.ny;
            std::size_t iz = idx / (g.nx * g.ny);
            Vec3 x = g.voxel_center(ix, iy, iz);
            double fsum = 0.0;
            std::uint64_t isum = 0;
            for (const auto& pr : pairs) {
                double t = three_bounce_time(pr.l, x, pr.w, ds.axis.c) + pr.offset;
                auto bin = ds.axis.time_to_bin(t);
                if (!bin) continue;
                float v = pr.row[*bin];
                if (v <= 0.0f) continue;
                if (integer) {
                    isum += quantize_weight(v, max_i);
                } else {
                    double val = v;
                    if (cfg.g_correction)
                        val *= distance_sq(pr.l, x) * distance_sq(x, pr.w);  // G^-1
                    fsum += val;
                }
            }
            if (integer) {
                if (isum > 0xffffffffull)
                    throw AccumulatorOverflowError("traditional: u32 accumulator overflow");
                if (isum) grid.add(idx, static_cast<std::uint32_t>(isum));
            } else if (fsum > 0.0) {
                grid.add_float(idx, fsum);
            }
        }
    });

    ReconstructionStats stats;
    stats.wall_time = seconds_since(start);
    return {std::move(grid), stats};
}

ReconstructionResult reconstruct_fast(const TransientDataset& ds,
                                      const ReconstructionConfig& cfg) {
    cfg.validate();
    ds.validate();
    auto start = Clock::now();

    VoxelGrid grid = VoxelGrid::create(resolve_bounds(ds, cfg), cfg.resolution, cfg.mode);
    SphereAtlas atlas = build_sphere_atlas(cfg.max_tess_level);
    const double epsilon = cfg.epsilon > 0.0 ? cfg.epsilon : grid.geometry().voxel_size;

    const std::size_t S = ds.shots(), P = ds.pixels(), T = ds.axis.bins;
    const float max_i = ds.max_intensity();
    const float threshold = static_cast<float>(cfg.intensity_threshold * max_i);
    const bool integer = cfg.mode == AccumMode::Integer;

    unsigned threads = cfg.threads == 0 ? hardware_threads() : cfg.threads;
    if (threads > S * P) threads = std::max<std::size_t>(1, S * P);

    // Float mode accumulates into per-worker grids reduced in worker order,
    // so results do not depend on scheduling.
    std::vector<VoxelGrid> partials;
    if (!integer && threads > 1)
        for (unsigned w = 0; w < threads; ++w)
            partials.push_back(VoxelGrid::from_parts(grid.geometry(), AccumMode::Float));

    std::vector<ReconstructionStats> worker_stats(threads);

    parallel_blocks(S * P, threads, [&](unsigned worker, std::size_t begin, std::size_t end) {
        ReconstructionStats& st = worker_stats[worker];
        VoxelGrid& target = (!integer && threads > 1) ? partials[worker] : grid;
        const bool exclusive = !integer || threads == 1;  // sole writer of `target`
        SplatScratch scratch;
        for (std::size_t sp = begin; sp < end; ++sp) {
            std::size_t s = sp / P, p = sp % P;
            const Vec3& l = ds.lasers.positions[s];
            const Vec3& w = ds.wall.positions[p];
            double offset = ds.lasers.laser_offsets[s] + ds.wall.camera_offsets[p];
            double focal_dist = distance(l, w);
            const float* row = ds.intensity.data() + sp * T;
            for (std::size_t k = 0; k < T; ++k) {
                float v = row[k];
                if (!(v > 0.0f) || v <= threshold) {
                    ++st.ellipsoids_skipped_zero;
                    continue;
                }
                double d = ds.axis.c * (ds.axis.bin_to_time(k) - offset);
                if (!(d > 0.0) || d <= focal_dist + 1e-9 * focal_dist) {
                    ++st.ellipsoids_degenerate;
                    continue;
                }
                double weight;
                if (integer) {
                    std::uint32_t q = quantize_weight(v, max_i);
                    if (q == 0) {
                        ++st.ellipsoids_skipped_zero;
                        continue;
                    }
                    weight = static_cast<double>(q);
                } else {
                    weight = static_cast<double>(v);
                }
                ProlateSpheroid e = ellipsoid_from_measurement(l, w, d);
                SplatStats ss =
                    splat_ellipsoid(target, e, weight, atlas, epsilon, cfg.dedup, scratch,
                                    exclusive);
                ++st.ellipsoids_emitted;
                st.triangles_total += ss.triangles;
                if (ss.saturated) ++st.saturated_levels;
            }
        }
    });

    for (unsigned w = 0; w < partials.size(); ++w) {
        const auto& src = partials[w].floats();
        auto& dst = grid.floats();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    ReconstructionStats stats;
    for (const auto& st : worker_stats) {
        stats.ellipsoids_emitted += st.ellipsoids_emitted;
        stats.ellipsoids_skipped_zero += st.ellipsoids_skipped_zero;
        stats.ellipsoids_degenerate += st.ellipsoids_degenerate;
        stats.triangles_total += st.triangles_total;
        stats.saturated_levels += st.saturated_levels;
    }
    stats.wall_time = seconds_since(start);
    return {std::move(grid), stats};
}

VoxelGrid reconstruct_pipeline(const TransientDataset& ds, const ReconstructionConfig& cfg,
                               bool filter) {
    ReconstructionResult res = cfg.method == Method::Fast ? reconstruct_fast(ds, cfg)
                                                          : reconstruct_traditional(ds, cfg);
    if (filter) return laplacian_filter(res.grid);

    VoxelGrid out = VoxelGrid::from_parts(res.grid.geometry(), AccumMode::Float);
    double max_v = res.grid.max_value();
    if (max_v > 0.0) {
        auto& dst = out.floats();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = res.grid.value(i) / max_v;
    }
    return out;
}

}  // namespace nlos
