#ifndef NLOS_RECONSTRUCT_HPP
#define NLOS_RECONSTRUCT_HPP

#include <cstdint>
#include <optional>

#include "nlos/transient.hpp"
#include "nlos/voxel.hpp"

namespace nlos {

enum class Method : std::uint8_t { Traditional, Fast };

struct ReconstructionConfig {
    std::optional<Box3> bounds;  // empty = auto (mirrored wall bbox, +10%)
    std::size_t resolution = 64;
    Method method = Method::Fast;
    AccumMode mode = AccumMode::Integer;
    double epsilon = 0.0;              // tessellation error bound; <= 0 means voxel size
    double intensity_threshold = 0.0;  // relative to dataset max, in [0, 1)
    bool g_correction = false;         // traditional only; requires float mode
    bool dedup = true;                 // fast only
    int max_tess_level = 5;
    unsigned threads = 0;  // 0 = hardware

    void validate() const;
};

struct ReconstructionStats {
    std::uint64_t ellipsoids_emitted = 0;
    std::uint64_t ellipsoids_skipped_zero = 0;
    std::uint64_t ellipsoids_degenerate = 0;
    std::uint64_t triangles_total = 0;
    std::uint64_t saturated_levels = 0;
    double wall_time = 0.0;  // seconds
};

struct ReconstructionResult {
    VoxelGrid grid;
    ReconstructionStats stats;
};

/// Wall bounding box mirrored into the hidden half-space (+thin-axis side),
/// expanded by 10%.
Box3 auto_bounds(const TransientDataset& ds);

Box3 resolve_bounds(const TransientDataset& ds, const ReconstructionConfig& cfg);

/// Per-voxel back-projection: p(x) = sum_{l,p} I_l(p, tau(l->x->p)) [* G^-1].
ReconstructionResult reconstruct_traditional(const TransientDataset& ds,
                                             const ReconstructionConfig& cfg);

/// Ellipsoid-voxelization back-projection: one ellipsoid per nonzero (s,p,t).
ReconstructionResult reconstruct_fast(const TransientDataset& ds,
                                      const ReconstructionConfig& cfg);

/// Runs the configured method, optionally applies the Laplacian filter, and
/// returns a max-normalized float grid.
VoxelGrid reconstruct_pipeline(const TransientDataset& ds, const ReconstructionConfig& cfg,
                               bool filter);

}  // namespace nlos

#endif
