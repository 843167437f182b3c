#ifndef NLOS_VOXEL_HPP
#define NLOS_VOXEL_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nlos/ellipsoid.hpp"
#include "nlos/geometry.hpp"

namespace nlos {

enum class AccumMode : std::uint8_t { Integer = 0, Float = 1 };

/// Cubic-voxel lattice covering an axis-aligned box.
struct GridGeometry {
    Box3 bounds;
    std::size_t nx = 0, ny = 0, nz = 0;
    double voxel_size = 0.0;

    std::size_t cell_count() const { return nx * ny * nz; }

    std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return (iz * ny + iy) * nx + ix;  // x-fastest
    }

    Vec3 voxel_center(std::size_t ix, std::size_t iy, std::size_t iz) const {
        return bounds.min + Vec3{(static_cast<double>(ix) + 0.5) * voxel_size,
                                 (static_cast<double>(iy) + 0.5) * voxel_size,
                                 (static_cast<double>(iz) + 0.5) * voxel_size};
    }

    Box3 voxel_box(std::size_t ix, std::size_t iy, std::size_t iz) const {
        Vec3 lo = bounds.min + Vec3{static_cast<double>(ix), static_cast<double>(iy),
                                    static_cast<double>(iz)} * voxel_size;
        return {lo, lo + Vec3{voxel_size, voxel_size, voxel_size}};
    }

    bool same_as(const GridGeometry& o) const {
        return nx == o.nx && ny == o.ny && nz == o.nz && bounds.min == o.bounds.min &&
               bounds.max == o.bounds.max;
    }
};

/// Accumulation volume for the confidence map, in u32 or f64 mode.
class VoxelGrid {
  public:
    VoxelGrid() = default;

    /// grid_new: cubic voxels of edge max_extent/n; shorter axes are padded
    /// symmetrically to a whole number of voxels.
    static VoxelGrid create(const Box3& bounds, std::size_t n, AccumMode mode);

    const GridGeometry& geometry() const { return geom_; }
    AccumMode mode() const { return mode_; }
    std::size_t cell_count() const { return geom_.cell_count(); }

    /// Thread-safe in integer mode (CAS add with overflow check).
    void add(std::size_t idx, std::uint32_t w);
    /// Single-writer integer add; same sums as add(), no atomics.
    void add_unsafe(std::size_t idx, std::uint32_t w);
    void add_float(std::size_t idx, double w);

    double value(std::size_t idx) const {
        return mode_ == AccumMode::Integer ? static_cast<double>(ivalues_[idx])
                                           : fvalues_[idx];
    }
    double max_value() const;
    std::size_t argmax() const;  // first-index tie-break, x-fastest order

    std::vector<std::uint32_t>& ints() { return ivalues_; }
    const std::vector<std::uint32_t>& ints() const { return ivalues_; }
    std::vector<double>& floats() { return fvalues_; }
    const std::vector<double>& floats() const { return fvalues_; }

    static VoxelGrid from_parts(GridGeometry geom, AccumMode mode);

  private:
    GridGeometry geom_;
    AccumMode mode_ = AccumMode::Integer;
    std::vector<std::uint32_t> ivalues_;
    std::vector<double> fvalues_;
};

/// Dominant-axis (normal-swizzled) thin rasterization; appends in-grid
/// voxel indices to `out`.
void rasterize_triangle(const GridGeometry& geom, const Triangle& tri,
                        std::vector<std::uint64_t>& out);

struct SplatStats {
    std::size_t triangles = 0;
    std::size_t voxel_touches = 0;
    int level = 0;
    bool saturated = false;
};

/// Reusable per-worker deduplication buffer: one epoch stamp per grid cell.
struct SplatScratch {
    std::vector<std::uint8_t> stamp;
    std::uint8_t epoch = 0;
};

/// Tessellates, transforms and rasterizes one ellipsoid into the grid.
/// dedup=true adds `weight` once per touched voxel; dedup=false adds once
/// per (triangle, voxel) emission. exclusive=true promises the caller is the
/// only writer, enabling non-atomic accumulation (same sums either way).
SplatStats splat_ellipsoid(VoxelGrid& grid, const ProlateSpheroid& spheroid, double weight,
                           const SphereAtlas& atlas, double epsilon, bool dedup,
                           SplatScratch& scratch, bool exclusive = false);
SplatStats splat_ellipsoid(VoxelGrid& grid, const ProlateSpheroid& spheroid, double weight,
                           const SphereAtlas& atlas, double epsilon, bool dedup = true);

/// 6-neighbor Laplacian response max(0, 6*v - sum(neighbors)), zero-padded,
/// normalized to [0, 1]. Always returns a float-mode grid.
VoxelGrid laplacian_filter(const VoxelGrid& grid);

struct GridComparison {
    double mse = 0.0;
    double pearson = 0.0;
    long long peak_offset = 0;  // Chebyshev distance between argmax voxels
};

/// Metrics over max-normalized values; throws GeometryMismatchError.
GridComparison grid_compare(const VoxelGrid& a, const VoxelGrid& b);

}  // namespace nlos

#endif
