#include "nlos/voxel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "nlos/errors.hpp"

namespace nlos {

namespace {

std::size_t memory_cap_bytes() {
    if (const char* env = std::getenv("NLOS_MEMORY_CAP_BYTES")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    return std::size_t{4} << 30;  // 4 GiB
}

}  // namespace

VoxelGrid VoxelGrid::create(const Box3& bounds, std::size_t n, AccumMode mode) {
    if (n < 1) throw ValidationError("grid: resolution must be >= 1");
    if (bounds.empty()) throw ValidationError("grid: bounds must be non-empty");

    Vec3 ext = bounds.extent();
    double max_ext = std::max({ext.x, ext.y, ext.z});
    double edge = max_ext / static_cast<double>(n);

    GridGeometry g;
    g.voxel_size = edge;
    std::size_t res[3];
    Vec3 center = bounds.center();
    for (int axis = 0; axis < 3; ++axis) {
        double cells = ext[axis] / edge;
        res[axis] = static_cast<std::size_t>(std::ceil(cells - 1e-9));
        if (res[axis] < 1) res[axis] = 1;
        double half = static_cast<double>(res[axis]) * edge * 0.5;
        g.bounds.min[axis] = center[axis] - half;
        g.bounds.max[axis] = center[axis] + half;
    }
    g.nx = res[0];
    g.ny = res[1];
    g.nz = res[2];

    std::size_t width = mode == AccumMode::Integer ? 4 : 8;
    if (g.cell_count() > memory_cap_bytes() / width)
        throw ResolutionCapError("grid: " + std::to_string(g.cell_count()) +
                                 " cells exceed the memory cap");
    return from_parts(g, mode);
}

VoxelGrid VoxelGrid::from_parts(GridGeometry geom, AccumMode mode) {
    VoxelGrid grid;
    grid.geom_ = geom;
    grid.mode_ = mode;
    if (mode == AccumMode::Integer)
        grid.ivalues_.assign(geom.cell_count(), 0u);
    else
        grid.fvalues_.assign(geom.cell_count(), 0.0);
    return grid;
}

void VoxelGrid::add(std::size_t idx, std::uint32_t w) {
    if (mode_ != AccumMode::Integer) {
        fvalues_[idx] += static_cast<double>(w);
        return;
    }
    std::atomic_ref<std::uint32_t> cell(ivalues_[idx]);
    std::uint32_t old = cell.load(std::memory_order_relaxed);
    do {
        if (old > std::numeric_limits<std::uint32_t>::max() - w)
            throw AccumulatorOverflowError("grid: u32 accumulator overflow at cell " +
                                           std::to_string(idx));
    } while (!cell.compare_exchange_weak(old, old + w, std::memory_order_relaxed));
}

void VoxelGrid::add_unsafe(std::size_t idx, std::uint32_t w) {
    if (mode_ != AccumMode::Integer) {
        fvalues_[idx] += static_cast<double>(w);
        return;
    }
    std::uint32_t& cell = ivalues_[idx];
    if (cell > std::numeric_limits<std::uint32_t>::max() - w)
        throw AccumulatorOverflowError("grid: u32 accumulator overflow at cell " +
                                       std::to_string(idx));
    cell += w;
}

void VoxelGrid::add_float(std::size_t idx, double w) {
    if (mode_ == AccumMode::Integer)
        add(idx, static_cast<std::uint32_t>(w));
    else
        fvalues_[idx] += w;
}

double VoxelGrid::max_value() const {
    double m = 0.0;
    for (std::size_t i = 0; i < cell_count(); ++i) m = std::max(m, value(i));
    return m;
}

std::size_t VoxelGrid::argmax() const {
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t i = 0; i < cell_count(); ++i) {
        double v = value(i);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    return best;
}

namespace {

struct Projected {
    double u, v;
};

template <class Emit>
inline void emit_point_voxel_fn(const GridGeometry& g, const Vec3& vox, Emit&& emit) {
    double fx = std::floor(vox.x), fy = std::floor(vox.y), fz = std::floor(vox.z);
    if (fx < 0 || fy < 0 || fz < 0) return;
    auto ix = static_cast<std::size_t>(fx), iy = static_cast<std::size_t>(fy),
         iz = static_cast<std::size_t>(fz);
    if (ix >= g.nx || iy >= g.ny || iz >= g.nz) return;
    emit(g.index(ix, iy, iz));
}

template <class Emit>
inline void rasterize_impl(const GridGeometry& g, const Vec3& wv0, const Vec3& wv1,
                           const Vec3& wv2, Emit&& emit) {
    // Work in voxel coordinates: cell (i,j,k) spans [i,i+1) etc.
    const double h = g.voxel_size;
    Vec3 a = (wv0 - g.bounds.min) / h;
    Vec3 b = (wv1 - g.bounds.min) / h;
    Vec3 c = (wv2 - g.bounds.min) / h;

    Vec3 n = cross(b - a, c - a);
    int w_axis = 0;
    if (std::abs(n.y) > std::abs(n[w_axis])) w_axis = 1;
    if (std::abs(n.z) > std::abs(n[w_axis])) w_axis = 2;
    const int u_axis = (w_axis + 1) % 3;
    const int v_axis = (w_axis + 2) % 3;

    Projected p0{a[u_axis], a[v_axis]}, p1{b[u_axis], b[v_axis]}, p2{c[u_axis], c[v_axis]};
    double area2 = (p1.u - p0.u) * (p2.v - p0.v) - (p1.v - p0.v) * (p2.u - p0.u);
    if (area2 == 0.0) {
        // Degenerate projection; mark the voxels holding the vertices.
        emit_point_voxel_fn(g, a, emit);
        emit_point_voxel_fn(g, b, emit);
        emit_point_voxel_fn(g, c, emit);
        return;
    }
    if (area2 < 0.0) std::swap(p1, p2);

    const std::size_t dims[3] = {g.nx, g.ny, g.nz};
    double min_u = std::min({p0.u, p1.u, p2.u});
    double max_u = std::max({p0.u, p1.u, p2.u});
    double min_v = std::min({p0.v, p1.v, p2.v});
    double max_v = std::max({p0.v, p1.v, p2.v});
    long long i0 = std::max(0LL, static_cast<long long>(std::ceil(min_u - 0.5)));
    long long i1 = std::min(static_cast<long long>(dims[u_axis]) - 1,
                            static_cast<long long>(std::floor(max_u - 0.5)));
    long long j0 = std::max(0LL, static_cast<long long>(std::ceil(min_v - 0.5)));
    long long j1 = std::min(static_cast<long long>(dims[v_axis]) - 1,
                            static_cast<long long>(std::floor(max_v - 0.5)));
    if (i0 > i1 || j0 > j1) return;

    // Plane depth along w: w = (n.a - nu*u - nv*v) / nw evaluated at centers.
    const double nu = n[u_axis], nv = n[v_axis], nw = n[w_axis];
    const double nd = dot(n, a);
    const double inv_nw = 1.0 / nw;

    // Per-edge constants: e(cu, cv) = du*(cv - p.v) + dv*p.u - dv*cu, with the
    // same tie rule as edge_accepts (dv > 0, or dv == 0 with du < 0).
    struct EdgeEq {
        double du, dv, pu, pv;
        bool tie;
    };
    auto make_edge = [](const Projected& pa, const Projected& pb) {
        double du = pb.u - pa.u, dv = pb.v - pa.v;
        return EdgeEq{du, dv, pa.u, pa.v, dv > 0.0 || (dv == 0.0 && du < 0.0)};
    };
    const EdgeEq edges[3] = {make_edge(p0, p1), make_edge(p1, p2), make_edge(p2, p0)};

    std::size_t idx[3];
    for (long long j = j0; j <= j1; ++j) {
        double cv = static_cast<double>(j) + 0.5;
        double row_a[3];
        for (int k = 0; k < 3; ++k)
            row_a[k] = edges[k].du * (cv - edges[k].pv) + edges[k].dv * edges[k].pu;
        double row_w = nd - nv * cv;
        // Conservative per-row span from e = row_a - dv*cu >= 0 (one cell of
        // slack each side); the exact per-cell tests below stay authoritative.
        long long is = i0, ie = i1;
        bool empty = false;
        for (int k = 0; k < 3; ++k) {
            double dv = edges[k].dv;
            if (dv > 0.0) {
                ie = std::min(ie, static_cast<long long>(std::floor(row_a[k] / dv - 0.5)) + 1);
            } else if (dv < 0.0) {
                is = std::max(is, static_cast<long long>(std::ceil(row_a[k] / dv - 0.5)) - 1);
            } else if (row_a[k] < 0.0) {
                empty = true;
                break;
            }
        }
        if (empty || is > ie) continue;
        for (long long i = is; i <= ie; ++i) {
            double cu = static_cast<double>(i) + 0.5;
            bool accept = true;
            for (int k = 0; k < 3; ++k) {
                double e = row_a[k] - edges[k].dv * cu;
                if (e < 0.0 || (e == 0.0 && !edges[k].tie)) {
                    accept = false;
                    break;
                }
            }
            if (!accept) continue;
            double w = (row_w - nu * cu) * inv_nw;
            double fw = std::floor(w);
            if (fw < 0 || fw >= static_cast<double>(dims[w_axis])) continue;
            idx[u_axis] = static_cast<std::size_t>(i);
            idx[v_axis] = static_cast<std::size_t>(j);
            idx[w_axis] = static_cast<std::size_t>(fw);
            emit(g.index(idx[0], idx[1], idx[2]));
        }
    }
}

}  // namespace

void rasterize_triangle(const GridGeometry& g, const Triangle& tri,
                        std::vector<std::uint64_t>& out) {
    rasterize_impl(g, tri.v0, tri.v1, tri.v2,
                   [&out](std::size_t idx) { out.push_back(idx); });
}

SplatStats splat_ellipsoid(VoxelGrid& grid, const ProlateSpheroid& spheroid, double weight,
                           const SphereAtlas& atlas, double epsilon, bool dedup,
                           SplatScratch& scratch, bool exclusive) {
    if (!(weight >= 0.0)) throw ValidationError("splat: weight must be >= 0");
    if (grid.mode() == AccumMode::Integer &&
        (weight > 255.0 || weight != std::floor(weight)))
        throw ValidationError("splat: integer mode needs an integral weight in [0, 255]");

    SplatStats stats;
    LevelSelection sel = select_tessellation_level(atlas, spheroid, epsilon);
    stats.level = sel.level;
    stats.saturated = sel.saturated;
    const TessellatedSphere& sphere = atlas.at(sel.level);
    stats.triangles = sphere.triangles.size();
    if (weight == 0.0) return stats;

    const GridGeometry& geom = grid.geometry();
    std::uint8_t epoch = 0;
    if (dedup) {
        if (scratch.stamp.size() != geom.cell_count()) {
            scratch.stamp.assign(geom.cell_count(), 0u);
            scratch.epoch = 0;
        }
        if (++scratch.epoch == 0) {  // epoch wrapped: reset the stamps
            std::fill(scratch.stamp.begin(), scratch.stamp.end(), 0u);
            scratch.epoch = 1;
        }
        epoch = scratch.epoch;
    }

    const bool integer = grid.mode() == AccumMode::Integer;
    const auto w32 = static_cast<std::uint32_t>(weight);
    std::size_t touches = 0;
    Affine m = spheroid.transform();
    auto emit = [&](std::size_t idx) {
        if (dedup) {
            if (scratch.stamp[idx] == epoch) return;
            scratch.stamp[idx] = epoch;
        }
        ++touches;
        if (integer) {
            if (exclusive)
                grid.add_unsafe(idx, w32);
            else
                grid.add(idx, w32);
        } else {
            grid.add_float(idx, weight);
        }
    };
    for (const auto& tr : sphere.triangles)
        rasterize_impl(geom, m(tr.v0), m(tr.v1), m(tr.v2), emit);

    stats.voxel_touches = touches;
    return stats;
}

SplatStats splat_ellipsoid(VoxelGrid& grid, const ProlateSpheroid& spheroid, double weight,
                           const SphereAtlas& atlas, double epsilon, bool dedup) {
    SplatScratch scratch;
    return splat_ellipsoid(grid, spheroid, weight, atlas, epsilon, dedup, scratch);
}

VoxelGrid laplacian_filter(const VoxelGrid& grid) {
    const GridGeometry& g = grid.geometry();
    VoxelGrid out = VoxelGrid::from_parts(g, AccumMode::Float);
    auto& dst = out.floats();

    auto value_at = [&](long long x, long long y, long long z) -> double {
        if (x < 0 || y < 0 || z < 0 || x >= static_cast<long long>(g.nx) ||
            y >= static_cast<long long>(g.ny) || z >= static_cast<long long>(g.nz))
            return 0.0;  // zero padding
        return grid.value(g.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                  static_cast<std::size_t>(z)));
    };

    double max_v = 0.0;
    for (std::size_t z = 0; z < g.nz; ++z)
        for (std::size_t y = 0; y < g.ny; ++y)
            for (std::size_t x = 0; x < g.nx; ++x) {
                auto lx = static_cast<long long>(x), ly = static_cast<long long>(y),
                     lz = static_cast<long long>(z);
                double v = 6.0 * value_at(lx, ly, lz) - value_at(lx - 1, ly, lz) -
                           value_at(lx + 1, ly, lz) - value_at(lx, ly - 1, lz) -
                           value_at(lx, ly + 1, lz) - value_at(lx, ly, lz - 1) -
                           value_at(lx, ly, lz + 1);
                v = std::max(0.0, v);
                dst[g.index(x, y, z)] = v;
                max_v = std::max(max_v, v);
            }

    if (max_v > 0.0)
        for (double& v : dst) v /= max_v;
    return out;
}

GridComparison grid_compare(const VoxelGrid& a, const VoxelGrid& b) {
    if (!a.geometry().same_as(b.geometry()))
        throw GeometryMismatchError("compare: grids have different bounds or resolution");

    const std::size_t n = a.cell_count();
    double max_a = a.max_value(), max_b = b.max_value();
    double sa = max_a > 0 ? 1.0 / max_a : 0.0;
    double sb = max_b > 0 ? 1.0 / max_b : 0.0;

    double sum_a = 0, sum_b = 0, sum_aa = 0, sum_bb = 0, sum_ab = 0, se = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double va = a.value(i) * sa;
        double vb = b.value(i) * sb;
        double d = va - vb;
        se += d * d;
        sum_a += va;
        sum_b += vb;
        sum_aa += va * va;
        sum_bb += vb * vb;
        sum_ab += va * vb;
    }

    GridComparison cmp;
    cmp.mse = se / static_cast<double>(n);
    double nn = static_cast<double>(n);
    double cov = sum_ab - sum_a * sum_b / nn;
    double var_a = sum_aa - sum_a * sum_a / nn;
    double var_b = sum_bb - sum_b * sum_b / nn;
    if (var_a > 0 && var_b > 0)
        cmp.pearson = cov / std::sqrt(var_a * var_b);
    else
        cmp.pearson = cmp.mse == 0.0 ? 1.0 : 0.0;

    const GridGeometry& g = a.geometry();
    std::size_t ia = a.argmax(), ib = b.argmax();
    auto coords = [&](std::size_t idx) {
        return std::array<long long, 3>{static_cast<long long>(idx % g.nx),
                                        static_cast<long long>((idx / g.nx) % g.ny),
                                        static_cast<long long>(idx / (g.nx * g.ny))};
    };
    auto ca = coords(ia), cb = coords(ib);
    cmp.peak_offset = std::max({std::abs(ca[0] - cb[0]), std::abs(ca[1] - cb[1]),
                                std::abs(ca[2] - cb[2])});
    return cmp;
}

}  // namespace nlos
