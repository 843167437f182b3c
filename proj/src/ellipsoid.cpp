#include "nlos/ellipsoid.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "nlos/errors.hpp"

namespace nlos {

ProlateSpheroid ellipsoid_from_measurement(const Vec3& l, const Vec3& p, double d) {
    if (!(d > 0.0)) throw ValidationError("ellipsoid: path length must be > 0");
    double focal_dist = distance(l, p);
    if (d <= focal_dist + 1e-9 * focal_dist)
        throw DegenerateEllipsoidError("ellipsoid: d = " + std::to_string(d) +
                                       " <= focal distance " + std::to_string(focal_dist));

    ProlateSpheroid e;
    e.focus_a = l;
    e.focus_b = p;
    e.path_length = d;
    e.semi_major = d * 0.5;
    double f = focal_dist * 0.5;
    e.semi_minor = std::sqrt(e.semi_major * e.semi_major - f * f);
    e.center = (l + p) * 0.5;

    if (focal_dist == 0.0) {
        e.rotation = Mat3::identity();
        e.semi_minor = e.semi_major;  // sphere
        return e;
    }
    Vec3 ax = normalized(p - l);
    // Any orthonormal complement will do; pick the most stable seed axis.
    Vec3 seed = std::abs(ax.x) <= std::abs(ax.y)
                    ? (std::abs(ax.x) <= std::abs(ax.z) ? Vec3{1, 0, 0} : Vec3{0, 0, 1})
                    : (std::abs(ax.y) <= std::abs(ax.z) ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
    Vec3 ay = normalized(cross(ax, seed));
    Vec3 az = cross(ax, ay);
    e.rotation = Mat3::from_columns(ax, ay, az);
    return e;
}

namespace {

std::vector<Triangle> icosahedron() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    auto n = [](double x, double y, double z) { return normalized(Vec3{x, y, z}); };
    const Vec3 v[12] = {
        n(-1, t, 0), n(1, t, 0),  n(-1, -t, 0), n(1, -t, 0),
        n(0, -1, t), n(0, 1, t),  n(0, -1, -t), n(0, 1, -t),
        n(t, 0, -1), n(t, 0, 1),  n(-t, 0, -1), n(-t, 0, 1),
    };
    const int f[20][3] = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    std::vector<Triangle> tris;
    tris.reserve(20);
    for (const auto& face : f)
        tris.push_back({v[face[0]], v[face[1]], v[face[2]]});
    return tris;
}

std::vector<Triangle> subdivide(const std::vector<Triangle>& in) {
    std::vector<Triangle> out;
    out.reserve(in.size() * 4);
    for (const auto& tr : in) {
        Vec3 m01 = normalized((tr.v0 + tr.v1) * 0.5);
        Vec3 m12 = normalized((tr.v1 + tr.v2) * 0.5);
        Vec3 m20 = normalized((tr.v2 + tr.v0) * 0.5);
        out.push_back({tr.v0, m01, m20});
        out.push_back({tr.v1, m12, m01});
        out.push_back({tr.v2, m20, m12});
        out.push_back({m01, m12, m20});
    }
    return out;
}

double mesh_alpha(const std::vector<Triangle>& tris) {
    // Max deviation from the unit sphere = 1 - min plane distance over faces.
    double min_plane = std::numeric_limits<double>::infinity();
    for (const auto& tr : tris) {
        Vec3 n = tr.normal();
        double len = norm(n);
        if (len <= 0.0) continue;
        min_plane = std::min(min_plane, std::abs(dot(n, tr.v0)) / len);
    }
    return 1.0 - min_plane;
}

}  // namespace

SphereAtlas build_sphere_atlas(int max_level) {
    if (max_level < 0 || max_level > 7)
        throw ValidationError("sphere atlas: max_level must be in [0, 7]");
    SphereAtlas atlas;
    std::vector<Triangle> tris = icosahedron();
    for (int o = 0; o <= max_level; ++o) {
        if (o > 0) tris = subdivide(tris);
        atlas.levels.push_back({o, tris, mesh_alpha(tris)});
    }
    return atlas;
}

LevelSelection select_tessellation_level(const SphereAtlas& atlas,
                                         const ProlateSpheroid& spheroid, double epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("tessellation: epsilon must be > 0");
    for (const auto& level : atlas.levels)
        if (level.alpha * spheroid.semi_major < epsilon) return {level.level, false};
    return {atlas.max_level(), true};
}

std::vector<Triangle> transform_triangles(const ProlateSpheroid& spheroid,
                                          const TessellatedSphere& sphere) {
    Affine m = spheroid.transform();
    std::vector<Triangle> out;
    out.reserve(sphere.triangles.size());
    for (const auto& tr : sphere.triangles)
        out.push_back({m(tr.v0), m(tr.v1), m(tr.v2)});
    return out;
}

namespace {

// Golden-section minimization of the convex focal sum along one axis of the box.
double axis_min(const ProlateSpheroid& e, Vec3 pt, int axis, double lo, double hi, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    auto f = [&](double v) {
        pt[axis] = v;
        return e.focal_sum(pt);
    };
    double a = lo, b = hi;
    double c = b - (b - a) * inv_phi;
    double d = a + (b - a) * inv_phi;
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    return (a + b) * 0.5;
}

}  // namespace

bool shell_overlap_oracle(const ProlateSpheroid& spheroid, const Box3& box,
                          double shell_halfwidth) {
    if (!(shell_halfwidth >= 0.0))
        throw ValidationError("shell oracle: halfwidth must be >= 0");
    const double d = spheroid.path_length;
    const double tol = 1e-9 * d;

    // F is convex, so its box maximum sits at a corner.
    double max_f = 0.0;
    for (int i = 0; i < 8; ++i)
        max_f = std::max(max_f, spheroid.focal_sum(box.corner(i)));
    if (max_f < d - shell_halfwidth) return false;

    // Cyclic per-axis golden-section descent for the box minimum.
    Vec3 pt = box.center();
    // Clamping the focal midpoint into the box gives a good start.
    Vec3 mid = spheroid.center;
    pt = {std::clamp(mid.x, box.min.x, box.max.x), std::clamp(mid.y, box.min.y, box.max.y),
          std::clamp(mid.z, box.min.z, box.max.z)};
    double prev = spheroid.focal_sum(pt);
    for (int sweep = 0; sweep < 64; ++sweep) {
        for (int axis = 0; axis < 3; ++axis) {
            double lo = box.min[axis], hi = box.max[axis];
            if (hi - lo > tol) pt[axis] = axis_min(spheroid, pt, axis, lo, hi, tol);
        }
        double cur = spheroid.focal_sum(pt);
        if (prev - cur < tol) break;
        prev = cur;
    }
    double min_f = spheroid.focal_sum(pt);
    return min_f <= d + shell_halfwidth;
}

}  // namespace nlos
