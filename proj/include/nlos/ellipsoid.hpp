#ifndef NLOS_ELLIPSOID_HPP
#define NLOS_ELLIPSOID_HPP

#include <vector>

#include "nlos/geometry.hpp"

namespace nlos {

/// Prolate spheroid of all points y with |y-focus_a| + |y-focus_b| = path_length.
struct ProlateSpheroid {
    Vec3 focus_a, focus_b;
    double path_length = 0.0;  // d = c * t'
    double semi_major = 0.0;   // a = d/2
    double semi_minor = 0.0;   // b = sqrt(a^2 - f^2)
    Vec3 center;
    Mat3 rotation;  // columns are the local axes; local x runs focus_a -> focus_b

    /// Unit-sphere-to-spheroid map: rotate * diag(a, b, b), then translate.
    Affine transform() const {
        return {rotation * Mat3::scale(semi_major, semi_minor, semi_minor), center};
    }

    Vec3 to_world(const Vec3& unit_point) const { return transform()(unit_point); }

    double focal_sum(const Vec3& y) const {
        return distance(y, focus_a) + distance(y, focus_b);
    }
};

/// Throws DegenerateEllipsoidError when d <= |l-p| + 1e-9*|l-p|.
ProlateSpheroid ellipsoid_from_measurement(const Vec3& l, const Vec3& p, double d);

/// Geodesic icosphere at subdivision level `level`: 20 * 4^level triangles.
struct TessellatedSphere {
    int level = 0;
    std::vector<Triangle> triangles;
    double alpha = 0.0;  // max deviation of the mesh from the unit sphere
};

struct SphereAtlas {
    std::vector<TessellatedSphere> levels;  // ascending by level, 0..max

    int max_level() const { return static_cast<int>(levels.size()) - 1; }
    const TessellatedSphere& at(int o) const { return levels[static_cast<std::size_t>(o)]; }
};

SphereAtlas build_sphere_atlas(int max_level);

struct LevelSelection {
    int level = 0;
    bool saturated = false;  // no level met the error bound; clamped to max
};

/// Minimum level o with alpha_o * semi_major < epsilon.
LevelSelection select_tessellation_level(const SphereAtlas& atlas,
                                         const ProlateSpheroid& spheroid, double epsilon);

std::vector<Triangle> transform_triangles(const ProlateSpheroid& spheroid,
                                          const TessellatedSphere& sphere);

/// Analytic shell-box overlap test: true iff the box meets the shell
/// |F(y) - d| <= shell_halfwidth with F(y) = |y-fa| + |y-fb|.
bool shell_overlap_oracle(const ProlateSpheroid& spheroid, const Box3& box,
                          double shell_halfwidth);

}  // namespace nlos

#endif
