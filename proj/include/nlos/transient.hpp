#ifndef NLOS_TRANSIENT_HPP
#define NLOS_TRANSIENT_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "nlos/geometry.hpp"

namespace nlos {

/// Distances closer than this are treated as singular configurations.
inline constexpr double kMinPathDistance = 1e-6;  // meters

/// Uniform time binning: bin k covers times near t0 + k*dt.
struct TemporalAxis {
    double t0 = 0.0;         // seconds, time of bin 0
    double dt = 1e-12;       // seconds per bin
    std::size_t bins = 1;    // T
    double c = 299792458.0;  // propagation speed, m/s

    double bin_to_time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }

    /// Nearest-bin lookup; empty when t rounds outside [0, T).
    std::optional<std::size_t> time_to_bin(double t) const {
        double r = std::round((t - t0) / dt);
        if (r < 0.0 || r >= static_cast<double>(bins)) return std::nullopt;
        return static_cast<std::size_t>(r);
    }

    void validate() const;
};

/// Wall sample points psi(p) plus per-pixel camera-to-wall flight times t_p.
struct WallSampling {
    std::vector<Vec3> positions;
    std::vector<double> camera_offsets;

    std::size_t count() const { return positions.size(); }
    void validate() const;
};

/// Virtual point lights l plus per-shot laser-to-wall flight times t_s.
struct LaserSampling {
    std::vector<Vec3> positions;
    std::vector<double> laser_offsets;

    std::size_t count() const { return positions.size(); }
    void validate() const;
};

/// The space-time measurement tensor I[shot][pixel][bin], S x P x T.
struct TransientDataset {
    TemporalAxis axis;
    WallSampling wall;
    LaserSampling lasers;
    std::vector<float> intensity;  // s-major, then p, then t

    std::size_t shots() const { return lasers.count(); }
    std::size_t pixels() const { return wall.count(); }
    std::size_t time_bins() const { return axis.bins; }

    std::size_t index(std::size_t s, std::size_t p, std::size_t k) const {
        return (s * pixels() + p) * axis.bins + k;
    }
    float at(std::size_t s, std::size_t p, std::size_t k) const {
        return intensity[index(s, p, k)];
    }
    float& at(std::size_t s, std::size_t p, std::size_t k) {
        return intensity[index(s, p, k)];
    }

    float max_intensity() const;
    std::size_t nonzero_bins() const;
    void validate() const;
};

struct SurfaceSample {
    Vec3 position;
    Vec3 normal;    // unit length
    double area;    // m^2
    double albedo;  // [0, 1]
};

/// Rectangular wall patch sampled at pixel centers.
struct WallGrid {
    Vec3 origin;
    Vec3 edge_u, edge_v;
    std::size_t pixels_u = 1, pixels_v = 1;

    std::size_t pixel_count() const { return pixels_u * pixels_v; }
    std::vector<Vec3> sample_positions() const;
};

/// Ground-truth scene driving the forward simulator.
struct HiddenScene {
    WallGrid wall;
    std::vector<Vec3> laser_points;
    Vec3 laser_origin;
    Vec3 camera_origin;
    std::vector<SurfaceSample> hidden_surfaces;

    // Temporal axis; t0/bins left empty mean "fit to the scene's time span".
    double dt = 4e-12;
    double c = 299792458.0;
    std::optional<double> t0;
    std::optional<std::size_t> bins;

    void validate() const;
};

struct SimulateOptions {
    bool shot_noise = false;
    double photons = 1000.0;  // photon count mapped to intensity 1.0
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0 = hardware
};

/// tau(a -> b) = |a - b| / c.
double path_time(const Vec3& a, const Vec3& b, double c);

/// tau(l -> x) + tau(x -> p).
double three_bounce_time(const Vec3& l, const Vec3& x, const Vec3& p, double c);

/// 1 / (|l-x|^2 |x-p|^2). Throws DegenerateDistanceError below kMinPathDistance.
double geometric_attenuation(const Vec3& l, const Vec3& x, const Vec3& p);

/// Three-bounce forward model; see HiddenScene for the axis-fitting rule.
TransientDataset simulate_dataset(const HiddenScene& scene, const SimulateOptions& opt = {});

}  // namespace nlos

#endif
