#include "nlos/transient.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "nlos/errors.hpp"
#include "nlos/parallel.hpp"

namespace nlos {

void TemporalAxis::validate() const {
    if (!(dt > 0.0)) throw ValidationError("temporal axis: dt must be > 0");
    if (bins < 1) throw ValidationError("temporal axis: bins must be >= 1");
    if (!(c > 0.0)) throw ValidationError("temporal axis: c must be > 0");
}

void WallSampling::validate() const {
    if (positions.size() != camera_offsets.size())
        throw ValidationError("wall sampling: positions/camera_offsets size mismatch");
    for (double t : camera_offsets)
        if (!(t >= 0.0)) throw ValidationError("wall sampling: negative camera offset");
}

void LaserSampling::validate() const {
    if (positions.size() != laser_offsets.size())
        throw ValidationError("laser sampling: positions/laser_offsets size mismatch");
    for (double t : laser_offsets)
        if (!(t >= 0.0)) throw ValidationError("laser sampling: negative laser offset");
}

float TransientDataset::max_intensity() const {
    float m = 0.0f;
    for (float v : intensity) m = std::max(m, v);
    return m;
}

std::size_t TransientDataset::nonzero_bins() const {
    std::size_t n = 0;
    for (float v : intensity)
        if (v > 0.0f) ++n;
    return n;
}

void TransientDataset::validate() const {
    axis.validate();
    wall.validate();
    lasers.validate();
    if (intensity.size() != shots() * pixels() * axis.bins)
        throw ValidationError("dataset: tensor size is not S*P*T");
    for (float v : intensity)
        if (!(v >= 0.0f) || !std::isfinite(v))
            throw ValidationError("dataset: intensities must be finite and >= 0");
}

std::vector<Vec3> WallGrid::sample_positions() const {
    std::vector<Vec3> out;
    out.reserve(pixel_count());
    for (std::size_t j = 0; j < pixels_v; ++j)
        for (std::size_t i = 0; i < pixels_u; ++i) {
            double fu = (static_cast<double>(i) + 0.5) / static_cast<double>(pixels_u);
            double fv = (static_cast<double>(j) + 0.5) / static_cast<double>(pixels_v);
            out.push_back(origin + edge_u * fu + edge_v * fv);
        }
    return out;
}

void HiddenScene::validate() const {
    if (wall.pixels_u < 1 || wall.pixels_v < 1)
        throw ValidationError("scene: wall pixel counts must be >= 1");
    if (norm(cross(wall.edge_u, wall.edge_v)) <= 0.0)
        throw ValidationError("scene: wall rectangle has zero area");
    if (laser_points.empty()) throw ValidationError("scene: no laser points");
    if (!(dt > 0.0) || !(c > 0.0)) throw ValidationError("scene: dt and c must be > 0");
    for (const auto& s : hidden_surfaces) {
        if (std::abs(norm(s.normal) - 1.0) > 1e-9)
            throw ValidationError("scene: surface normal not unit length");
        if (!(s.area > 0.0)) throw ValidationError("scene: surface area must be > 0");
        if (!(s.albedo >= 0.0 && s.albedo <= 1.0))
            throw ValidationError("scene: albedo must be in [0, 1]");
    }
}

double path_time(const Vec3& a, const Vec3& b, double c) {
    return distance(a, b) / c;
}

double three_bounce_time(const Vec3& l, const Vec3& x, const Vec3& p, double c) {
    return path_time(l, x, c) + path_time(x, p, c);
}

double geometric_attenuation(const Vec3& l, const Vec3& x, const Vec3& p) {
    double d1 = distance(l, x);
    double d2 = distance(x, p);
    if (d1 < kMinPathDistance || d2 < kMinPathDistance)
        throw DegenerateDistanceError("geometric attenuation: path segment below " +
                                      std::to_string(kMinPathDistance) + " m");
    return 1.0 / (d1 * d1 * d2 * d2);
}

namespace {

TemporalAxis resolve_axis(const HiddenScene& scene, const std::vector<Vec3>& wall_pos,
                          const std::vector<double>& t_p, const std::vector<double>& t_s) {
    TemporalAxis axis;
    axis.dt = scene.dt;
    axis.c = scene.c;
    if (scene.t0 && scene.bins) {
        axis.t0 = *scene.t0;
        axis.bins = *scene.bins;
        axis.validate();
        return axis;
    }

    double tmin = std::numeric_limits<double>::infinity();
    double tmax = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < scene.laser_points.size(); ++s)
        for (std::size_t p = 0; p < wall_pos.size(); ++p)
            for (const auto& h : scene.hidden_surfaces) {
                double t = t_s[s] + three_bounce_time(scene.laser_points[s], h.position,
                                                      wall_pos[p], scene.c) + t_p[p];
                tmin = std::min(tmin, t);
                tmax = std::max(tmax, t);
            }
    if (!std::isfinite(tmin)) {  // no hidden samples
        tmin = 0.0;
        tmax = 0.0;
    }

    axis.t0 = scene.t0 ? *scene.t0 : tmin - axis.dt;
    if (scene.bins) {
        axis.bins = *scene.bins;
    } else {
        double span = (tmax - axis.t0) / axis.dt;
        axis.bins = static_cast<std::size_t>(std::ceil(span)) + 2;
    }
    axis.validate();
    return axis;
}

}  // namespace

TransientDataset simulate_dataset(const HiddenScene& scene, const SimulateOptions& opt) {
    scene.validate();
    if (scene.wall.pixel_count() == 0 || scene.laser_points.empty())
        throw ValidationError("simulate: empty wall grid or laser set");

    TransientDataset ds;
    ds.wall.positions = scene.wall.sample_positions();
    ds.wall.camera_offsets.reserve(ds.wall.positions.size());
    for (const auto& p : ds.wall.positions)
        ds.wall.camera_offsets.push_back(path_time(scene.camera_origin, p, scene.c));
    ds.lasers.positions = scene.laser_points;
    ds.lasers.laser_offsets.reserve(scene.laser_points.size());
    for (const auto& l : scene.laser_points)
        ds.lasers.laser_offsets.push_back(path_time(scene.laser_origin, l, scene.c));

    ds.axis = resolve_axis(scene, ds.wall.positions, ds.wall.camera_offsets,
                           ds.lasers.laser_offsets);

    const std::size_t S = ds.shots();
    const std::size_t P = ds.pixels();
    const std::size_t T = ds.axis.bins;
    ds.intensity.assign(S * P * T, 0.0f);

    // Each (shot, pixel) pair owns a disjoint histogram row.
    parallel_blocks(S * P, opt.threads, [&](unsigned, std::size_t begin, std::size_t end) {
        for (std::size_t sp = begin; sp < end; ++sp) {
            std::size_t s = sp / P;
            std::size_t p = sp % P;
            const Vec3& l = ds.lasers.positions[s];
            const Vec3& w = ds.wall.positions[p];
            double offs = ds.lasers.laser_offsets[s] + ds.wall.camera_offsets[p];
            float* row = ds.intensity.data() + sp * T;
            for (const auto& h : scene.hidden_surfaces) {
                double g = geometric_attenuation(l, h.position, w);
                double cos_in = std::clamp(dot(h.normal, normalized(l - h.position)), 0.0, 1.0);
                double cos_out = std::clamp(dot(h.normal, normalized(w - h.position)), 0.0, 1.0);
                double contrib = (h.albedo / M_PI) * cos_in * cos_out * g * h.area;
                double t = offs + three_bounce_time(l, h.position, w, scene.c);
                if (auto k = ds.axis.time_to_bin(t))
                    row[*k] += static_cast<float>(contrib);
            }
        }
    });

    if (opt.shot_noise) {
        // Single pass with one generator keeps results independent of threads.
        std::mt19937_64 rng(opt.seed);
        for (float& v : ds.intensity) {
            if (v <= 0.0f) continue;
            std::poisson_distribution<long long> pd(static_cast<double>(v) * opt.photons);
            v = static_cast<float>(static_cast<double>(pd(rng)) / opt.photons);
        }
    }
    return ds;
}

}  // namespace nlos
