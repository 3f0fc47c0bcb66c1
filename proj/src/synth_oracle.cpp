#include "pw/synth_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pw/errors.hpp"
#include "pw/geometry.hpp"
#include "pw/parallel.hpp"

namespace pw::oracle {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHitEpsilon = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::array<int, 2> other_axes(int axis) {
    switch (axis) {
        case 0: return {1, 2};
        case 1: return {0, 2};
        default: return {0, 1};
    }
}

Texture random_texture(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> base(0.25, 0.75);
    std::uniform_real_distribution<double> wave(4.5, 7.0);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    Texture t;
    t.base = {base(rng), base(rng), base(rng)};
    t.amplitude = 0.12;
    t.wavelength = wave(rng);
    t.phase = {phase(rng), phase(rng), phase(rng)};
    return t;
}

void add_box(Scene& scene, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, const Texture& tex) {
    for (int axis = 0; axis < 3; ++axis) {
        const auto ax = other_axes(axis);
        for (double off : {lo[axis], hi[axis]}) {
            AxisRect r;
            r.axis = axis;
            r.offset = off;
            r.lo = {lo[ax[0]], lo[ax[1]]};
            r.hi = {hi[ax[0]], hi[ax[1]]};
            r.texture = tex;
            scene.rects.push_back(r);
        }
    }
}

}  // namespace

std::array<double, 3> Texture::shade(const Eigen::Vector3d& p) const {
    std::array<double, 3> rgb{};
    const double a = kTwoPi * (p.x() + 0.5 * p.z()) / wavelength;
    const double b = kTwoPi * (p.y() + 0.5 * p.z()) / wavelength;
    for (int c = 0; c < 3; ++c) {
        const double v = base[c] + amplitude * std::sin(a + phase[c]) * std::sin(b + phase[c] + 1.0);
        rgb[c] = std::clamp(v, 0.0, 1.0);
    }
    return rgb;
}

std::optional<Hit> Scene::intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction) const {
    std::optional<Hit> best;
    for (std::size_t i = 0; i < rects.size(); ++i) {
        const auto& r = rects[i];
        const double d = direction[r.axis];
        if (std::abs(d) < 1e-15) continue;
        const double t = (r.offset - origin[r.axis]) / d;
        if (!(t > kHitEpsilon) || (best && t >= best->t)) continue;
        Eigen::Vector3d p = origin + t * direction;
        p[r.axis] = r.offset;
        const auto ax = other_axes(r.axis);
        if (p[ax[0]] < r.lo[0] || p[ax[0]] > r.hi[0] || p[ax[1]] < r.lo[1] || p[ax[1]] > r.hi[1]) continue;
        best = Hit{t, int(i), p};
    }
    for (std::size_t i = 0; i < spheres.size(); ++i) {
        const auto& s = spheres[i];
        const Eigen::Vector3d oc = origin - s.center;
        const double a = direction.squaredNorm();
        const double b = oc.dot(direction);
        const double c = oc.squaredNorm() - s.radius * s.radius;
        const double disc = b * b - a * c;
        if (disc < 0.0) continue;
        // Numerically stable root pair.
        const double q = -(b + std::copysign(std::sqrt(disc), b));
        double t0 = q / a;
        double t1 = c / q;
        if (t0 > t1) std::swap(t0, t1);
        const double t = t0 > kHitEpsilon ? t0 : t1;
        if (!(t > kHitEpsilon) || (best && t >= best->t)) continue;
        best = Hit{t, int(rects.size() + i), origin + t * direction};
    }
    return best;
}

std::array<double, 3> Scene::shade(const Hit& hit) const {
    if (hit.primitive < 0) return background;
    if (std::size_t(hit.primitive) < rects.size()) return rects[std::size_t(hit.primitive)].texture.shade(hit.point);
    return spheres[std::size_t(hit.primitive) - rects.size()].texture.shade(hit.point);
}

double Scene::distance_to_surface(const Eigen::Vector3d& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : rects) {
        Eigen::Vector3d q = p;
        q[r.axis] = r.offset;
        const auto ax = other_axes(r.axis);
        q[ax[0]] = std::clamp(q[ax[0]], r.lo[0], r.hi[0]);
        q[ax[1]] = std::clamp(q[ax[1]], r.lo[1], r.hi[1]);
        best = std::min(best, (p - q).norm());
    }
    for (const auto& s : spheres) best = std::min(best, std::abs((p - s.center).norm() - s.radius));
    return best;
}

Scene make_room_scene(std::uint64_t seed, const SceneOptions& options) {
    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

    Scene scene;
    const double rx = uniform(2.2, 3.0);
    const double ry = uniform(1.6, 2.2);
    const double z_back = uniform(5.5, 7.0);
    const double z_front = -1.5;
    add_box(scene, {-rx, -ry, z_front}, {rx, ry, z_back}, random_texture(rng));
    // Give every wall its own texture so primitive boundaries are visible in colour.
    for (auto& r : scene.rects) r.texture = random_texture(rng);

    for (int b = 0; b < options.boxes; ++b) {
        const double hx = uniform(0.3, 0.6);
        const double hy = uniform(0.3, 0.7);
        const double hz = uniform(0.3, 0.6);
        const double cx = uniform(-rx + hx + 0.2, rx - hx - 0.2);
        const double cz = uniform(2.5, z_back - hz - 0.5);
        const double cy = ry - hy;  // resting on the floor (y points down)
        add_box(scene, {cx - hx, cy - hy, cz - hz}, {cx + hx, cy + hy, cz + hz}, random_texture(rng));
    }
    for (int s = 0; s < options.spheres; ++s) {
        Sphere sp;
        sp.radius = uniform(0.25, options.sphere_radius_max);
        sp.center = {uniform(-rx + 0.8, rx - 0.8), uniform(-ry + 0.8, ry - 0.8), uniform(2.5, z_back - 1.0)};
        sp.texture = random_texture(rng);
        scene.spheres.push_back(sp);
    }
    return scene;
}

std::optional<Hit> cast(const Scene& scene, const CameraRig& rig, double u, double v) {
    const Eigen::Vector3d dir = rig.pose.rotation * rig.intrinsics.ray(u, v);
    return scene.intersect(rig.pose.translation, dir);
}

OracleFrame render(const Scene& scene, const CameraRig& rig) {
    rig.validate();
    const int w = rig.intrinsics.width;
    const int h = rig.intrinsics.height;
    OracleFrame f;
    f.color = ColorImage(w, h, 0.0);
    f.depth = DepthMap(w, h, 0.0, false);
    f.primitive.assign(std::size_t(w) * h, -1);
    parallel_for(std::size_t(h), [&](std::size_t row) {
        const int v = int(row);
        for (int u = 0; u < w; ++u) {
            const auto idx = f.depth.index(v, u);
            const auto hit = cast(scene, rig, u, v);
            if (!hit) {
                f.color.set_pixel(v, u, scene.background);
                continue;
            }
            // Direction has unit camera-frame z, so the ray parameter is the camera-frame depth.
            f.depth.values[idx] = hit->t;
            f.depth.valid[idx] = 1;
            f.primitive[idx] = hit->primitive;
            f.color.set_pixel(v, u, scene.shade(*hit));
        }
    });
    return f;
}

FlowTruth ground_truth_flow(const Scene& scene, const CameraRig& rig_a, const CameraRig& rig_b) {
    rig_a.validate();
    rig_b.validate();
    const auto& ka = rig_a.intrinsics;
    const int w = rig_b.intrinsics.width;
    const int h = rig_b.intrinsics.height;
    const OracleFrame frame_a = render(scene, rig_a);

    FlowTruth out{FlowField(w, h, 0.0), WeightMap(w, h, 0.0)};
    parallel_for(std::size_t(h), [&](std::size_t row) {
        const int v = int(row);
        for (int u = 0; u < w; ++u) {
            const auto hit = cast(scene, rig_b, u, v);
            if (!hit) continue;
            const Eigen::Vector3d pa = rig_a.pose.to_camera(hit->point);
            if (!(pa.z() > kZNear)) continue;
            const double ua = ka.fx * pa.x() / pa.z() + ka.cx;
            const double va = ka.fy * pa.y() / pa.z() + ka.cy;
            const auto fi = out.flow.index(v, u);
            out.flow.values[fi] = ua - u;
            out.flow.values[fi + 1] = va - v;
            const auto taps = bilinear_taps(ka.width, ka.height, ua, va);
            if (!taps.inside) continue;
            const auto seen = cast(scene, rig_a, ua, va);
            bool visible = seen.has_value() && seen->primitive == hit->primitive &&
                           std::abs(rig_a.pose.to_camera(seen->point).z() - pa.z()) <= kOcclusionTolerance * pa.z();
            for (int t = 0; t < taps.count && visible; ++t) {
                const auto ti = taps.index[t];
                visible = taps.weight[t] == 0.0 || (frame_a.depth.valid[ti] && frame_a.primitive[ti] == hit->primitive);
            }
            out.occlusion.values[std::size_t(v) * w + u] = visible ? 1.0 : 0.0;
        }
    });
    return out;
}

std::vector<CameraRig> make_trajectory(const CameraIntrinsics& intrinsics, int poses, const Eigen::Vector3d& step,
                                       double yaw_step_degrees, const Eigen::Vector3d& start) {
    if (poses < 1) throw ValidationError("trajectory needs at least one pose");
    std::vector<CameraRig> rigs;
    for (int k = 0; k < poses; ++k) rigs.push_back({intrinsics, Pose::from_yaw(k * yaw_step_degrees, start + k * step)});
    return rigs;
}

namespace {

/// Low-frequency field: a 4x4 lattice of standard normals, bilinearly upsampled.
std::vector<double> smooth_noise(std::mt19937_64& rng, int w, int h) {
    constexpr int kGrid = 4;
    std::normal_distribution<double> normal(0.0, 1.0);
    double lattice[kGrid][kGrid];
    for (auto& row : lattice)
        for (auto& v : row) v = normal(rng);
    std::vector<double> out(std::size_t(w) * h);
    for (int r = 0; r < h; ++r) {
        const double gy = double(r) * (kGrid - 1) / std::max(1, h - 1);
        const int y0 = std::min(int(gy), kGrid - 2);
        const double ay = gy - y0;
        for (int c = 0; c < w; ++c) {
            const double gx = double(c) * (kGrid - 1) / std::max(1, w - 1);
            const int x0 = std::min(int(gx), kGrid - 2);
            const double ax = gx - x0;
            out[std::size_t(r) * w + c] = (1 - ay) * ((1 - ax) * lattice[y0][x0] + ax * lattice[y0][x0 + 1]) +
                                          ay * ((1 - ax) * lattice[y0 + 1][x0] + ax * lattice[y0 + 1][x0 + 1]);
        }
    }
    return out;
}

}  // namespace

std::vector<TrainingSequence> make_training_set(std::uint64_t seed, int n_sequences, const TrainingSetOptions& options) {
    if (n_sequences < 1) throw ValidationError("make_training_set: need at least one sequence");
    const auto intrinsics = make_intrinsics(options.width, options.height, options.hfov_degrees);
    std::vector<TrainingSequence> out;
    out.reserve(std::size_t(n_sequences));
    for (int j = 0; j < n_sequences; ++j) {
        const std::uint64_t seq_seed = splitmix64(seed * 0x100000001B3ull + std::uint64_t(j));
        std::mt19937_64 rng(seq_seed);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

        const Scene scene = make_room_scene(seq_seed);
        TrainingSequence seq;

        Eigen::Vector3d pos(uniform(-0.5, 0.5), uniform(-0.3, 0.3), uniform(0.0, 0.5));
        double heading = uniform(0.0, kTwoPi);
        const double speed = options.static_camera ? 0.0 : uniform(0.04, 0.08);
        for (int i = 0; i < kTrainingFrames; ++i) {
            seq.rigs.push_back({intrinsics, Pose::from_yaw(0.0, pos)});
            heading += uniform(-0.3, 0.3);
            pos += speed * Eigen::Vector3d(std::cos(heading), std::sin(heading), 0.0);
        }
        for (const auto& rig : seq.rigs) {
            auto f = render(scene, rig);
            seq.colors.push_back(std::move(f.color));
            seq.gt_depths.push_back(std::move(f.depth));
        }
        for (int i = 0; i + 1 < kTrainingFrames; ++i) {
            auto back = ground_truth_flow(scene, seq.rigs[i], seq.rigs[i + 1]);
            seq.backward_flows.push_back(std::move(back.flow));
            seq.occlusion.push_back(std::move(back.occlusion));
            seq.forward_flows.push_back(ground_truth_flow(scene, seq.rigs[i + 1], seq.rigs[i]).flow);
        }

        seq.corruption.enabled = options.corrupt;
        for (int i = 0; i < kTrainingFrames; ++i) {
            const auto& gt = seq.gt_depths[i];
            DepthMap init = gt;
            const double drift = uniform(options.drift_min, options.drift_max);
            auto noise = smooth_noise(rng, gt.width, gt.height);
            if (options.corrupt) {
                double sum = 0.0, dd = 0.0, dn = 0.0;
                std::size_t count = 0;
                for (std::size_t k = 0; k < gt.size(); ++k) {
                    if (!gt.valid[k]) continue;
                    sum += gt.values[k];
                    dd += gt.values[k] * gt.values[k];
                    dn += gt.values[k] * noise[k];
                    ++count;
                }
                const double amplitude = options.noise_fraction * sum / double(std::max<std::size_t>(count, 1));
                // Remove the component along the ground truth so drift stays recoverable by least squares.
                const double along = dd > 0.0 ? dn / dd : 0.0;
                for (std::size_t k = 0; k < gt.size(); ++k) {
                    if (!gt.valid[k]) continue;
                    init.values[k] = drift * gt.values[k] + amplitude * (noise[k] - along * gt.values[k]);
                    if (!(init.values[k] > 0.0)) throw NumericError("make_training_set: corrupted depth became non-positive");
                }
                seq.corruption.drift.push_back(drift);
                seq.corruption.noise_amplitude = amplitude;
            } else {
                seq.corruption.drift.push_back(1.0);
            }
            seq.init_depths.push_back(std::move(init));
        }
        seq.validate();
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace pw::oracle
