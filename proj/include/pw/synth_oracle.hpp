#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pw/camera.hpp"
#include "pw/image.hpp"
#include "pw/sequence.hpp"

namespace pw::oracle {

/// Smooth sinusoidal texture: base + amplitude * sin(k.p + phase0) * sin(k.p + phase1) per channel,
/// evaluated on world coordinates. Band-limited so bilinear resampling stays accurate.
struct Texture {
    std::array<double, 3> base{0.5, 0.5, 0.5};
    double amplitude = 0.1;
    double wavelength = 1.0;
    std::array<double, 3> phase{0.0, 0.0, 0.0};

    std::array<double, 3> shade(const Eigen::Vector3d& p) const;
};

/// Finite rectangle in the plane {x_axis = offset}, bounded on the two remaining axes (ascending order).
struct AxisRect {
    int axis = 2;
    double offset = 0.0;
    std::array<double, 2> lo{-1.0, -1.0};
    std::array<double, 2> hi{1.0, 1.0};
    Texture texture;
};

struct Sphere {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double radius = 1.0;
    Texture texture;
};

struct Hit {
    double t = 0.0;
    int primitive = -1;
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

/// Primitives are indexed rectangles first, then spheres.
struct Scene {
    std::vector<AxisRect> rects;
    std::vector<Sphere> spheres;
    std::array<double, 3> background{0.0, 0.0, 0.0};

    int primitive_count() const { return int(rects.size() + spheres.size()); }
    std::optional<Hit> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction) const;
    std::array<double, 3> shade(const Hit& hit) const;
    /// Distance from `p` to the nearest primitive surface.
    double distance_to_surface(const Eigen::Vector3d& p) const;
};

struct SceneOptions {
    int boxes = 2;
    int spheres = 1;
    double sphere_radius_max = 0.5;
};

/// Closed room (six inward-looking walls) around the origin with boxes and spheres in front of
/// the +z viewing direction. Deterministic in `seed`.
Scene make_room_scene(std::uint64_t seed, const SceneOptions& options = {});

struct OracleFrame {
    ColorImage color;
    DepthMap depth;                // camera-frame z of the first hit; background invalid
    std::vector<int> primitive;    // -1 on background
};

/// Ray cast through every integer pixel coordinate.
OracleFrame render(const Scene& scene, const CameraRig& rig);

/// Ray cast through one continuous pixel coordinate.
std::optional<Hit> cast(const Scene& scene, const CameraRig& rig, double u, double v);

/// Relative depth tolerance for occlusion classification.
inline constexpr double kOcclusionTolerance = 0.01;

struct FlowTruth {
    FlowField flow;        // lives in rig_b's grid, points into rig_a
    WeightMap occlusion;   // 1 where the pixel's surface point is visible in rig_a
};

/// Backward flow F_{b => a} and visibility, from analytic ray casts.
FlowTruth ground_truth_flow(const Scene& scene, const CameraRig& rig_a, const CameraRig& rig_b);

/// Parametric dolly + pan: pose k = from_yaw(k * yaw_step, start + k * step).
std::vector<CameraRig> make_trajectory(const CameraIntrinsics& intrinsics, int poses, const Eigen::Vector3d& step,
                                       double yaw_step_degrees, const Eigen::Vector3d& start = Eigen::Vector3d::Zero());

struct TrainingSetOptions {
    int width = 80;
    int height = 80;
    double hfov_degrees = 60.0;
    bool corrupt = true;
    double drift_min = 0.8;
    double drift_max = 1.25;
    double noise_fraction = 0.02;   // additive noise std relative to mean depth
    bool static_camera = false;
};

/// Seven-frame sequences along smooth lateral trajectories with exact depth/flow/occlusion and
/// drift-corrupted input depths.
std::vector<TrainingSequence> make_training_set(std::uint64_t seed, int n_sequences,
                                                const TrainingSetOptions& options = {});

}  // namespace pw::oracle
