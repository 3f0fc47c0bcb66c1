#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "pw/camera.hpp"
#include "pw/geometry.hpp"
#include "pw/sequence.hpp"

namespace pw::test {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("pw_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline Pose random_pose(std::mt19937_64& rng, double max_translation = 0.5, double max_angle = 0.3) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Vector3d axis(u(rng), u(rng), u(rng));
    axis.normalize();
    Pose p;
    p.rotation = Eigen::AngleAxisd(max_angle * u(rng), axis).toRotationMatrix();
    p.translation = Eigen::Vector3d(u(rng), u(rng), u(rng)) * max_translation;
    return p;
}

/// Smooth analytic 8 x 8 seven-frame sequence: content translates by (dx, dy) pixels per frame, so
/// the flows are uniform and exact. Odd frames carry a planted drift of 1.5. Occlusion is all 1.
inline TrainingSequence analytic_sequence(double dx, double dy, int n = 8) {
    TrainingSequence s;
    for (int i = 0; i < kTrainingFrames; ++i) {
        CameraRig rig;
        rig.intrinsics = make_intrinsics(n, n, 60.0);
        s.rigs.push_back(rig);
        ColorImage c(n, n);
        DepthMap g(n, n), d(n, n);
        const double drift = (i % 2 == 0) ? 1.0 : 1.5;
        for (int r = 0; r < n; ++r)
            for (int k = 0; k < n; ++k) {
                const double x = k + i * dx;
                const double y = r + i * dy;
                const double depth = 2.0 + 0.25 * x - 0.1 * y + 0.8 * std::sin(0.9 * x + 0.4 * y);
                c.set_pixel(r, k, {0.5 + 0.2 * std::sin(0.5 * x), 0.5 + 0.2 * std::cos(0.4 * y),
                                   0.5 + 0.1 * std::sin(0.3 * (x + y) + i)});
                g.values[g.index(r, k)] = depth;
                g.valid[g.index(r, k)] = 1;
                d.values[d.index(r, k)] = depth * drift;
                d.valid[d.index(r, k)] = 1;
            }
        s.colors.push_back(c);
        s.gt_depths.push_back(g);
        s.init_depths.push_back(d);
        if (i + 1 < kTrainingFrames) {
            s.occlusion.emplace_back(n, n, 1.0);
            FlowField b(n, n), f(n, n);
            for (int p = 0; p < n * n; ++p) {
                b.values[2 * p] = dx;
                b.values[2 * p + 1] = dy;
                f.values[2 * p] = -dx;
                f.values[2 * p + 1] = -dy;
            }
            s.backward_flows.push_back(b);
            s.forward_flows.push_back(f);
        }
    }
    return s;
}

/// Constant-depth static sequence: identity poses, zero flows, uniform grey colour.
inline TrainingSequence constant_sequence(int w, int h, double depth) {
    TrainingSequence s;
    for (int i = 0; i < kTrainingFrames; ++i) {
        CameraRig rig;
        rig.intrinsics = make_intrinsics(w, h, 60.0);
        s.rigs.push_back(rig);
        s.colors.emplace_back(w, h, 0.5);
        s.gt_depths.emplace_back(w, h, depth, true);
        s.init_depths.emplace_back(w, h, depth, true);
        if (i + 1 < kTrainingFrames) {
            s.backward_flows.emplace_back(w, h, 0.0);
            s.forward_flows.emplace_back(w, h, 0.0);
            s.occlusion.emplace_back(w, h, 1.0);
        }
    }
    return s;
}

}  // namespace pw::test
