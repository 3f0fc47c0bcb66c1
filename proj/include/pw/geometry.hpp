#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "pw/camera.hpp"
#include "pw/image.hpp"

namespace pw {

struct SourcePixel {
    int frame = 0;
    int row = 0;
    int col = 0;

    friend bool operator==(const SourcePixel&, const SourcePixel&) = default;
};

/// Coloured world-frame points with provenance back to the pixel they were lifted from.
struct PointCloud {
    std::vector<Eigen::Vector3d> positions;
    std::vector<std::array<double, 3>> colors;
    std::vector<SourcePixel> source_pixel;
    std::vector<double> source_depth;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
    void reserve(std::size_t n);
    void push_back(const Eigen::Vector3d& p, const std::array<double, 3>& rgb, SourcePixel src, double depth);
    void append(const PointCloud& other);

    void validate() const;
};

/// Points closer than this to the camera plane are culled during reprojection.
inline constexpr double kZNear = 1e-4;

/// Lifts every valid depth pixel to a world-frame point tagged with `frame_id`.
PointCloud lift_to_points(const ColorImage& image, const DepthMap& depth, const CameraRig& rig, int frame_id = 0);

struct Reprojection {
    ColorImage color;
    DepthMap depth;
    WeightMap hole_mask;                 // 1 where no point landed
    std::vector<std::int64_t> source_index;  // winning point per pixel, -1 on holes
};

/// Z-buffered one-pixel splat of `cloud` into `rig`. Nearest point wins; on equal depth the lowest
/// point index wins.
Reprojection reproject(const PointCloud& cloud, const CameraRig& rig);

/// Non-zero bilinear taps of a continuous sample position. `inside` is false when the position
/// falls outside [0, W-1] x [0, H-1].
struct BilinearTaps {
    bool inside = false;
    int count = 0;
    std::array<std::size_t, 4> index{};
    std::array<double, 4> weight{};
};

BilinearTaps bilinear_taps(int width, int height, double x, double y);

/// Samples `source` at x + flow(x). Output pixels are invalid when the sample leaves the image or
/// any contributing tap is invalid.
DepthMap warp_by_flow(const DepthMap& source, const FlowField& flow);

struct WarpedColor {
    ColorImage image;
    std::vector<std::uint8_t> valid;  // 0 where the sample left the image; image keeps the source pixel there
};

WarpedColor warp_by_flow(const ColorImage& source, const FlowField& flow);

inline constexpr double kDefaultOcclusionAlpha = 50.0;

/// w = exp(-alpha * |o_next - o_warped|^2), squared norm summed over channels.
WeightMap occlusion_weights(const ColorImage& o_next, const ColorImage& o_warped,
                            double alpha = kDefaultOcclusionAlpha);

}  // namespace pw
