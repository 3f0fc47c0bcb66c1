#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pw/geometry.hpp"

namespace pw {

namespace dcm {
class DcmNetwork;
}

/// True where the new view was covered by reprojected map geometry.
struct OverlapMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;

    std::size_t count() const;
    bool at(int row, int col) const { return values[std::size_t(row) * width + col] != 0; }
};

struct ScaleFactor {
    double value = 1.0;

    void validate() const;
};

/// One view of the pipeline: the inpainted image, the pre-inpainting reprojection, its depth, and
/// the bookkeeping masks.
struct FrameRecord {
    int id = 0;
    CameraRig rig;
    ColorImage color;        // after inpainting
    ColorImage raw_color;    // reprojection with holes
    DepthMap depth;
    OverlapMask overlap;
    WeightMap inpaint_mask;  // 1 where inpainted (the reprojection hole mask)

    void validate() const;
};

/// A frame record for a first view with no prior geometry: no overlap, nothing inpainted.
FrameRecord make_initial_frame(int id, const CameraRig& rig, const ColorImage& color, const DepthMap& depth);

struct MapFragment {
    int frame_id = 0;
    PointCloud points;
};

/// Append-only scene point cloud. Fragments are ordered by strictly increasing frame id and are
/// never empty.
class PointCloudMap {
public:
    const std::vector<MapFragment>& fragments() const { return fragments_; }
    const PointCloud& global_points() const { return global_; }
    std::size_t point_count() const { return global_.size(); }

    /// Throws ValidationError if `frame_id` does not exceed the last fragment's id or `points` is empty.
    void add_fragment(int frame_id, PointCloud points);

private:
    std::vector<MapFragment> fragments_;
    PointCloud global_;
};

OverlapMask compute_overlap(const WeightMap& hole_mask);

/// Map points selected by the z-buffer, relabelled with the new frame's pixel they landed on, so
/// they can serve as solve_scale targets.
PointCloud correspondence_targets(const PointCloud& map_points, const Reprojection& reprojection, int frame_id);

/// Guard on |a| when forming the ratios b / a.
inline constexpr double kScaleEpsilon = 1e-8;

struct ScaleSolution {
    ScaleFactor scale;
    double residual = 0.0;          // sum_j |s a_j - b_j|_1 at the optimum
    std::size_t correspondences = 0;
};

/// L1 scale alignment of the frame's lifted overlap pixels onto `target`. The lifted point is
/// s * a + t, so the objective is sum |s a - b| with b = target - t, minimised exactly by the
/// |a|-weighted median of b / a.
ScaleSolution solve_scale(const FrameRecord& frame, const PointCloud& target);

/// The objective sum |s a - b| for an arbitrary s, over the same correspondence set solve_scale uses.
double scale_objective(const FrameRecord& frame, const PointCloud& target, double s);

/// Lifts the frame with scaled depth and appends only non-overlap pixels.
PointCloudMap fuse(PointCloudMap map, const FrameRecord& frame, ScaleFactor scale);

using InpaintFn =
    std::function<ColorImage(int frame_index, const CameraRig& rig, const ColorImage& raw, const WeightMap& holes)>;
using DepthEstimateFn = std::function<DepthMap(int frame_index, const CameraRig& rig, const ColorImage& color)>;

struct PipelineFrameReport {
    int frame_id = 0;
    double scale = 1.0;
    double residual = 0.0;
    std::size_t correspondences = 0;
    double hole_fraction = 0.0;
    std::size_t added_points = 0;
};

struct PipelineResult {
    PointCloudMap map;
    std::vector<FrameRecord> frames;            // initial frame first
    std::vector<PipelineFrameReport> reports;   // parallel to frames
    std::vector<DepthMap> estimated_depths;     // callback output before refinement and scaling
};

/// Reproject -> inpaint -> estimate depth -> (optional DCM) -> align scale -> fuse, for every rig
/// in `trajectory`. Frame ids continue from initial.id + 1.
PipelineResult run_pipeline(const FrameRecord& initial, const std::vector<CameraRig>& trajectory,
                            const InpaintFn& inpaint, const DepthEstimateFn& depth_estimate,
                            const dcm::DcmNetwork* dcm = nullptr);

}  // namespace pw
