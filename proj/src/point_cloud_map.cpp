#include "pw/point_cloud_map.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "pw/dcm/network.hpp"
#include "pw/errors.hpp"

namespace pw {

std::size_t OverlapMask::count() const {
    std::size_t n = 0;
    for (auto v : values) n += v != 0;
    return n;
}

void ScaleFactor::validate() const {
    if (!(value > 0.0) || !std::isfinite(value)) throw ValidationError("scale factor must be positive and finite");
}

void FrameRecord::validate() const {
    rig.validate();
    const int w = rig.intrinsics.width;
    const int h = rig.intrinsics.height;
    require_same_size(color.width, color.height, w, h, "frame colour");
    require_same_size(raw_color.width, raw_color.height, w, h, "frame raw colour");
    require_same_size(depth.width, depth.height, w, h, "frame depth");
    require_same_size(overlap.width, overlap.height, w, h, "frame overlap");
    require_same_size(inpaint_mask.width, inpaint_mask.height, w, h, "frame inpaint mask");
    depth.validate();
}

FrameRecord make_initial_frame(int id, const CameraRig& rig, const ColorImage& color, const DepthMap& depth) {
    FrameRecord f;
    f.id = id;
    f.rig = rig;
    f.color = color;
    f.raw_color = color;
    f.depth = depth;
    f.overlap = {color.width, color.height, std::vector<std::uint8_t>(std::size_t(color.width) * color.height, 0)};
    f.inpaint_mask = WeightMap(color.width, color.height, 0.0);
    f.validate();
    return f;
}

void PointCloudMap::add_fragment(int frame_id, PointCloud points) {
    if (points.empty()) throw ValidationError("map fragments must not be empty");
    if (!fragments_.empty() && frame_id <= fragments_.back().frame_id)
        throw ValidationError("map fragment ids must be strictly increasing");
    global_.append(points);
    fragments_.push_back({frame_id, std::move(points)});
}

OverlapMask compute_overlap(const WeightMap& hole_mask) {
    OverlapMask m{hole_mask.width, hole_mask.height, std::vector<std::uint8_t>(hole_mask.values.size(), 0)};
    for (std::size_t i = 0; i < hole_mask.values.size(); ++i) {
        const double h = hole_mask.values[i];
        if (h != 0.0 && h != 1.0) throw ValidationError("hole mask entries must be 0 or 1");
        m.values[i] = h == 0.0 ? 1 : 0;
    }
    return m;
}

PointCloud correspondence_targets(const PointCloud& map_points, const Reprojection& reprojection, int frame_id) {
    PointCloud out;
    const int w = reprojection.depth.width;
    for (std::size_t idx = 0; idx < reprojection.source_index.size(); ++idx) {
        const auto src = reprojection.source_index[idx];
        if (src < 0) continue;
        const auto i = std::size_t(src);
        out.push_back(map_points.positions[i], map_points.colors[i], {frame_id, int(idx / w), int(idx % w)},
                      map_points.source_depth[i]);
    }
    return out;
}

namespace {

struct Correspondence {
    Eigen::Vector3d a;
    Eigen::Vector3d b;
};

std::vector<Correspondence> gather(const FrameRecord& frame, const PointCloud& target) {
    frame.validate();
    const auto& k = frame.rig.intrinsics;
    const int w = k.width;
    const int h = k.height;
    std::vector<std::int64_t> lookup(std::size_t(w) * h, -1);
    for (std::size_t i = 0; i < target.size(); ++i) {
        const auto& sp = target.source_pixel[i];
        if (sp.frame != frame.id) continue;
        if (sp.row < 0 || sp.row >= h || sp.col < 0 || sp.col >= w) continue;
        auto& slot = lookup[std::size_t(sp.row) * w + sp.col];
        if (slot < 0) slot = std::int64_t(i);
    }
    std::vector<Correspondence> out;
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            const auto idx = std::size_t(v) * w + u;
            if (!frame.overlap.values[idx] || !frame.depth.valid[idx] || lookup[idx] < 0) continue;
            const double d = frame.depth.values[idx];
            const Eigen::Vector3d a = frame.rig.pose.rotation * (d * k.ray(u, v));
            const Eigen::Vector3d b = target.positions[std::size_t(lookup[idx])] - frame.rig.pose.translation;
            out.push_back({a, b});
        }
    }
    return out;
}

double objective(const std::vector<Correspondence>& corr, double s) {
    double total = 0.0;
    for (const auto& c : corr) total += (s * c.a - c.b).cwiseAbs().sum();
    return total;
}

}  // namespace

ScaleSolution solve_scale(const FrameRecord& frame, const PointCloud& target) {
    const auto corr = gather(frame, target);
    if (corr.empty())
        throw AlignmentError("solve_scale: frame " + std::to_string(frame.id) + " has no overlap correspondences");

    std::vector<std::pair<double, double>> ratios;  // (b / a, |a|)
    ratios.reserve(corr.size() * 3);
    double total_weight = 0.0;
    for (const auto& c : corr) {
        for (int k = 0; k < 3; ++k) {
            const double wa = std::abs(c.a[k]);
            if (!(wa > kScaleEpsilon)) continue;
            ratios.emplace_back(c.b[k] / c.a[k], wa);
            total_weight += wa;
        }
    }
    if (ratios.empty())
        throw DegenerateError("solve_scale: frame " + std::to_string(frame.id) + " has degenerate geometry (all |a| <= eps)");

    std::sort(ratios.begin(), ratios.end());
    double cumulative = 0.0;
    double s = ratios.back().first;
    for (const auto& [r, wgt] : ratios) {
        cumulative += wgt;
        if (cumulative >= 0.5 * total_weight) {
            s = r;
            break;
        }
    }
    ScaleSolution sol;
    sol.scale.value = s;
    sol.residual = objective(corr, s);
    sol.correspondences = corr.size();
    if (!(s > 0.0) || !std::isfinite(s))
        throw AlignmentError("solve_scale: frame " + std::to_string(frame.id) + " produced a non-positive scale " +
                             std::to_string(s));
    return sol;
}

double scale_objective(const FrameRecord& frame, const PointCloud& target, double s) {
    return objective(gather(frame, target), s);
}

PointCloudMap fuse(PointCloudMap map, const FrameRecord& frame, ScaleFactor scale) {
    scale.validate();
    frame.validate();
    DepthMap scaled = frame.depth;
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        if (frame.overlap.values[i]) scaled.valid[i] = 0;
        if (scaled.valid[i]) scaled.values[i] *= scale.value;
    }
    PointCloud fresh = lift_to_points(frame.color, scaled, frame.rig, frame.id);
    if (!fresh.empty()) map.add_fragment(frame.id, std::move(fresh));
    return map;
}

namespace {

template <class Fn>
auto call_with_frame(int frame_index, const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw Error("frame " + std::to_string(frame_index) + ": " + what + " failed: " + e.what());
    }
}

/// Estimator depth with reprojection holes replaced, pre-scaled by the median ratio on overlap pixels,
/// so both DCM inputs share a scale.
DepthMap fill_reprojected(const DepthMap& reprojected, const DepthMap& estimate) {
    std::vector<double> ratios;
    for (std::size_t i = 0; i < reprojected.size(); ++i)
        if (reprojected.valid[i] && estimate.valid[i]) ratios.push_back(reprojected.values[i] / estimate.values[i]);
    double ratio = 1.0;
    if (!ratios.empty()) {
        auto mid = ratios.begin() + std::ptrdiff_t(ratios.size() / 2);
        std::nth_element(ratios.begin(), mid, ratios.end());
        ratio = *mid;
    }
    DepthMap out = reprojected;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.valid[i] || !estimate.valid[i]) continue;
        out.values[i] = ratio * estimate.values[i];
        out.valid[i] = 1;
    }
    return out;
}

}  // namespace

PipelineResult run_pipeline(const FrameRecord& initial, const std::vector<CameraRig>& trajectory,
                            const InpaintFn& inpaint, const DepthEstimateFn& depth_estimate, const dcm::DcmNetwork* dcm) {
    if (trajectory.empty()) throw ValidationError("run_pipeline: trajectory must not be empty");
    initial.validate();

    PipelineResult result;
    result.map.add_fragment(initial.id, lift_to_points(initial.color, initial.depth, initial.rig, initial.id));
    result.frames.push_back(initial);
    result.reports.push_back({initial.id, 1.0, 0.0, 0, 0.0, result.map.point_count()});
    result.estimated_depths.push_back(initial.depth);

    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        const int frame_index = int(k) + 1;
        const int frame_id = initial.id + frame_index;
        const CameraRig& rig = trajectory[k];
        rig.validate();
        const auto& map_points = result.map.global_points();
        const Reprojection reproj = reproject(map_points, rig);

        FrameRecord frame;
        frame.id = frame_id;
        frame.rig = rig;
        frame.raw_color = reproj.color;
        frame.inpaint_mask = reproj.hole_mask;
        frame.overlap = compute_overlap(reproj.hole_mask);
        frame.color = call_with_frame(frame_index, "inpaint callback",
                                      [&] { return inpaint(frame_index, rig, reproj.color, reproj.hole_mask); });
        require_same_size(frame.color.width, frame.color.height, rig.intrinsics.width, rig.intrinsics.height,
                          "inpaint callback output");
        DepthMap estimate = call_with_frame(frame_index, "depth callback",
                                            [&] { return depth_estimate(frame_index, rig, frame.color); });
        require_same_size(estimate.width, estimate.height, rig.intrinsics.width, rig.intrinsics.height,
                          "depth callback output");
        result.estimated_depths.push_back(estimate);

        if (dcm != nullptr) {
            const DepthMap prev = fill_reprojected(reproj.depth, estimate);
            frame.depth = dcm::apply_dcm(*dcm, estimate, prev);
        } else {
            frame.depth = std::move(estimate);
        }

        const PointCloud targets = correspondence_targets(map_points, reproj, frame_id);
        ScaleSolution sol;
        try {
            sol = solve_scale(frame, targets);
        } catch (const AlignmentError& e) {
            throw AlignmentError("frame " + std::to_string(frame_index) + ": " + e.what());
        } catch (const DegenerateError& e) {
            throw DegenerateError("frame " + std::to_string(frame_index) + ": " + e.what());
        }

        const std::size_t before = result.map.point_count();
        result.map = fuse(std::move(result.map), frame, sol.scale);
        PipelineFrameReport report;
        report.frame_id = frame_id;
        report.scale = sol.scale.value;
        report.residual = sol.residual;
        report.correspondences = sol.correspondences;
        report.hole_fraction = reproj.hole_mask.mean();
        report.added_points = result.map.point_count() - before;
        result.reports.push_back(report);
        result.frames.push_back(std::move(frame));
    }
    return result;
}

}  // namespace pw
