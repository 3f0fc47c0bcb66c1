#include "pw/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pw/errors.hpp"

namespace pw {

void PointCloud::reserve(std::size_t n) {
    positions.reserve(n);
    colors.reserve(n);
    source_pixel.reserve(n);
    source_depth.reserve(n);
}

void PointCloud::push_back(const Eigen::Vector3d& p, const std::array<double, 3>& rgb, SourcePixel src, double depth) {
    positions.push_back(p);
    colors.push_back(rgb);
    source_pixel.push_back(src);
    source_depth.push_back(depth);
}

void PointCloud::append(const PointCloud& other) {
    positions.insert(positions.end(), other.positions.begin(), other.positions.end());
    colors.insert(colors.end(), other.colors.begin(), other.colors.end());
    source_pixel.insert(source_pixel.end(), other.source_pixel.begin(), other.source_pixel.end());
    source_depth.insert(source_depth.end(), other.source_depth.begin(), other.source_depth.end());
}

void PointCloud::validate() const {
    const auto n = positions.size();
    if (colors.size() != n || source_pixel.size() != n || source_depth.size() != n)
        throw ValidationError("point cloud attribute arrays have different lengths");
    for (std::size_t i = 0; i < n; ++i) {
        if (!positions[i].allFinite()) throw ValidationError("point cloud: non-finite position at " + std::to_string(i));
        for (double c : colors[i])
            if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("point cloud: colour outside [0,1] at " + std::to_string(i));
        if (!(source_depth[i] > 0.0)) throw ValidationError("point cloud: non-positive source depth");
    }
}

PointCloud lift_to_points(const ColorImage& image, const DepthMap& depth, const CameraRig& rig, int frame_id) {
    rig.validate();
    const auto& k = rig.intrinsics;
    require_same_size(image.width, image.height, k.width, k.height, "lift_to_points image");
    require_same_size(depth.width, depth.height, k.width, k.height, "lift_to_points depth");

    PointCloud cloud;
    cloud.reserve(depth.valid_count());
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            if (!depth.is_valid(v, u)) continue;
            const double d = depth.at(v, u);
            const Eigen::Vector3d p_cam(d * (u - k.cx) / k.fx, d * (v - k.cy) / k.fy, d);
            cloud.push_back(rig.pose.to_world(p_cam), image.pixel(v, u), {frame_id, v, u}, d);
        }
    }
    return cloud;
}

Reprojection reproject(const PointCloud& cloud, const CameraRig& rig) {
    rig.validate();
    const auto& k = rig.intrinsics;
    const int w = k.width;
    const int h = k.height;

    Reprojection out;
    out.color = ColorImage(w, h, 0.0);
    out.depth = DepthMap(w, h, 0.0, false);
    out.hole_mask = WeightMap(w, h, 1.0);
    out.source_index.assign(std::size_t(w) * h, -1);

    std::vector<double> zbuf(std::size_t(w) * h, std::numeric_limits<double>::infinity());
    const Eigen::Matrix3d rt = rig.pose.rotation.transpose();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d p = rt * (cloud.positions[i] - rig.pose.translation);
        const double z = p.z();
        if (!(z > kZNear)) continue;
        const double uf = k.fx * p.x() / z + k.cx;
        const double vf = k.fy * p.y() / z + k.cy;
        const double ur = std::floor(uf + 0.5);
        const double vr = std::floor(vf + 0.5);
        if (ur < 0.0 || vr < 0.0 || ur >= w || vr >= h) continue;
        const auto idx = std::size_t(vr) * w + std::size_t(ur);
        // Strict comparison keeps the earlier (lower-index) point on ties.
        if (z < zbuf[idx]) {
            zbuf[idx] = z;
            out.source_index[idx] = std::int64_t(i);
        }
    }

    for (std::size_t idx = 0; idx < zbuf.size(); ++idx) {
        const auto src = out.source_index[idx];
        if (src < 0) continue;
        out.depth.values[idx] = zbuf[idx];
        out.depth.valid[idx] = 1;
        out.hole_mask.values[idx] = 0.0;
        const auto& c = cloud.colors[std::size_t(src)];
        out.color.values[idx * 3 + 0] = c[0];
        out.color.values[idx * 3 + 1] = c[1];
        out.color.values[idx * 3 + 2] = c[2];
    }
    return out;
}

BilinearTaps bilinear_taps(int width, int height, double x, double y) {
    BilinearTaps taps;
    if (!std::isfinite(x) || !std::isfinite(y) || x < 0.0 || y < 0.0 || x > width - 1 || y > height - 1) return taps;
    const double x0f = std::floor(x);
    const double y0f = std::floor(y);
    const double ax = x - x0f;
    const double ay = y - y0f;
    const int x0 = int(x0f);
    const int y0 = int(y0f);
    const double wx[2] = {1.0 - ax, ax};
    const double wy[2] = {1.0 - ay, ay};
    taps.inside = true;
    for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
            const double wgt = wx[dx] * wy[dy];
            if (wgt == 0.0) continue;
            taps.index[taps.count] = std::size_t(y0 + dy) * width + std::size_t(x0 + dx);
            taps.weight[taps.count] = wgt;
            ++taps.count;
        }
    }
    return taps;
}

DepthMap warp_by_flow(const DepthMap& source, const FlowField& flow) {
    require_same_size(source, flow, "warp_by_flow depth");
    DepthMap out(source.width, source.height, 0.0, false);
    for (int v = 0; v < source.height; ++v) {
        for (int u = 0; u < source.width; ++u) {
            const auto taps = bilinear_taps(source.width, source.height, u + flow.dx(v, u), v + flow.dy(v, u));
            if (!taps.inside) continue;
            double acc = 0.0;
            bool ok = true;
            for (int t = 0; t < taps.count; ++t) {
                if (!source.valid[taps.index[t]]) {
                    ok = false;
                    break;
                }
                acc += taps.weight[t] * source.values[taps.index[t]];
            }
            if (!ok) continue;
            const auto idx = out.index(v, u);
            out.values[idx] = acc;
            out.valid[idx] = 1;
        }
    }
    return out;
}

WarpedColor warp_by_flow(const ColorImage& source, const FlowField& flow) {
    require_same_size(source, flow, "warp_by_flow colour");
    WarpedColor out{source, std::vector<std::uint8_t>(std::size_t(source.width) * source.height, 0)};
    for (int v = 0; v < source.height; ++v) {
        for (int u = 0; u < source.width; ++u) {
            const auto taps = bilinear_taps(source.width, source.height, u + flow.dx(v, u), v + flow.dy(v, u));
            if (!taps.inside) continue;
            const auto pix = std::size_t(v) * source.width + u;
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int t = 0; t < taps.count; ++t) acc += taps.weight[t] * source.values[taps.index[t] * 3 + c];
                out.image.values[pix * 3 + c] = acc;
            }
            out.valid[pix] = 1;
        }
    }
    return out;
}

WeightMap occlusion_weights(const ColorImage& o_next, const ColorImage& o_warped, double alpha) {
    require_same_size(o_next, o_warped, "occlusion_weights");
    if (!(alpha >= 0.0)) throw ValidationError("occlusion_weights: alpha must be >= 0");
    WeightMap w(o_next.width, o_next.height, 1.0);
    for (std::size_t i = 0; i < w.values.size(); ++i) {
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double d = o_next.values[i * 3 + c] - o_warped.values[i * 3 + c];
            d2 += d * d;
        }
        w.values[i] = std::exp(-alpha * d2);
    }
    return w;
}

}  // namespace pw
