#include "pw/sequence.hpp"

#include <string>

#include "pw/errors.hpp"

namespace pw {

void TrainingSequence::validate() const {
    if (frame_count() != kTrainingFrames)
        throw ValidationError("training sequence must hold exactly " + std::to_string(kTrainingFrames) + " frames, got " +
                              std::to_string(frame_count()));
    const auto n = std::size_t(kTrainingFrames);
    if (gt_depths.size() != n || init_depths.size() != n)
        throw ValidationError("training sequence: depth list length mismatch");
    if (backward_flows.size() != n - 1 || forward_flows.size() != n - 1 || occlusion.size() != n - 1)
        throw ValidationError("training sequence: expected one flow/occlusion entry per consecutive pair");
    const int w = width();
    const int h = height();
    for (std::size_t i = 0; i < n; ++i) {
        require_same_size(colors[i].width, colors[i].height, w, h, "training sequence colour");
        require_same_size(gt_depths[i].width, gt_depths[i].height, w, h, "training sequence gt depth");
        require_same_size(init_depths[i].width, init_depths[i].height, w, h, "training sequence input depth");
        colors[i].validate();
        gt_depths[i].validate();
        init_depths[i].validate();
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        require_same_size(backward_flows[i].width, backward_flows[i].height, w, h, "training sequence backward flow");
        require_same_size(forward_flows[i].width, forward_flows[i].height, w, h, "training sequence forward flow");
        require_same_size(occlusion[i].width, occlusion[i].height, w, h, "training sequence occlusion");
    }
}

namespace {

template <class Raster, int Channels>
Raster crop_raster(const Raster& src, int x0, int y0, int w, int h) {
    Raster out = src;
    out.width = w;
    out.height = h;
    out.values.assign(std::size_t(w) * h * Channels, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < Channels; ++k)
                out.values[(std::size_t(r) * w + c) * Channels + k] =
                    src.values[(std::size_t(r + y0) * src.width + c + x0) * Channels + k];
    return out;
}

DepthMap crop_depth(const DepthMap& src, int x0, int y0, int w, int h) {
    DepthMap out(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            out.values[out.index(r, c)] = src.at(r + y0, c + x0);
            out.valid[out.index(r, c)] = src.valid[src.index(r + y0, c + x0)];
        }
    return out;
}

}  // namespace

TrainingSequence TrainingSequence::crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > width() || y0 + h > height())
        throw DimensionError("training sequence crop window outside the frame");
    TrainingSequence out;
    out.corruption = corruption;
    for (auto rig : rigs) {
        rig.intrinsics.cx -= x0;
        rig.intrinsics.cy -= y0;
        rig.intrinsics.width = w;
        rig.intrinsics.height = h;
        out.rigs.push_back(rig);
    }
    for (const auto& c : colors) out.colors.push_back(crop_raster<ColorImage, 3>(c, x0, y0, w, h));
    for (const auto& d : gt_depths) out.gt_depths.push_back(crop_depth(d, x0, y0, w, h));
    for (const auto& d : init_depths) out.init_depths.push_back(crop_depth(d, x0, y0, w, h));
    for (const auto& f : backward_flows) out.backward_flows.push_back(crop_raster<FlowField, 2>(f, x0, y0, w, h));
    for (const auto& f : forward_flows) out.forward_flows.push_back(crop_raster<FlowField, 2>(f, x0, y0, w, h));
    for (const auto& m : occlusion) out.occlusion.push_back(crop_raster<WeightMap, 1>(m, x0, y0, w, h));
    return out;
}

}  // namespace pw
