#pragma once

#include <vector>

#include "pw/camera.hpp"
#include "pw/image.hpp"

namespace pw {

inline constexpr int kTrainingFrames = 7;

/// How the input depths of a training sequence were corrupted from ground truth.
struct Corruption {
    bool enabled = true;
    std::vector<double> drift;        // per-frame multiplicative scale s_i
    double noise_amplitude = 0.0;     // std of the low-frequency additive field, metres
};

/// Seven consecutive frames with ground truth, corrupted input depths, and oracle flows.
/// backward_flows[i] is F_{i+1 => i} (lives in frame i+1's grid); forward_flows[i] is F_{i => i+1}
/// (lives in frame i's grid). occlusion[i] is the oracle visibility of frame i+1's pixels in frame i.
struct TrainingSequence {
    std::vector<CameraRig> rigs;
    std::vector<ColorImage> colors;
    std::vector<DepthMap> gt_depths;
    std::vector<DepthMap> init_depths;
    std::vector<FlowField> backward_flows;
    std::vector<FlowField> forward_flows;
    std::vector<WeightMap> occlusion;
    Corruption corruption;

    int width() const { return colors.empty() ? 0 : colors.front().width; }
    int height() const { return colors.empty() ? 0 : colors.front().height; }
    int frame_count() const { return int(colors.size()); }

    /// Exactly kTrainingFrames frames, consistent resolutions, valid depths and colours.
    void validate() const;

    /// Same window applied to every raster. Flows keep their displacements.
    TrainingSequence crop(int x0, int y0, int w, int h) const;
};

}  // namespace pw
