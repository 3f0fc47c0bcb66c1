#pragma once

#include <cstddef>
#include <vector>

#include "pw/dcm/network.hpp"
#include "pw/geometry.hpp"
#include "pw/sequence.hpp"

namespace pw::dcm {

/// Affine-aligned squared error and its gradient with respect to `pred`.
struct DepthLoss {
    double value = 0.0;
    std::size_t pixels = 0;
    double scale = 0.0;
    double shift = 0.0;
    std::vector<double> grad;  // d value / d pred, zero off the valid set
};

/// Least-squares fit of a * pred + b to gt over pixels valid in both, then the mean squared
/// residual. A constant prediction fits with a = 0. Throws DegenerateError with < 2 valid pixels.
DepthLoss depth_domain_loss_with_grad(const DepthMap& pred, const DepthMap& gt);
double depth_domain_loss(const DepthMap& pred, const DepthMap& gt);

/// Sequential correction of a 7-frame sequence and the occlusion-weighted L1 between neighbours.
///
/// Depths are divided by the sequence scale m (max valid input depth). Frame 6 is kept; for
/// i = 5..0 frame i becomes d_i + net(warp(U_{i+1} into frame i), d_i). The loss sums, over every
/// pair, w * |U_{i+1} - warp(U_i by F_{i+1=>i})| with w from the colour warp, divided by the total
/// number of contributing pixels. `net == nullptr` runs the identity update.
struct ConsistencyResult {
    double loss = 0.0;             // metric units
    double normalized_loss = 0.0;  // loss / scale
    double scale = 1.0;
    std::size_t pixels = 0;
    int empty_pairs = 0;           // pairs with no contributing pixel
    std::vector<DepthMap> corrected;  // metric U_i
};

ConsistencyResult consistency_loss(const TrainingSequence& seq, const DcmNetwork* net,
                                   double alpha = kDefaultOcclusionAlpha);

struct LossWeights {
    double consistency = 1.0;
    double depth = 0.1;
};

struct TrainingLoss {
    double total = 0.0;        // consistency * L_C + depth * L_depth, both in normalised units
    double consistency = 0.0;
    double depth = 0.0;
};

/// Training objective on one sequence; accumulates parameter gradients into `grads` when non-null.
/// The depth term averages depth_domain_loss(U_i, gt_i) over frames 0..5.
TrainingLoss training_loss(const TrainingSequence& seq, const DcmNetwork& net, Gradients* grads,
                           const LossWeights& weights = {}, double alpha = kDefaultOcclusionAlpha);

}  // namespace pw::dcm
