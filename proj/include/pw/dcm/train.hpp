#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pw/dcm/losses.hpp"
#include "pw/dcm/network.hpp"
#include "pw/errors.hpp"
#include "pw/sequence.hpp"

namespace pw::dcm {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t step = 0;

    explicit AdamState(const std::vector<Parameter>& params);
};

/// One bias-corrected Adam update. Throws DimensionError if shapes disagree.
void adam_step(std::vector<Parameter>& params, const Gradients& grads, AdamState& state, const AdamConfig& config);

struct TrainConfig {
    int iterations = 500;
    int batch = 4;
    int crop = 64;
    std::uint64_t seed = 0;
    AdamConfig adam;
    LossWeights weights;
    double alpha = kDefaultOcclusionAlpha;
    DcmConfig network;

    static TrainConfig desk();
    static TrainConfig paper();
};

struct TrainLogEntry {
    int iteration = 0;
    double total = 0.0;
    double consistency = 0.0;
    double depth = 0.0;
};

struct TrainResult {
    DcmNetwork net;
    std::vector<TrainLogEntry> log;
};

/// Thrown when the loss or a gradient becomes non-finite. Carries the network from before the
/// failing step.
class TrainingDivergedError : public NumericError {
public:
    TrainingDivergedError(int iteration, DcmNetwork last_good);
    int iteration() const { return iteration_; }
    const DcmNetwork& last_good() const { return last_good_; }

private:
    int iteration_;
    DcmNetwork last_good_;
};

using TrainProgress = std::function<void(const TrainLogEntry&)>;

/// Adam on the mean training_loss of `batch` random crops per iteration. Deterministic given the seed.
TrainResult train_dcm(const std::vector<TrainingSequence>& dataset, const TrainConfig& config,
                      const TrainProgress& progress = {});

/// Continues training from an existing network.
TrainResult train_dcm(const std::vector<TrainingSequence>& dataset, const TrainConfig& config, DcmNetwork initial,
                      const TrainProgress& progress = {});

using LossFn = std::function<double(const std::vector<Parameter>& params, Gradients* grads)>;

/// max over parameter entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8), using
/// central differences with step h. `params` is restored on return.
double grad_check(std::vector<Parameter>& params, const LossFn& loss, double h = 1e-4);

struct DcmEvaluation {
    double lc_before = 0.0;  // identity update, metres
    double lc_after = 0.0;
    double tv_before = 0.0;
    double tv_after = 0.0;
};

DcmEvaluation evaluate_dcm(const TrainingSequence& seq, const DcmNetwork& net, double alpha = kDefaultOcclusionAlpha);

}  // namespace pw::dcm
