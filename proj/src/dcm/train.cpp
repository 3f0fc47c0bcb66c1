#include "pw/dcm/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pw/metrics.hpp"
#include "pw/parallel.hpp"

namespace pw::dcm {

AdamState::AdamState(const std::vector<Parameter>& params) {
    for (const auto& p : params) {
        m.emplace_back(p.value.n(), p.value.c(), p.value.h(), p.value.w());
        v.emplace_back(p.value.n(), p.value.c(), p.value.h(), p.value.w());
    }
}

void adam_step(std::vector<Parameter>& params, const Gradients& grads, AdamState& state, const AdamConfig& config) {
    if (grads.size() != params.size() || state.m.size() != params.size())
        throw DimensionError("adam_step: parameter/gradient/state counts differ");
    ++state.step;
    const double c1 = 1.0 - std::pow(config.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(config.beta2, double(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k].value;
        if (!p.same_shape(grads[k]) || !p.same_shape(state.m[k]))
            throw DimensionError("adam_step: shape mismatch for " + params[k].name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = grads[k].data[i];
            double& m = state.m[k].data[i];
            double& v = state.v[k].data[i];
            m = config.beta1 * m + (1.0 - config.beta1) * g;
            v = config.beta2 * v + (1.0 - config.beta2) * g * g;
            p.data[i] -= config.lr * (m / c1) / (std::sqrt(v / c2) + config.eps);
        }
    }
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
    TrainConfig c;
    c.iterations = 20000;
    c.crop = 384;
    return c;
}

TrainingDivergedError::TrainingDivergedError(int iteration, DcmNetwork last_good)
    : NumericError("training diverged at iteration " + std::to_string(iteration)),
      iteration_(iteration),
      last_good_(std::move(last_good)) {}

TrainResult train_dcm(const std::vector<TrainingSequence>& dataset, const TrainConfig& config,
                      const TrainProgress& progress) {
    return train_dcm(dataset, config, DcmNetwork(config.network), progress);
}

TrainResult train_dcm(const std::vector<TrainingSequence>& dataset, const TrainConfig& config, DcmNetwork initial,
                      const TrainProgress& progress) {
    if (dataset.empty()) throw ValidationError("train_dcm: empty dataset");
    if (config.crop <= 0 || config.crop % 4 != 0) throw DimensionError("train_dcm: crop must be a positive multiple of 4");
    if (config.batch <= 0 || config.iterations < 0) throw ValidationError("train_dcm: batch and iterations must be positive");
    for (const auto& s : dataset) {
        s.validate();
        if (s.width() < config.crop || s.height() < config.crop)
            throw DimensionError("train_dcm: crop larger than a training sequence");
    }

    TrainResult result{std::move(initial), {}};
    DcmNetwork& net = result.net;
    AdamState state(net.parameters());
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);

    struct Sample {
        std::size_t seq;
        int x0, y0;
    };
    for (int it = 0; it < config.iterations; ++it) {
        std::vector<Sample> batch;
        for (int b = 0; b < config.batch; ++b) {
            Sample s{pick(rng), 0, 0};
            const auto& seq = dataset[s.seq];
            s.x0 = std::uniform_int_distribution<int>(0, seq.width() - config.crop)(rng);
            s.y0 = std::uniform_int_distribution<int>(0, seq.height() - config.crop)(rng);
            batch.push_back(s);
        }
        std::vector<Gradients> grads(batch.size(), net.zero_gradients());
        std::vector<TrainingLoss> losses(batch.size());
        parallel_for(batch.size(), [&](std::size_t b) {
            const auto crop = dataset[batch[b].seq].crop(batch[b].x0, batch[b].y0, config.crop, config.crop);
            losses[b] = training_loss(crop, net, &grads[b], config.weights, config.alpha);
        });

        TrainLogEntry entry{it, 0.0, 0.0, 0.0};
        Gradients total = net.zero_gradients();
        const double inv = 1.0 / double(batch.size());
        bool finite = true;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            entry.total += losses[b].total * inv;
            entry.consistency += losses[b].consistency * inv;
            entry.depth += losses[b].depth * inv;
            for (std::size_t k = 0; k < total.size(); ++k)
                for (std::size_t i = 0; i < total[k].size(); ++i) {
                    total[k].data[i] += grads[b][k].data[i] * inv;
                    finite = finite && std::isfinite(grads[b][k].data[i]);
                }
        }
        if (!finite || !std::isfinite(entry.total)) throw TrainingDivergedError(it, net);
        adam_step(net.parameters(), total, state, config.adam);
        result.log.push_back(entry);
        if (progress) progress(entry);
    }
    return result;
}

double grad_check(std::vector<Parameter>& params, const LossFn& loss, double h) {
    Gradients analytic;
    for (const auto& p : params) analytic.emplace_back(p.value.n(), p.value.c(), p.value.h(), p.value.w());
    loss(params, &analytic);
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& data = params[k].value.data;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            auto at = [&](double offset) {
                data[i] = saved + offset;
                return loss(params, nullptr);
            };
            // Fourth-order central stencil at step h.
            const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            data[i] = saved;
            const double a = analytic[k].data[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

DcmEvaluation evaluate_dcm(const TrainingSequence& seq, const DcmNetwork& net, double alpha) {
    const auto before = consistency_loss(seq, nullptr, alpha);
    const auto after = consistency_loss(seq, &net, alpha);
    DcmEvaluation e;
    e.lc_before = before.loss;
    e.lc_after = after.loss;
    e.tv_before = xt_slice_tv(before.corrected);
    e.tv_after = xt_slice_tv(after.corrected);
    return e;
}

}  // namespace pw::dcm
