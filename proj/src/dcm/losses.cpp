#include "pw/dcm/losses.hpp"

#include <cmath>

#include "pw/errors.hpp"

namespace pw::dcm {

DepthLoss depth_domain_loss_with_grad(const DepthMap& pred, const DepthMap& gt) {
    require_same_size(pred, gt, "depth_domain_loss");
    DepthLoss out;
    out.grad.assign(pred.size(), 0.0);
    double sp = 0.0, sg = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!pred.valid[i] || !gt.valid[i]) continue;
        sp += pred.values[i];
        sg += gt.values[i];
        ++n;
    }
    if (n < 2) throw DegenerateError("depth_domain_loss needs at least 2 valid pixels");
    const double mp = sp / double(n);
    const double mg = sg / double(n);
    double cov = 0.0, var = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!pred.valid[i] || !gt.valid[i]) continue;
        const double dp = pred.values[i] - mp;
        cov += dp * (gt.values[i] - mg);
        var += dp * dp;
    }
    const double a = var > 0.0 ? cov / var : 0.0;
    const double b = mg - a * mp;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!pred.valid[i] || !gt.valid[i]) continue;
        const double r = a * pred.values[i] + b - gt.values[i];
        sum += r * r;
        // (a, b) is optimal, so only the explicit dependence on pred remains.
        out.grad[i] = 2.0 / double(n) * a * r;
    }
    out.value = sum / double(n);
    out.pixels = n;
    out.scale = a;
    out.shift = b;
    return out;
}

double depth_domain_loss(const DepthMap& pred, const DepthMap& gt) {
    return depth_domain_loss_with_grad(pred, gt).value;
}

namespace {

struct Chain {
    double scale = 1.0;
    std::vector<DepthMap> d;       // normalised inputs
    std::vector<DepthMap> u;       // normalised corrected depths
    std::vector<DepthMap> warped;  // warped[i] = U_{i+1} in frame i's grid
    std::vector<ForwardCache> caches;
    double loss = 0.0;             // normalised L_C
    std::size_t pixels = 0;
    int empty_pairs = 0;
    std::vector<std::vector<double>> grad_u;
};

DepthMap normalized(const DepthMap& src, double m) {
    DepthMap out = src;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = out.valid[i] ? out.values[i] / m : 0.0;
    return out;
}

void run_chain(const TrainingSequence& seq, const DcmNetwork* net, double alpha, bool want_grad, Chain& c) {
    seq.validate();
    const int n = seq.frame_count();
    const int w = seq.width();
    const int h = seq.height();
    std::vector<const DepthMap*> inputs;
    for (const auto& d : seq.init_depths) inputs.push_back(&d);
    c.scale = normalisation_scale(inputs);
    c.d.clear();
    for (const auto& d : seq.init_depths) c.d.push_back(normalized(d, c.scale));
    c.u.assign(n, DepthMap());
    c.warped.assign(n - 1, DepthMap());
    c.caches.assign(net != nullptr ? n - 1 : 0, ForwardCache());
    c.u[n - 1] = c.d[n - 1];

    const std::size_t plane = std::size_t(w) * h;
    for (int i = n - 2; i >= 0; --i) {
        const DepthMap& di = c.d[i];
        c.warped[i] = warp_by_flow(c.u[i + 1], seq.forward_flows[i]);
        DepthMap& ui = c.u[i];
        ui = DepthMap(w, h);
        std::vector<double> residual(plane, 0.0);
        if (net != nullptr) {
            Tensor x(1, 2, h, w);
            for (std::size_t p = 0; p < plane; ++p) {
                const double prev = di.valid[p] ? di.values[p] : 0.0;
                x.data[p] = c.warped[i].valid[p] ? c.warped[i].values[p] : prev;
                x.data[plane + p] = prev;
            }
            const Tensor y = net->forward(x, &c.caches[i]);
            residual.assign(y.data.begin(), y.data.end());
        }
        for (std::size_t p = 0; p < plane; ++p) {
            const double v = di.values[p] + residual[p];
            if (di.valid[p] && v > 0.0) {
                ui.values[p] = v;
                ui.valid[p] = 1;
            }
        }
    }

    double sum = 0.0;
    std::size_t count = 0;
    struct Term {
        int pair;
        std::size_t pixel;
        double coeff;  // w * sign(residual)
    };
    std::vector<Term> terms;
    for (int i = 0; i + 1 < n; ++i) {
        const FlowField& flow = seq.backward_flows[i];
        const DepthMap warped_prev = warp_by_flow(c.u[i], flow);
        const WarpedColor warped_color = warp_by_flow(seq.colors[i], flow);
        const WeightMap weight = occlusion_weights(seq.colors[i + 1], warped_color.image, alpha);
        std::size_t pair_count = 0;
        for (std::size_t p = 0; p < plane; ++p) {
            if (!warped_prev.valid[p] || !c.u[i + 1].valid[p] || !warped_color.valid[p]) continue;
            const double r = c.u[i + 1].values[p] - warped_prev.values[p];
            sum += weight.values[p] * std::abs(r);
            ++pair_count;
            if (want_grad) {
                const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
                terms.push_back({i, p, weight.values[p] * sgn});
            }
        }
        if (pair_count == 0) ++c.empty_pairs;
        count += pair_count;
    }
    c.pixels = count;
    c.loss = count > 0 ? sum / double(count) : 0.0;

    if (!want_grad) return;
    c.grad_u.assign(n, std::vector<double>(plane, 0.0));
    if (count == 0) return;
    const double inv = 1.0 / double(count);
    for (const auto& t : terms) {
        c.grad_u[t.pair + 1][t.pixel] += t.coeff * inv;
        const int row = int(t.pixel / std::size_t(w));
        const int col = int(t.pixel % std::size_t(w));
        const FlowField& flow = seq.backward_flows[t.pair];
        const auto taps = bilinear_taps(w, h, col + flow.dx(row, col), row + flow.dy(row, col));
        for (int k = 0; k < taps.count; ++k) c.grad_u[t.pair][taps.index[k]] -= t.coeff * inv * taps.weight[k];
    }
}

}  // namespace

ConsistencyResult consistency_loss(const TrainingSequence& seq, const DcmNetwork* net, double alpha) {
    Chain c;
    run_chain(seq, net, alpha, false, c);
    ConsistencyResult r;
    r.scale = c.scale;
    r.normalized_loss = c.loss;
    r.loss = c.loss * c.scale;
    r.pixels = c.pixels;
    r.empty_pairs = c.empty_pairs;
    for (auto u : c.u) {
        for (std::size_t p = 0; p < u.size(); ++p) u.values[p] *= c.scale;
        r.corrected.push_back(std::move(u));
    }
    return r;
}

TrainingLoss training_loss(const TrainingSequence& seq, const DcmNetwork& net, Gradients* grads,
                           const LossWeights& weights, double alpha) {
    Chain c;
    const bool want_grad = grads != nullptr;
    run_chain(seq, &net, alpha, want_grad, c);
    const int n = seq.frame_count();
    const int w = seq.width();
    const int h = seq.height();
    const std::size_t plane = std::size_t(w) * h;

    TrainingLoss out;
    out.consistency = c.loss;
    if (want_grad)
        for (auto& g : c.grad_u)
            for (auto& v : g) v *= weights.consistency;

    double depth_sum = 0.0;
    std::vector<std::pair<int, DepthLoss>> depth_terms;
    for (int i = 0; i + 1 < n; ++i) {
        const DepthMap gt = normalized(seq.gt_depths[i], c.scale);
        try {
            depth_terms.emplace_back(i, depth_domain_loss_with_grad(c.u[i], gt));
        } catch (const DegenerateError&) {
            continue;
        }
        depth_sum += depth_terms.back().second.value;
    }
    if (!depth_terms.empty()) {
        out.depth = depth_sum / double(depth_terms.size());
        if (want_grad) {
            const double k = weights.depth / double(depth_terms.size());
            for (const auto& [i, dl] : depth_terms)
                for (std::size_t p = 0; p < plane; ++p) c.grad_u[i][p] += k * dl.grad[p];
        }
    }
    out.total = weights.consistency * out.consistency + weights.depth * out.depth;
    if (!want_grad) return out;

    for (int i = 0; i + 1 < n; ++i) {
        Tensor g(1, 1, h, w);
        for (std::size_t p = 0; p < plane; ++p)
            if (c.u[i].valid[p]) g.data[p] = c.grad_u[i][p];
        const Tensor g_in = net.backward(c.caches[i], g, *grads);
        if (i + 1 == n - 1) continue;  // the last frame is not corrected
        const FlowField& flow = seq.forward_flows[i];
        for (int row = 0; row < h; ++row) {
            for (int col = 0; col < w; ++col) {
                const std::size_t p = std::size_t(row) * w + col;
                if (!c.warped[i].valid[p] || g_in.data[p] == 0.0) continue;
                const auto taps = bilinear_taps(w, h, col + flow.dx(row, col), row + flow.dy(row, col));
                for (int k = 0; k < taps.count; ++k) c.grad_u[i + 1][taps.index[k]] += g_in.data[p] * taps.weight[k];
            }
        }
    }
    return out;
}

}  // namespace pw::dcm
