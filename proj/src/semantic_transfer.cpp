#include "pw/semantic_transfer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pw/dcm/ops.hpp"
#include "pw/errors.hpp"

namespace pw::semantic {

namespace {

constexpr int kTrainSteps = 1000;
constexpr double kBetaStart = 1e-4;
constexpr double kBetaEnd = 0.02;

Matrix to_tokens(const Tensor& t) {
    const int n = t.h() * t.w();
    Matrix m(n, t.c());
    for (int c = 0; c < t.c(); ++c)
        for (int p = 0; p < n; ++p) m(p, c) = t.data[std::size_t(c) * n + p];
    return m;
}

Tensor from_tokens(const Matrix& m, int h, int w) {
    Tensor t(1, int(m.cols()), h, w);
    const int n = h * w;
    for (int c = 0; c < t.c(); ++c)
        for (int p = 0; p < n; ++p) t.data[std::size_t(c) * n + p] = m(p, c);
    return t;
}

/// Normalisation over all of C x H x W (one group), no affine.
Tensor group_norm(const Tensor& x) {
    double mean = 0.0;
    for (double v : x.data) mean += v;
    mean /= double(x.size());
    double var = 0.0;
    for (double v : x.data) var += (v - mean) * (v - mean);
    var /= double(x.size());
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    Tensor y = x;
    for (auto& v : y.data) v = (v - mean) * inv;
    return y;
}

Tensor norm_silu(const Tensor& x) { return dcm::ops::silu(group_norm(x)); }

Tensor avg_pool2(const Tensor& x) {
    Tensor y(1, x.c(), x.h() / 2, x.w() / 2);
    for (int c = 0; c < x.c(); ++c)
        for (int r = 0; r < y.h(); ++r)
            for (int q = 0; q < y.w(); ++q)
                y.at(0, c, r, q) = 0.25 * (x.at(0, c, 2 * r, 2 * q) + x.at(0, c, 2 * r + 1, 2 * q) +
                                           x.at(0, c, 2 * r, 2 * q + 1) + x.at(0, c, 2 * r + 1, 2 * q + 1));
    return y;
}

Tensor upsample2(const Tensor& x) {
    Tensor y(1, x.c(), x.h() * 2, x.w() * 2);
    for (int c = 0; c < y.c(); ++c)
        for (int r = 0; r < y.h(); ++r)
            for (int q = 0; q < y.w(); ++q) y.at(0, c, r, q) = x.at(0, c, r / 2, q / 2);
    return y;
}

Matrix time_embedding(int t, int dim) {
    Matrix e(dim, 1);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
        e(i, 0) = std::sin(double(t) * freq);
        e(half + i, 0) = std::cos(double(t) * freq);
    }
    return e;
}

std::vector<double> alpha_bars() {
    std::vector<double> out(kTrainSteps);
    double acc = 1.0;
    for (int i = 0; i < kTrainSteps; ++i) {
        const double beta = kBetaStart + (kBetaEnd - kBetaStart) * double(i) / double(kTrainSteps - 1);
        acc *= 1.0 - beta;
        out[i] = acc;
    }
    return out;
}

class Init {
public:
    explicit Init(std::uint64_t seed) : rng_(seed) {}
    Matrix matrix(int rows, int cols, double std) {
        Matrix m(rows, cols);
        for (int i = 0; i < m.size(); ++i) m.data()[i] = normal_(rng_) * std;
        return m;
    }
    ToyUNet::Conv conv(int cout, int cin, int k) {
        ToyUNet::Conv c{Tensor(cout, cin, k, k), Tensor(1, cout, 1, 1)};
        const double std = 1.0 / std::sqrt(double(cin * k * k));
        for (auto& v : c.weight.data) v = normal_(rng_) * std;
        return c;
    }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
};

void trace_push(const ToyUNet::Hooks& hooks, const std::string& name, Matrix value) {
    if (hooks.trace != nullptr) hooks.trace->push_back({name, hooks.step, std::move(value)});
}

Tensor conv(const Tensor& x, const ToyUNet::Conv& c) {
    const int k = c.weight.h();
    return dcm::ops::conv2d(x, c.weight, c.bias, {k, 1, k / 2});
}

}  // namespace

AttentionResult self_attention(const Matrix& q, const Matrix& k, const Matrix& v, int d) {
    if (d <= 0) throw DimensionError("self_attention: head dim must be positive");
    if (q.cols() != k.cols() || k.rows() != v.rows() || q.rows() == 0 || k.rows() == 0)
        throw DimensionError("self_attention: q " + std::to_string(q.rows()) + "x" + std::to_string(q.cols()) +
                             ", k " + std::to_string(k.rows()) + "x" + std::to_string(k.cols()) + ", v " +
                             std::to_string(v.rows()) + "x" + std::to_string(v.cols()) + " are inconsistent");
    AttentionResult r;
    r.attn = (q * k.transpose()) / std::sqrt(double(d));
    for (Eigen::Index i = 0; i < r.attn.rows(); ++i) {
        const double mx = r.attn.row(i).maxCoeff();
        r.attn.row(i) = (r.attn.row(i).array() - mx).exp();
        r.attn.row(i) /= r.attn.row(i).sum();
    }
    r.features = r.attn * v;
    return r;
}

void ConditioningVector::validate() const {
    if (tokens.size() == 0) throw ValidationError("conditioning vector is empty");
    if (!tokens.allFinite()) throw ValidationError("conditioning vector has non-finite entries");
}

Tensor random_latent(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Tensor t(1, kLatentChannels, kLatentSize, kLatentSize);
    for (auto& v : t.data) v = normal(rng);
    return t;
}

ConditioningVector random_conditioning(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0xC0DEC0DEull);
    std::normal_distribution<double> normal;
    ConditioningVector c{Matrix(kConditioningTokens, kConditioningDim)};
    for (int i = 0; i < c.tokens.size(); ++i) c.tokens.data()[i] = normal(rng);
    return c;
}

std::vector<int> sampling_timesteps(int steps) {
    if (steps < 1 || steps > kTrainSteps) throw ValidationError("steps must be in [1, 1000]");
    std::vector<int> t(steps);
    const int stride = kTrainSteps / steps;
    for (int k = 0; k < steps; ++k) t[k] = kTrainSteps - 1 - k * stride;
    return t;
}

// ---------------------------------------------------------------------------------------------

ToyUNet::ToyUNet(const UNetConfig& config) : config_(config) {
    if (config.feature_block < 0 || config.feature_block > 1) throw ValidationError("feature_block must be 0 or 1");
    Init init(config.seed);
    const int c0 = config.base_channels;
    const int c1 = 2 * c0;
    in_conv_ = init.conv(c0, kLatentChannels, 3);
    auto block = [&](const std::string& name, int cin, int cout) {
        Block b;
        b.name = name;
        b.cin = cin;
        b.cout = cout;
        b.conv1 = init.conv(cout, cin, 3);
        b.conv2 = init.conv(cout, cout, 3);
        if (cin != cout) b.skip = init.conv(cout, cin, 1);
        b.time_proj = init.matrix(cout, config.time_dim, 1.0 / std::sqrt(double(config.time_dim)));
        const double s = 1.0 / std::sqrt(double(cout));
        b.sq = init.matrix(cout, cout, s);
        b.sk = init.matrix(cout, cout, s);
        b.sv = init.matrix(cout, cout, s);
        b.so = init.matrix(cout, cout, s);
        b.cq = init.matrix(cout, cout, s);
        b.ck = init.matrix(kConditioningDim, cout, 1.0 / std::sqrt(double(kConditioningDim)));
        b.cv = init.matrix(kConditioningDim, cout, 1.0 / std::sqrt(double(kConditioningDim)));
        b.co = init.matrix(cout, cout, s);
        return b;
    };
    blocks_.push_back(block("down0", c0, c0));
    blocks_.push_back(block("down1", c0, c1));
    blocks_.push_back(block("mid", c1, c1));
    blocks_.push_back(block("up0", 2 * c1, c1));
    blocks_.push_back(block("up1", c1 + c0, c0));
    out_conv_ = init.conv(kLatentChannels, c0, 3);
}

std::vector<std::string> ToyUNet::attention_layers() const {
    std::vector<std::string> names;
    for (const auto& b : blocks_) names.push_back(b.name + ".self_attn");
    return names;
}

std::string ToyUNet::feature_layer() const { return blocks_[3 + config_.feature_block].name + ".res"; }

Tensor ToyUNet::run_block(const Block& b, const Tensor& x, const Matrix& temb, const ConditioningVector& c,
                          std::size_t attn_index, const Hooks& hooks, bool designated) const {
    const int h = x.h();
    const int w = x.w();
    Tensor a = conv(norm_silu(x), b.conv1);
    const Matrix tproj = b.time_proj * temb;
    for (int ch = 0; ch < a.c(); ++ch)
        for (std::size_t p = 0; p < a.plane(); ++p) a.data[std::size_t(ch) * a.plane() + p] += tproj(ch, 0);
    a = conv(norm_silu(a), b.conv2);
    Tensor res = dcm::ops::add(b.cin == b.cout ? x : conv(x, b.skip), a);
    if (designated) {
        if (hooks.record_feature != nullptr) *hooks.record_feature = res;
        if (hooks.inject_feature != nullptr) {
            if (!hooks.inject_feature->same_shape(res))
                throw DimensionError("injected feature " + hooks.inject_feature->shape_string() + " does not match " +
                                     res.shape_string());
            res = *hooks.inject_feature;
        }
    }
    trace_push(hooks, b.name + ".res", to_tokens(res));

    Matrix tokens = to_tokens(res);
    const Matrix v = tokens * b.sv;
    Matrix attn;
    Matrix mix;
    if (hooks.inject_attention != nullptr) {
        attn = (*hooks.inject_attention)[attn_index];
        if (attn.rows() != v.rows() || attn.cols() != v.rows())
            throw DimensionError("injected attention map for " + b.name + " has the wrong size");
        mix = attn * v;
    } else {
        auto r = self_attention(tokens * b.sq, tokens * b.sk, v, b.cout);
        attn = std::move(r.attn);
        mix = std::move(r.features);
    }
    if (hooks.record_attention != nullptr) hooks.record_attention->push_back(attn);
    if (hooks.trace != nullptr) {
        trace_push(hooks, b.name + ".self_attn.v", v);
        trace_push(hooks, b.name + ".self_attn.attn", attn);
        trace_push(hooks, b.name + ".self_attn.mix", mix);
    }
    tokens += mix * b.so;
    trace_push(hooks, b.name + ".self_attn", tokens);

    const auto cross = self_attention(tokens * b.cq, c.tokens * b.ck, c.tokens * b.cv, b.cout);
    tokens += cross.features * b.co;
    trace_push(hooks, b.name + ".cross_attn", tokens);
    return from_tokens(tokens, h, w);
}

Tensor ToyUNet::forward(const Tensor& x, const ConditioningVector& c, int timestep, const Hooks& hooks) const {
    if (x.n() != 1 || x.c() != kLatentChannels || x.h() != kLatentSize || x.w() != kLatentSize)
        throw DimensionError("ToyUNet expects a 1x4x16x16 latent, got " + x.shape_string());
    c.validate();
    if (c.tokens.cols() != kConditioningDim) throw DimensionError("conditioning dim must be 8");
    if (hooks.inject_attention != nullptr && hooks.inject_attention->size() != blocks_.size())
        throw DimensionError("injected attention list has the wrong layer count");

    const Matrix temb = time_embedding(timestep, config_.time_dim);
    const Tensor h0 = conv(x, in_conv_);
    trace_push(hooks, "in_conv", to_tokens(h0));
    const std::size_t designated = 3 + std::size_t(config_.feature_block);

    const Tensor d0 = run_block(blocks_[0], h0, temb, c, 0, hooks, designated == 0);
    const Tensor d1 = run_block(blocks_[1], avg_pool2(d0), temb, c, 1, hooks, designated == 1);
    const Tensor m = run_block(blocks_[2], avg_pool2(d1), temb, c, 2, hooks, designated == 2);
    const Tensor u0 =
        run_block(blocks_[3], dcm::ops::concat_channels(upsample2(m), d1), temb, c, 3, hooks, designated == 3);
    const Tensor u1 =
        run_block(blocks_[4], dcm::ops::concat_channels(upsample2(u0), d0), temb, c, 4, hooks, designated == 4);
    Tensor out = conv(norm_silu(u1), out_conv_);
    trace_push(hooks, "out", to_tokens(out));
    return out;
}

Tensor ToyUNet::forward(const Tensor& x, const ConditioningVector& c, int timestep) const {
    return forward(x, c, timestep, Hooks{});
}

// ---------------------------------------------------------------------------------------------

namespace {

/// DDIM update with eta = 0; the predicted x_0 is clipped to [-1, 1].
Tensor ddim_step(const Tensor& x, const Tensor& eps, double abar, double abar_prev) {
    Tensor out = x;
    const double sa = std::sqrt(abar);
    const double sb = std::sqrt(1.0 - abar);
    const double pa = std::sqrt(abar_prev);
    const double pb = std::sqrt(1.0 - abar_prev);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = std::clamp((x.data[i] - sb * eps.data[i]) / sa, -1.0, 1.0);
        out.data[i] = pa * x0 + pb * eps.data[i];
    }
    return out;
}

void check_latent(const Tensor& x) {
    if (x.n() != 1 || x.c() != kLatentChannels || x.h() != kLatentSize || x.w() != kLatentSize)
        throw DimensionError("latent must be 1x4x16x16, got " + x.shape_string());
    for (double v : x.data)
        if (!std::isfinite(v)) throw ValidationError("latent has non-finite entries");
}

Tensor sample(const ToyUNet& net, const Tensor& x_T, const ConditioningVector& c, int steps, FeatureBank* record,
              const FeatureBank* inject, const InjectOptions& options, ActivationTrace* trace) {
    check_latent(x_T);
    const auto ts = sampling_timesteps(steps);
    const auto abar = alpha_bars();
    const int inject_steps = int(std::ceil(std::clamp(options.cutoff, 0.0, 1.0) * steps));
    if (record != nullptr) {
        record->layers = net.attention_layers();
        record->steps.clear();
    }
    Tensor x = x_T;
    for (int k = 0; k < steps; ++k) {
        ToyUNet::Hooks hooks;
        hooks.trace = trace;
        hooks.step = k;
        BankStep entry;
        entry.timestep = ts[k];
        if (record != nullptr) {
            hooks.record_attention = &entry.attention;
            hooks.record_feature = &entry.feature;
        }
        if (inject != nullptr && k < inject_steps) {
            if (options.attention) hooks.inject_attention = &inject->steps[k].attention;
            if (options.feature) hooks.inject_feature = &inject->steps[k].feature;
        }
        const Tensor eps = net.forward(x, c, ts[k], hooks);
        const double prev = k + 1 < steps ? abar[ts[k + 1]] : 1.0;
        x = ddim_step(x, eps, abar[ts[k]], prev);
        if (record != nullptr) record->steps.push_back(std::move(entry));
    }
    return x;
}

}  // namespace

Tensor denoise(const ToyUNet& net, const Tensor& x_T, const ConditioningVector& c, int steps, ActivationTrace* trace) {
    return sample(net, x_T, c, steps, nullptr, nullptr, {}, trace);
}

RecordResult denoise_record(const ToyUNet& net, const Tensor& x_T, const ConditioningVector& c, int steps,
                            ActivationTrace* trace) {
    RecordResult r;
    r.x0 = sample(net, x_T, c, steps, &r.bank, nullptr, {}, trace);
    return r;
}

Tensor denoise_inject(const ToyUNet& net, const Tensor& x_T, const ConditioningVector& c, const FeatureBank& bank,
                      int steps, const InjectOptions& options, ActivationTrace* trace) {
    if (int(bank.steps.size()) != steps)
        throw ValidationError("feature bank holds " + std::to_string(bank.steps.size()) + " steps, sampler uses " +
                              std::to_string(steps));
    const auto ts = sampling_timesteps(steps);
    for (int k = 0; k < steps; ++k)
        if (bank.steps[k].timestep != ts[k])
            throw ValidationError("feature bank timestep " + std::to_string(bank.steps[k].timestep) +
                                  " does not match the schedule (" + std::to_string(ts[k]) + ")");
    if (bank.layers != net.attention_layers()) throw ValidationError("feature bank layers do not match the network");
    return sample(net, x_T, c, steps, nullptr, &bank, options, trace);
}

// ---------------------------------------------------------------------------------------------

void FeatureBank::validate() const {
    if (steps.empty()) throw ValidationError("feature bank is empty");
    const auto ts = sampling_timesteps(int(steps.size()));
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto& s = steps[k];
        if (s.timestep != ts[k]) throw ValidationError("feature bank timesteps do not form the sampling schedule");
        if (s.attention.size() != layers.size())
            throw ValidationError("feature bank step " + std::to_string(k) + " lacks attention maps");
        for (const auto& a : s.attention) {
            if (a.rows() != a.cols() || a.rows() == 0) throw ValidationError("attention map must be square");
            for (Eigen::Index r = 0; r < a.rows(); ++r)
                if (std::abs(a.row(r).sum() - 1.0) > 1e-6 || (a.row(r).array() < 0.0).any())
                    throw ValidationError("attention row is not stochastic");
        }
        if (s.feature.size() == 0) throw ValidationError("feature bank step " + std::to_string(k) + " lacks f_t");
    }
}

bool operator==(const FeatureBank& a, const FeatureBank& b) {
    if (a.layers != b.layers || a.steps.size() != b.steps.size()) return false;
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        const auto& x = a.steps[k];
        const auto& y = b.steps[k];
        if (x.timestep != y.timestep || x.attention.size() != y.attention.size()) return false;
        for (std::size_t i = 0; i < x.attention.size(); ++i)
            if (x.attention[i].rows() != y.attention[i].rows() || x.attention[i].cols() != y.attention[i].cols() ||
                x.attention[i] != y.attention[i])
                return false;
        if (!x.feature.same_shape(y.feature) || x.feature.data != y.feature.data) return false;
    }
    return true;
}

TensorContainer FeatureBank::to_container() const {
    TensorContainer out;
    out.magic = kFeatureBankMagic;
    for (const auto& name : layers) out.arrays.push_back({"layer:" + name, {0}, {}});
    NamedArray ts{"timesteps", {std::uint32_t(steps.size())}, {}};
    for (const auto& s : steps) ts.data.push_back(float(s.timestep));
    out.arrays.push_back(std::move(ts));
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const std::string prefix = "step" + std::to_string(k) + "/";
        for (std::size_t i = 0; i < steps[k].attention.size(); ++i) {
            const Matrix& a = steps[k].attention[i];
            NamedArray arr{prefix + "attn/" + layers.at(i), {std::uint32_t(a.rows()), std::uint32_t(a.cols())}, {}};
            for (Eigen::Index r = 0; r < a.rows(); ++r)
                for (Eigen::Index c = 0; c < a.cols(); ++c) arr.data.push_back(float(a(r, c)));
            out.arrays.push_back(std::move(arr));
        }
        const Tensor& f = steps[k].feature;
        NamedArray feat{prefix + "feature",
                        {std::uint32_t(f.c()), std::uint32_t(f.h()), std::uint32_t(f.w())},
                        std::vector<float>(f.data.begin(), f.data.end())};
        out.arrays.push_back(std::move(feat));
    }
    return out;
}

FeatureBank FeatureBank::from_container(const TensorContainer& container) {
    if (container.magic != kFeatureBankMagic) throw FormatError("feature bank version mismatch: expected FTB1");
    FeatureBank bank;
    for (const auto& a : container.arrays)
        if (a.name.rfind("layer:", 0) == 0) bank.layers.push_back(a.name.substr(6));
    const NamedArray* ts = container.find("timesteps");
    if (ts == nullptr || ts->dims.size() != 1) throw FormatError("feature bank lacks a timestep list");
    for (std::size_t k = 0; k < ts->data.size(); ++k) {
        BankStep s;
        s.timestep = int(ts->data[k]);
        const std::string prefix = "step" + std::to_string(k) + "/";
        for (const auto& layer : bank.layers) {
            const NamedArray* a = container.find(prefix + "attn/" + layer);
            if (a == nullptr || a->dims.size() != 2)
                throw FormatError("feature bank lacks " + prefix + "attn/" + layer);
            Matrix m(a->dims[0], a->dims[1]);
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a->data[std::size_t(r) * m.cols() + c];
            s.attention.push_back(std::move(m));
        }
        const NamedArray* f = container.find(prefix + "feature");
        if (f == nullptr || f->dims.size() != 3) throw FormatError("feature bank lacks " + prefix + "feature");
        s.feature = Tensor(1, int(f->dims[0]), int(f->dims[1]), int(f->dims[2]));
        std::copy(f->data.begin(), f->data.end(), s.feature.data.begin());
        bank.steps.push_back(std::move(s));
    }
    return bank;
}

void write_feature_bank(const std::filesystem::path& path, const FeatureBank& bank) {
    write_container(path, bank.to_container());
}

FeatureBank read_feature_bank(const std::filesystem::path& path) {
    return FeatureBank::from_container(read_container(path, kFeatureBankMagic));
}

}  // namespace pw::semantic
