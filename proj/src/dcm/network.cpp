#include "pw/dcm/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pw/errors.hpp"

namespace pw::dcm {

namespace {

constexpr ops::ConvSpec kDown{3, 2, 1};
constexpr ops::ConvSpec kSame{3, 1, 1};
constexpr ops::ConvSpec kUp{4, 2, 1};

// Convolutions followed by instance norm carry no bias: the norm removes any per-channel offset.
const Tensor kNoBias;

Tensor kaiming(int d0, int d1, int k, int fan_in, std::mt19937_64& rng) {
    Tensor t(d0, d1, k, k);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / double(fan_in)));
    for (auto& v : t.data) v = normal(rng);
    return t;
}

Tensor vec(int n, double fill) { return Tensor(1, n, 1, 1, fill); }

}  // namespace

std::size_t DcmNetwork::add_param(const std::string& name, Tensor value) {
    params_.push_back({name, std::move(value)});
    return params_.size() - 1;
}

DcmNetwork::DcmNetwork(const DcmConfig& config) : config_(config) {
    if (config.encoder_channels < 1 || config.trunk_channels < 1 || config.residual_blocks < 0)
        throw ValidationError("DcmConfig: channel counts must be positive");
    std::mt19937_64 rng(config.seed);
    const int c1 = config.encoder_channels;
    const int c2 = config.trunk_channels;
    auto conv_layer = [&](const std::string& name, int cout, int cin, int k) {
        ConvIds ids{};
        ids.weight = add_param(name + ".weight", kaiming(cout, cin, k, cin * k * k, rng));
        ids.gamma = add_param(name + ".norm.weight", vec(cout, 1.0));
        ids.beta = add_param(name + ".norm.bias", vec(cout, 0.0));
        return ids;
    };
    enc1_ = conv_layer("enc1", c1, 2, 3);
    enc2_ = conv_layer("enc2", c2, c1, 3);
    for (int b = 0; b < config.residual_blocks; ++b) {
        const std::string base = "res" + std::to_string(b);
        auto a = conv_layer(base + ".conv1", c2, c2, 3);
        auto bb = conv_layer(base + ".conv2", c2, c2, 3);
        blocks_.emplace_back(a, bb);
    }
    // Transposed conv weights are [Cin, Cout, k, k].
    dec1_.weight = add_param("dec1.weight", kaiming(2 * c2, c1, 4, 2 * c2 * 4, rng));
    dec1_.gamma = add_param("dec1.norm.weight", vec(c1, 1.0));
    dec1_.beta = add_param("dec1.norm.bias", vec(c1, 0.0));
    Tensor final_w = kaiming(2 * c1, 1, 4, 2 * c1 * 4, rng);
    for (auto& v : final_w.data) v *= config.final_layer_scale;
    dec2_weight_ = add_param("dec2.weight", std::move(final_w));
    dec2_bias_ = add_param("dec2.bias", vec(1, 0.0));
}

std::size_t DcmNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

Gradients DcmNetwork::zero_gradients() const {
    Gradients g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.value.n(), p.value.c(), p.value.h(), p.value.w());
    return g;
}

Tensor DcmNetwork::forward(const Tensor& input, ForwardCache* cache) const {
    if (input.c() != 2) throw DimensionError("DCM input must have 2 channels, got " + input.shape_string());
    if (input.h() % 4 != 0 || input.w() % 4 != 0 || input.h() == 0 || input.w() == 0)
        throw DimensionError("DCM input resolution must be a positive multiple of 4, got " + input.shape_string());

    ForwardCache local;
    ForwardCache& c = cache != nullptr ? *cache : local;
    auto p = [&](std::size_t i) -> const Tensor& { return params_[i].value; };
    auto norm_layer = [&](ForwardCache::NormLayer& layer, Tensor pre, const ConvIds& ids) {
        layer.pre = std::move(pre);
        layer.post = ops::instance_norm(layer.pre, p(ids.gamma), p(ids.beta), &layer.norm);
    };

    c.input = input;
    norm_layer(c.enc1, ops::conv2d(input, p(enc1_.weight), kNoBias, kDown), enc1_);
    c.h1 = ops::silu(c.enc1.post);
    norm_layer(c.enc2, ops::conv2d(c.h1, p(enc2_.weight), kNoBias, kDown), enc2_);
    c.h2 = ops::silu(c.enc2.post);

    Tensor t = c.h2;
    c.blocks.assign(blocks_.size(), {});
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        auto& blk = c.blocks[b];
        const auto& [ia, ib] = blocks_[b];
        blk.in = t;
        norm_layer(blk.a, ops::conv2d(t, p(ia.weight), kNoBias, kSame), ia);
        blk.mid = ops::silu(blk.a.post);
        norm_layer(blk.b, ops::conv2d(blk.mid, p(ib.weight), kNoBias, kSame), ib);
        t = ops::add(t, blk.b.post);
    }
    c.trunk = t;
    c.dec1_in = ops::concat_channels(c.trunk, c.enc2.pre);
    norm_layer(c.dec1, ops::conv_transpose2d(c.dec1_in, p(dec1_.weight), kNoBias, kUp), dec1_);
    c.dh1 = ops::silu(c.dec1.post);
    c.dec2_in = ops::concat_channels(c.dh1, c.enc1.pre);
    c.output = ops::tanh(ops::conv_transpose2d(c.dec2_in, p(dec2_weight_), p(dec2_bias_), kUp));
    return c.output;
}

Tensor DcmNetwork::backward(const ForwardCache& c, const Tensor& grad_output, Gradients& grads) const {
    auto p = [&](std::size_t i) -> const Tensor& { return params_[i].value; };
    auto norm_back = [&](const ForwardCache::NormLayer& layer, const Tensor& g_post, const ConvIds& ids) {
        return ops::instance_norm_backward(layer.norm, p(ids.gamma), g_post, grads[ids.gamma], grads[ids.beta]);
    };

    const int c1 = config_.encoder_channels;
    const int c2 = config_.trunk_channels;
    Tensor no_bias;

    Tensor g = ops::tanh_backward(c.output, grad_output);
    g = ops::conv_transpose2d_backward(c.dec2_in, p(dec2_weight_), g, kUp, grads[dec2_weight_], grads[dec2_bias_]);
    Tensor g_dh1, g_skip1;
    ops::split_channels(g, c1, g_dh1, g_skip1);

    g = norm_back(c.dec1, ops::silu_backward(c.dec1.post, g_dh1), dec1_);
    g = ops::conv_transpose2d_backward(c.dec1_in, p(dec1_.weight), g, kUp, grads[dec1_.weight], no_bias);
    Tensor g_trunk, g_skip2;
    ops::split_channels(g, c2, g_trunk, g_skip2);

    for (std::size_t bi = blocks_.size(); bi-- > 0;) {
        const auto& blk = c.blocks[bi];
        const auto& [ia, ib] = blocks_[bi];
        Tensor gb = norm_back(blk.b, g_trunk, ib);
        gb = ops::conv2d_backward(blk.mid, p(ib.weight), gb, kSame, grads[ib.weight], no_bias);
        gb = norm_back(blk.a, ops::silu_backward(blk.a.post, gb), ia);
        gb = ops::conv2d_backward(blk.in, p(ia.weight), gb, kSame, grads[ia.weight], no_bias);
        g_trunk = ops::add(g_trunk, gb);
    }

    // enc2: gradient reaches its pre-norm output from the skip and through norm + SiLU from the trunk.
    Tensor g_pre2 = ops::add(norm_back(c.enc2, ops::silu_backward(c.enc2.post, g_trunk), enc2_), g_skip2);
    Tensor g_h1 = ops::conv2d_backward(c.h1, p(enc2_.weight), g_pre2, kDown, grads[enc2_.weight], no_bias);
    Tensor g_pre1 = ops::add(norm_back(c.enc1, ops::silu_backward(c.enc1.post, g_h1), enc1_), g_skip1);
    return ops::conv2d_backward(c.input, p(enc1_.weight), g_pre1, kDown, grads[enc1_.weight], no_bias);
}

TensorContainer DcmNetwork::to_container() const {
    TensorContainer out;
    out.magic = kCheckpointMagic;
    for (const auto& prm : params_) {
        NamedArray a;
        a.name = prm.name;
        const auto& s = prm.value.shape;
        // Vectors are stored with rank 1, kernels with rank 4.
        if (s[0] == 1 && s[2] == 1 && s[3] == 1)
            a.dims = {std::uint32_t(s[1])};
        else
            a.dims = {std::uint32_t(s[0]), std::uint32_t(s[1]), std::uint32_t(s[2]), std::uint32_t(s[3])};
        a.data.assign(prm.value.data.begin(), prm.value.data.end());
        out.arrays.push_back(std::move(a));
    }
    return out;
}

DcmNetwork DcmNetwork::from_container(const TensorContainer& container) {
    if (container.magic != kCheckpointMagic) throw FormatError("checkpoint version mismatch: expected DCM1");
    const NamedArray* e1 = container.find("enc1.weight");
    const NamedArray* e2 = container.find("enc2.weight");
    if (e1 == nullptr || e2 == nullptr || e1->dims.size() != 4 || e2->dims.size() != 4)
        throw FormatError("checkpoint is missing encoder weights");
    DcmConfig cfg;
    cfg.encoder_channels = int(e1->dims[0]);
    cfg.trunk_channels = int(e2->dims[0]);
    cfg.residual_blocks = 0;
    while (container.find("res" + std::to_string(cfg.residual_blocks) + ".conv1.weight") != nullptr)
        ++cfg.residual_blocks;
    DcmNetwork net(cfg);
    if (container.arrays.size() != net.params_.size())
        throw FormatError("checkpoint holds " + std::to_string(container.arrays.size()) + " arrays, expected " +
                          std::to_string(net.params_.size()));
    for (auto& prm : net.params_) {
        const NamedArray* a = container.find(prm.name);
        if (a == nullptr) throw FormatError("checkpoint is missing array '" + prm.name + "'");
        if (a->data.size() != prm.value.size())
            throw FormatError("checkpoint array '" + prm.name + "' has the wrong element count");
        std::copy(a->data.begin(), a->data.end(), prm.value.data.begin());
    }
    return net;
}

bool operator==(const DcmNetwork& a, const DcmNetwork& b) {
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
        if (a.params_[i].name != b.params_[i].name || !a.params_[i].value.same_shape(b.params_[i].value) ||
            a.params_[i].value.data != b.params_[i].value.data)
            return false;
    }
    return true;
}

double normalisation_scale(const std::vector<const DepthMap*>& maps) {
    double m = 0.0;
    for (const auto* d : maps)
        for (std::size_t i = 0; i < d->size(); ++i)
            if (d->valid[i]) m = std::max(m, d->values[i]);
    return m > 0.0 ? m : 1.0;
}

Tensor pack_input(const DepthMap& d_next, const DepthMap& d_prev, double sigma) {
    require_same_size(d_next, d_prev, "DCM inputs");
    Tensor x(1, 2, d_next.height, d_next.width);
    const std::size_t plane = d_next.size();
    for (std::size_t i = 0; i < plane; ++i) {
        x.data[i] = d_next.valid[i] ? d_next.values[i] / sigma : 0.0;
        x.data[plane + i] = d_prev.valid[i] ? d_prev.values[i] / sigma : 0.0;
    }
    return x;
}

DcmResidual dcm_forward(const DcmNetwork& net, const DepthMap& d_next, const DepthMap& d_prev, double sigma) {
    require_same_size(d_next, d_prev, "dcm_forward");
    if (!(sigma > 0.0)) sigma = normalisation_scale({&d_next, &d_prev});
    const Tensor out = net.forward(pack_input(d_next, d_prev, sigma));
    DcmResidual r;
    r.sigma = sigma;
    r.width = d_next.width;
    r.height = d_next.height;
    r.values.resize(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) r.values[i] = sigma * out.data[i];
    return r;
}

DepthMap apply_residual(const DepthMap& d_next, const DepthMap& d_prev, const std::vector<double>& residual) {
    require_same_size(d_next, d_prev, "apply_residual");
    if (residual.size() != d_prev.size()) throw DimensionError("apply_residual: residual size mismatch");
    DepthMap out(d_prev.width, d_prev.height);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = d_prev.values[i] + residual[i];
        out.values[i] = v;
        out.valid[i] = d_prev.valid[i] && d_next.valid[i] && v > 0.0 && std::isfinite(v);
        if (!out.valid[i]) out.values[i] = 0.0;
    }
    return out;
}

DepthMap apply_dcm(const DcmNetwork& net, const DepthMap& d_next, const DepthMap& d_prev, double sigma) {
    const auto r = dcm_forward(net, d_next, d_prev, sigma);
    return apply_residual(d_next, d_prev, r.values);
}

}  // namespace pw::dcm
