#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pw/dcm/ops.hpp"
#include "pw/dcm/tensor.hpp"
#include "pw/image.hpp"
#include "pw/tensor_container.hpp"

namespace pw::dcm {

struct DcmConfig {
    int encoder_channels = 8;     // after the first strided conv
    int trunk_channels = 16;      // after the second strided conv and through the residual trunk
    int residual_blocks = 5;
    std::uint64_t seed = 0;
    double final_layer_scale = 0.0;  // multiplier on the Kaiming init of the last layer; 0 = zero init
};

/// Intermediate activations of one forward pass, consumed by DcmNetwork::backward.
struct ForwardCache {
    struct NormLayer {
        Tensor pre;    // convolution output (before normalisation)
        ops::InstanceNormCache norm;
        Tensor post;   // after normalisation (activation input)
    };
    Tensor input;
    NormLayer enc1, enc2;
    Tensor h1, h2;
    struct Block {
        Tensor in;
        NormLayer a, b;
        Tensor mid;    // SiLU(a.post)
    };
    std::vector<Block> blocks;
    Tensor trunk;
    Tensor dec1_in;
    NormLayer dec1;
    Tensor dh1;
    Tensor dec2_in;
    Tensor output;  // tanh output
};

/// Encoder (two stride-2 convs) -> residual trunk -> decoder (two stride-2 transposed convs) -> tanh.
/// Instance norm and SiLU follow every layer but the last. Decoder layers receive the matching encoder
/// convolution output through a skip connection taken before its normalisation.
/// Input: N x 2 x H x W (next depth, previous depth), H and W multiples of 4. Output: N x 1 x H x W in [-1, 1].
class DcmNetwork {
public:
    explicit DcmNetwork(const DcmConfig& config = {});

    const DcmConfig& config() const { return config_; }
    std::vector<Parameter>& parameters() { return params_; }
    const std::vector<Parameter>& parameters() const { return params_; }
    std::size_t parameter_count() const;

    Gradients zero_gradients() const;

    Tensor forward(const Tensor& input, ForwardCache* cache = nullptr) const;
    /// Accumulates parameter gradients into `grads` and returns d loss / d input.
    Tensor backward(const ForwardCache& cache, const Tensor& grad_output, Gradients& grads) const;

    TensorContainer to_container() const;
    /// Rebuilds a network whose architecture is inferred from the stored shapes.
    static DcmNetwork from_container(const TensorContainer& container);

    friend bool operator==(const DcmNetwork& a, const DcmNetwork& b);

private:
    std::size_t add_param(const std::string& name, Tensor value);

    DcmConfig config_;
    std::vector<Parameter> params_;
    struct ConvIds {
        std::size_t weight, gamma, beta;
    };
    ConvIds enc1_{}, enc2_{}, dec1_{};
    std::vector<std::pair<ConvIds, ConvIds>> blocks_;
    std::size_t dec2_weight_ = 0, dec2_bias_ = 0;
};

inline constexpr char kCheckpointMagic[] = "DCM1";

/// DCM residual in metres: sigma * tanh(...), where sigma is the normalisation scale (max valid
/// depth over both inputs unless given).
struct DcmResidual {
    std::vector<double> values;
    double sigma = 1.0;
    int width = 0;
    int height = 0;
};

DcmResidual dcm_forward(const DcmNetwork& net, const DepthMap& d_next, const DepthMap& d_prev, double sigma = 0.0);

/// d_prev + residual; invalid where either input is invalid or the sum is not positive.
DepthMap apply_residual(const DepthMap& d_next, const DepthMap& d_prev, const std::vector<double>& residual);

/// Depth update: d_prev + DCM(d_next, d_prev). d_prev must already be in d_next's pixel grid.
DepthMap apply_dcm(const DcmNetwork& net, const DepthMap& d_next, const DepthMap& d_prev, double sigma = 0.0);

/// Packs two depth maps into a 1 x 2 x H x W input divided by `sigma`; invalid pixels become 0.
Tensor pack_input(const DepthMap& d_next, const DepthMap& d_prev, double sigma);

/// Max valid depth across the given maps (1 if none are valid).
double normalisation_scale(const std::vector<const DepthMap*>& maps);

}  // namespace pw::dcm
