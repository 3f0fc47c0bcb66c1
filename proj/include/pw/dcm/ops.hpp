#pragma once

#include <vector>

#include "pw/dcm/tensor.hpp"

namespace pw::dcm::ops {

// Forward/backward pairs for the handful of layers the DCM uses. Backward functions accumulate
// (+=) into parameter gradients and return the gradient with respect to the layer input.

struct ConvSpec {
    int kernel = 3;
    int stride = 1;
    int pad = 1;
};

/// weight: [Cout, Cin, k, k], bias: [Cout] (stored as 1 x Cout x 1 x 1) or empty for no bias.
/// An empty grad_bias skips the bias gradient.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvSpec spec);
Tensor conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvSpec spec,
                       Tensor& grad_weight, Tensor& grad_bias);

/// Transposed convolution (adjoint of conv2d in its input). weight: [Cin, Cout, k, k].
/// Output size (in - 1) * stride - 2 * pad + kernel.
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvSpec spec);
Tensor conv_transpose2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out, ConvSpec spec,
                                 Tensor& grad_weight, Tensor& grad_bias);

inline constexpr double kInstanceNormEpsilon = 1e-8;

struct InstanceNormCache {
    Tensor normalized;            // pre-affine x_hat
    std::vector<double> inv_std;  // per (sample, channel)
};

/// Per (sample, channel) normalisation followed by a per-channel affine (gamma, beta: [C]).
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, InstanceNormCache* cache);
Tensor instance_norm_backward(const InstanceNormCache& cache, const Tensor& gamma, const Tensor& grad_out,
                              Tensor& grad_gamma, Tensor& grad_beta);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

/// x * sigmoid(x).
Tensor silu(const Tensor& x);
Tensor silu_backward(const Tensor& x, const Tensor& grad_out);

Tensor tanh(const Tensor& x);
/// Uses the forward output y: d tanh = 1 - y^2.
Tensor tanh_backward(const Tensor& y, const Tensor& grad_out);

Tensor add(const Tensor& a, const Tensor& b);

/// Channel concatenation [a | b].
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits a gradient of concat_channels back into its parts.
void split_channels(const Tensor& grad, int channels_a, Tensor& grad_a, Tensor& grad_b);

}  // namespace pw::dcm::ops
