#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pw/dcm/tensor.hpp"
#include "pw/tensor_container.hpp"

namespace pw::semantic {

using Matrix = Eigen::MatrixXd;
using dcm::Tensor;

struct AttentionResult {
    Matrix features;  // attn * v
    Matrix attn;      // row-stochastic, queries x keys
};

/// attn = row_softmax(q k^T / sqrt(d)), features = attn v. q: N x d, k: M x d, v: M x dv.
AttentionResult self_attention(const Matrix& q, const Matrix& k, const Matrix& v, int d);

/// Stand-in for a text embedding: tokens x dim.
struct ConditioningVector {
    Matrix tokens;

    void validate() const;
};

inline constexpr int kLatentChannels = 4;
inline constexpr int kLatentSize = 16;
inline constexpr int kConditioningTokens = 4;
inline constexpr int kConditioningDim = 8;

/// 1 x 4 x 16 x 16 standard normal latent.
Tensor random_latent(std::uint64_t seed);
ConditioningVector random_conditioning(std::uint64_t seed);

/// One (name, step, value) record of an instrumented forward pass.
struct TraceEntry {
    std::string name;
    int step = 0;
    Matrix value;
};
using ActivationTrace = std::vector<TraceEntry>;

/// Attention maps and the designated residual feature captured at one denoising step.
struct BankStep {
    int timestep = 0;
    std::vector<Matrix> attention;  // one per self-attention layer, in layer order
    Tensor feature;                 // designated block's residual output
};

struct FeatureBank {
    std::vector<std::string> layers;  // self-attention layer names
    std::vector<BankStep> steps;      // in sampling order

    /// Rows stochastic within 1e-6, one map per layer at every step, timesteps equal to the schedule.
    void validate() const;

    TensorContainer to_container() const;
    static FeatureBank from_container(const TensorContainer& container);
    friend bool operator==(const FeatureBank&, const FeatureBank&);
};

inline constexpr char kFeatureBankMagic[] = "FTB1";

void write_feature_bank(const std::filesystem::path& path, const FeatureBank& bank);
FeatureBank read_feature_bank(const std::filesystem::path& path);

/// Descending timesteps of a `steps`-step deterministic sampler over a 1000-step linear-beta schedule.
std::vector<int> sampling_timesteps(int steps);

struct InjectOptions {
    bool attention = true;
    bool feature = true;
    double cutoff = 1.0;  // injection applies to the first ceil(cutoff * steps) steps
};

struct UNetConfig {
    std::uint64_t seed = 0;
    int base_channels = 16;
    int time_dim = 32;
    int feature_block = 1;  // index of the upsampling block whose residual output is f_t
};

/// Two downsampling blocks, a bottleneck and two upsampling blocks over a 4 x 16 x 16 latent. Each
/// block is a residual conv block, single-head self-attention and cross-attention on the conditioning.
class ToyUNet {
public:
    explicit ToyUNet(const UNetConfig& config = {});

    const UNetConfig& config() const { return config_; }
    std::vector<std::string> attention_layers() const;
    std::string feature_layer() const;

    /// Hooks for one forward pass. Null members leave the computation untouched.
    struct Hooks {
        const std::vector<Matrix>* inject_attention = nullptr;
        const Tensor* inject_feature = nullptr;
        std::vector<Matrix>* record_attention = nullptr;
        Tensor* record_feature = nullptr;
        ActivationTrace* trace = nullptr;
        int step = 0;
    };

    /// Predicted noise for x_t at timestep t.
    Tensor forward(const Tensor& x, const ConditioningVector& c, int timestep, const Hooks& hooks) const;
    Tensor forward(const Tensor& x, const ConditioningVector& c, int timestep) const;

    struct Conv {
        Tensor weight, bias;
    };
    struct Block {
        std::string name;
        int cin = 0, cout = 0;
        Conv conv1, conv2, skip;
        Matrix time_proj;  // cout x time_dim
        Matrix sq, sk, sv, so;
        Matrix cq, ck, cv, co;
    };

private:
    Tensor run_block(const Block& b, const Tensor& x, const Matrix& temb, const ConditioningVector& c,
                     std::size_t attn_index, const Hooks& hooks, bool designated) const;

    UNetConfig config_;
    Conv in_conv_, out_conv_;
    std::vector<Block> blocks_;  // down0, down1, mid, up0, up1
};

struct RecordResult {
    Tensor x0;
    FeatureBank bank;
};

/// Deterministic sampling (eta = 0) from x_T. Recording does not alter the run.
Tensor denoise(const ToyUNet& net, const Tensor& x_T, const ConditioningVector& c, int steps,
               ActivationTrace* trace = nullptr);
RecordResult denoise_record(const ToyUNet& net, const Tensor& x_T, const ConditioningVector& c, int steps,
                            ActivationTrace* trace = nullptr);

/// Sampling with the bank's attention maps and designated feature substituted at each step. Throws
/// ValidationError when `steps` or the layer list disagrees with the bank, DimensionError on shape
/// mismatch.
Tensor denoise_inject(const ToyUNet& net, const Tensor& x_T, const ConditioningVector& c, const FeatureBank& bank,
                      int steps, const InjectOptions& options = {}, ActivationTrace* trace = nullptr);

}  // namespace pw::semantic
