#pragma once

// Anatomy/contrast pair-set construction over view batches, the supervised
// contrastive loss with analytic gradients, and the semantic encoder with its
// two linear heads.

#include <vector>

#include "harmon/core.hpp"
#include "harmon/nn.hpp"

namespace harmon {

/// Index sets over the flat view indices of one batch. Flat index i maps to
/// subject i / n_augs and augmentation i % n_augs.
struct PairSets {
    std::vector<int> P_a;  // same subject, different augmentation
    std::vector<int> N_a;  // different subject, same augmentation
    std::vector<int> P_c;  // same augmentation, different subject
    std::vector<int> N_c;  // same subject, different augmentation
};

PairSets pair_sets(int flat_index, int B, int n_augs);

struct LossWeights {
    double lambda_a = 0.5;
    double lambda_c = 0.5;
    double tau = 0.1;
};

/// Eq.-style supervised contrastive loss for one anchor:
/// -log( sum_{k in pos} e^{sim/tau} / sum_{k in pos+neg} e^{sim/tau} ),
/// sim = cosine similarity. codes is (N, d). Nonnegative, finite.
double contrastive_loss(int anchor, const std::vector<int>& pos, const std::vector<int>& neg,
                        const nn::Tensor& codes, double tau);

/// Same value, and accumulates scale * dLoss/dcodes into grads (same shape).
double contrastive_loss_with_grad(int anchor, const std::vector<int>& pos,
                                  const std::vector<int>& neg, const nn::Tensor& codes, double tau,
                                  double scale, nn::Tensor& grads);

struct TotalLossResult {
    double total = 0.0;
    double ddim = 0.0;    // mean DDIM term
    double loss_a = 0.0;  // mean anatomy contrastive term (unweighted)
    double loss_c = 0.0;  // mean contrast contrastive term (unweighted)
};

/// Mean over views of ddim + lambda_c*l(z_c, P_c, N_c) + lambda_a*l(z_a, P_a, N_a).
TotalLossResult total_loss(int B, int n_augs, const nn::Tensor& z_a, const nn::Tensor& z_c,
                           const std::vector<double>& ddim_losses, const LossWeights& weights);

/// As total_loss, also accumulating gradients w.r.t. z_a and z_c (the DDIM term
/// contributes no gradient here; its gradient flows through the UNet).
TotalLossResult total_loss_with_grad(int B, int n_augs, const nn::Tensor& z_a,
                                     const nn::Tensor& z_c, const std::vector<double>& ddim_losses,
                                     const LossWeights& weights, nn::Tensor& dz_a,
                                     nn::Tensor& dz_c);

// ---- semantic encoder ----

struct EncoderConfig {
    int image_size = 64;
    int base_width = 16;
    int z_sem_dim = 512;
    int d_a = 256;
    int d_c = 256;
};

struct SemanticCode {
    std::vector<float> z_a;
    std::vector<float> z_c;
};

/// Strided conv net (4 downsampling stages, global pooling) producing z_sem,
/// split by two linear heads into (z_a, z_c).
class SemanticEncoder {
public:
    explicit SemanticEncoder(const EncoderConfig& cfg);
    void init(Rng& rng);

    struct Output {
        nn::Tensor z_sem;  // (N, z_sem_dim)
        nn::Tensor z_a;    // (N, d_a)
        nn::Tensor z_c;    // (N, d_c)
    };
    /// x: (N,1,S,S) in symmetric range with out-of-mask pixels at -1.
    Output forward(const nn::Tensor& x);
    /// Accumulates parameter gradients from head-output gradients.
    void backward(const nn::Tensor& dz_a, const nn::Tensor& dz_c);

    void visit(const std::string& prefix, const nn::ParamVisitor& fn);
    void collect(std::vector<nn::Param*>& out);
    void zero_grad();

    const EncoderConfig& config() const { return cfg_; }

private:
    EncoderConfig cfg_;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::GroupNorm> norms_;
    std::vector<nn::SiLU> acts_;
    nn::GlobalAvgPool pool_;
    nn::Linear to_sem_;
    nn::Linear head_a_;
    nn::Linear head_c_;
};

/// Convert a slice to the (1,1,S,S) encoder input tensor (masked background).
nn::Tensor slice_to_tensor(const Slice& s);

}  // namespace harmon
