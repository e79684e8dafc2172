#pragma once

// Conditional DDIM: noise schedule, forward noising, the conditioned noise
// prediction UNet, deterministic sampling and inversion.

#include <optional>
#include <vector>

#include "harmon/core.hpp"
#include "harmon/nn.hpp"

namespace harmon {

struct DiffusionSchedule {
    int T = 1000;
    std::vector<double> alpha_bar;  // length T+1, alpha_bar[0] = 1, strictly decreasing

    static DiffusionSchedule linear_beta(int T = 1000, double beta_start = 1e-4,
                                         double beta_end = 0.02);
    /// Strided time grid for sampling: n_steps+1 values from T down to 0.
    std::vector<int> sampling_times(int n_steps) const;
    void validate() const;
};

/// sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps, per-sample t.
nn::Tensor q_sample(const nn::Tensor& x0, const std::vector<int>& t, const nn::Tensor& eps,
                    const DiffusionSchedule& schedule);

/// Deterministic DDIM update (eta = 0) from t to t_prev given predicted noise.
nn::Tensor ddim_step(const nn::Tensor& x_t, const nn::Tensor& eps_hat, int t, int t_prev,
                     const DiffusionSchedule& schedule);

double ddim_mse_loss(const nn::Tensor& eps_hat, const nn::Tensor& eps);
/// Per-sample MSE plus d(mean-over-batch MSE)/d eps_hat.
std::vector<double> ddim_mse_loss_with_grad(const nn::Tensor& eps_hat, const nn::Tensor& eps,
                                            nn::Tensor& deps_hat);

// ---- conditioned UNet ----

struct UNetConfig {
    int image_size = 64;
    std::vector<int> widths = {16, 32, 64};  // one per resolution
    int cond_dim = 512;                      // |z_a| + |z_c|
    int emb_dim = 128;
    int time_dim = 64;
};

/// Residual block with per-channel scale-and-shift modulation from the shared
/// (time + condition) embedding.
struct ResBlock {
    int cin, cout;
    nn::GroupNorm gn1;
    nn::SiLU a1;
    nn::Conv2d conv1;
    nn::Linear emb_lin;  // emb_dim -> 2*cout (scale, shift)
    nn::GroupNorm gn2;
    nn::SiLU a2;
    nn::Conv2d conv2;
    std::optional<nn::Conv2d> skip;  // 1x1 when cin != cout

    nn::Tensor g_cache;   // normalized pre-FiLM activation
    nn::Tensor sb_cache;  // (N, 2*cout)

    ResBlock(int cin_, int cout_, int emb_dim);
    void init(Rng& rng);
    nn::Tensor forward(const nn::Tensor& x, const nn::Tensor& emb);
    nn::Tensor backward(const nn::Tensor& dy, nn::Tensor& demb_accum);
    void visit(const std::string& prefix, const nn::ParamVisitor& fn);
};

class UNet {
public:
    explicit UNet(const UNetConfig& cfg);
    void init(Rng& rng);

    /// x: (N,1,S,S); t: per-sample timestep; z: (N, cond_dim). Returns eps_hat.
    nn::Tensor forward(const nn::Tensor& x, const std::vector<int>& t, const nn::Tensor& z);
    /// Backward from d eps_hat; returns gradient w.r.t. the condition z.
    nn::Tensor backward(const nn::Tensor& deps);

    void visit(const std::string& prefix, const nn::ParamVisitor& fn);
    void collect(std::vector<nn::Param*>& out);
    void zero_grad();
    const UNetConfig& config() const { return cfg_; }

private:
    UNetConfig cfg_;
    nn::Conv2d stem_;
    ResBlock enc0_, enc1_, enc2_;
    nn::Conv2d down0_, down1_;
    ResBlock mid_;
    ResBlock dec2_, dec1_, dec0_;
    nn::Upsample2x up1_, up0_;
    nn::GroupNorm out_norm_;
    nn::SiLU out_act_;
    nn::Conv2d out_conv_;
    nn::Linear t_mlp1_, t_mlp2_;
    nn::SiLU t_act_;
    nn::Linear z_proj_;
    nn::Tensor s0_, s1_, s2_;  // skip-connection caches from the last forward
    int cached_n_ = 0;
};

}  // namespace harmon
