#pragma once

// Model assembly (semantic encoder + conditioned UNet + schedule), the
// inference contrast-swap pipeline, and checkpoint save/load.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "harmon/diffusion.hpp"
#include "harmon/disentangle.hpp"

namespace harmon {

struct ModelConfig {
    EncoderConfig encoder;
    UNetConfig unet;
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int sample_steps = 20;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

class HarmonizationModel {
public:
    explicit HarmonizationModel(const ModelConfig& cfg);
    void init(std::uint64_t seed);

    SemanticCode encode(const Slice& slice);
    /// Batched encode; x is (N,1,S,S).
    SemanticEncoder::Output encode_batch(const nn::Tensor& x);

    nn::Tensor predict_noise(const nn::Tensor& x_t, const std::vector<int>& t, const nn::Tensor& z);

    /// (1, cond_dim) condition from a code pair.
    nn::Tensor condition(const std::vector<float>& z_a, const std::vector<float>& z_c) const;

    /// Deterministic DDIM inversion of x0 to its noise map x_T.
    nn::Tensor ddim_invert(const nn::Tensor& x0, const nn::Tensor& z, int n_steps);
    /// Deterministic DDIM sampling from x_T.
    nn::Tensor denoise(const nn::Tensor& x_T, const nn::Tensor& z, int n_steps);

    ModelConfig cfg;
    SemanticEncoder encoder;
    UNet unet;
    DiffusionSchedule schedule;

    void collect(std::vector<nn::Param*>& out);
    void visit(const nn::ParamVisitor& fn);
    void zero_grad();
};

struct TargetContrast {
    std::vector<float> z_c_bar;
    int n_references = 0;
    std::vector<std::string> reference_ids;
};

/// Mean contrast head output over the reference images; anatomy vectors are
/// computed and discarded.
TargetContrast estimate_target_contrast(const std::vector<Slice>& references,
                                        HarmonizationModel& model,
                                        const std::vector<std::string>& reference_ids = {});

struct HarmonizeOptions {
    int n_steps = 20;
    /// When true, invert under the swapped condition instead of the source one.
    bool invert_under_swapped = false;
};

/// Encode source, invert to x_T, decode under (z_a, z_c_bar). Deterministic.
Slice harmonize(const Slice& source, const TargetContrast& target, HarmonizationModel& model,
                const HarmonizeOptions& opts = {});

struct TrainerState {
    long step = 0;
    nn::Adam optimizer;
    std::vector<std::uint64_t> aug_bank_seeds;  // replay log
};

void save_checkpoint(HarmonizationModel& model, const std::filesystem::path& path,
                     const TrainerState* state = nullptr);
std::unique_ptr<HarmonizationModel> load_checkpoint(const std::filesystem::path& path,
                                                    TrainerState* state = nullptr);

}  // namespace harmon
