#pragma once

// Training loop: per-step view batches (B subjects x N augmentations), joint
// denoising + contrastive objective, Adam updates, metrics log, checkpoints.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "harmon/augment.hpp"
#include "harmon/harmonize.hpp"
#include "harmon/phantom.hpp"

namespace harmon {

struct TrainConfig {
    int batch_subjects = 9;  // B
    int n_augs = 9;
    double lr = 1e-4;
    LossWeights weights;  // lambda_a = lambda_c = 0.5, tau = 0.1
    long steps = 1000;
    long log_every = 10;
    long checkpoint_every = 500;
    double grad_clip = 1.0;  // global-norm clip; <= 0 disables
    std::uint64_t seed = 0;
    int aug_upsample_side = 512;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct StepMetrics {
    long step = 0;
    double total = 0.0;
    double ddim = 0.0;
    double loss_a = 0.0;
    double loss_c = 0.0;

    nlohmann::json to_json() const;
};

/// Owns the optimization loop over a fixed cohort of training slices. The
/// augmentation bank is resampled every step; bank seeds are recorded in the
/// trainer state so any batch can be replayed.
class Trainer {
public:
    Trainer(HarmonizationModel& model, const CohortManifest& data, const TrainConfig& cfg,
            std::filesystem::path run_dir);

    /// One optimization step. Throws std::runtime_error on non-finite loss,
    /// after dumping diagnostics to the run directory.
    StepMetrics step();

    /// Runs until cfg.steps, logging and checkpointing. Returns last metrics.
    StepMetrics run();

    TrainerState& state() { return state_; }
    const std::vector<StepMetrics>& history() const { return history_; }

private:
    HarmonizationModel& model_;
    const CohortManifest& data_;
    TrainConfig cfg_;
    std::filesystem::path run_dir_;
    TrainerState state_;
    Rng rng_;
    std::vector<Slice> slices_;  // preloaded training slices, manifest order
    std::vector<nn::Param*> params_;
    std::vector<StepMetrics> history_;

    void write_metrics(const StepMetrics& m);
};

/// Global gradient-norm clipping; returns the pre-clip norm.
double clip_grad_norm(const std::vector<nn::Param*>& params, double max_norm);

}  // namespace harmon
