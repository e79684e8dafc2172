#include "harmon/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "harmon/diffusion.hpp"

namespace harmon {

nlohmann::json TrainConfig::to_json() const {
    return {{"batch_subjects", batch_subjects},
            {"n_augs", n_augs},
            {"lr", lr},
            {"lambda_a", weights.lambda_a},
            {"lambda_c", weights.lambda_c},
            {"tau", weights.tau},
            {"steps", steps},
            {"log_every", log_every},
            {"checkpoint_every", checkpoint_every},
            {"grad_clip", grad_clip},
            {"seed", seed},
            {"aug_upsample_side", aug_upsample_side}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_subjects = j.at("batch_subjects");
    c.n_augs = j.at("n_augs");
    c.lr = j.at("lr");
    c.weights.lambda_a = j.at("lambda_a");
    c.weights.lambda_c = j.at("lambda_c");
    c.weights.tau = j.at("tau");
    c.steps = j.at("steps");
    c.log_every = j.value("log_every", c.log_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.seed = j.at("seed");
    c.aug_upsample_side = j.value("aug_upsample_side", c.aug_upsample_side);
    return c;
}

nlohmann::json StepMetrics::to_json() const {
    return {{"step", step}, {"total", total}, {"ddim", ddim}, {"loss_a", loss_a},
            {"loss_c", loss_c}};
}

double clip_grad_norm(const std::vector<nn::Param*>& params, double max_norm) {
    double sq = 0.0;
    for (const auto* p : params)
        for (float g : p->g) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const float scale = static_cast<float>(max_norm / norm);
        for (auto* p : params)
            for (float& g : p->g) g *= scale;
    }
    return norm;
}

Trainer::Trainer(HarmonizationModel& model, const CohortManifest& data, const TrainConfig& cfg,
                 std::filesystem::path run_dir)
    : model_(model), data_(data), cfg_(cfg), run_dir_(std::move(run_dir)), rng_(cfg.seed) {
    if (cfg_.batch_subjects < 2 || cfg_.n_augs < 2)
        throw InvalidArgument("trainer: need batch_subjects >= 2 and n_augs >= 2");
    if (data_.entries.empty()) throw InvalidArgument("trainer: empty training manifest");
    std::filesystem::create_directories(run_dir_);
    state_.optimizer.lr = static_cast<float>(cfg_.lr);
    for (const auto& e : data_.entries) slices_.push_back(data_.load(e));
    model_.collect(params_);
}

StepMetrics Trainer::step() {
    const int B = cfg_.batch_subjects;
    const int n_augs = cfg_.n_augs;
    const int n_views = B * n_augs;
    const int S = model_.cfg.encoder.image_size;

    // batch subjects and a fresh augmentation bank
    std::vector<int> picks(B);
    for (int i = 0; i < B; ++i)
        picks[i] = static_cast<int>(rng_.next_below(slices_.size()));
    const std::uint64_t bank_seed = rng_.fork_seed();
    state_.aug_bank_seeds.push_back(bank_seed);
    const AugBank bank = sample_aug_bank(n_augs, bank_seed, cfg_.aug_upsample_side);

    nn::Tensor x0(n_views, 1, S, S);
    for (int b = 0; b < B; ++b) {
        const Slice& base = slices_[picks[b]];
        for (int a = 0; a < n_augs; ++a) {
            const Slice view = compose_view(base, bank.specs[a]);
            const nn::Tensor vt = slice_to_tensor(view);
            std::copy(vt.v.begin(), vt.v.end(), x0.sample(b * n_augs + a));
        }
    }

    // encode, condition, noise, predict
    SemanticEncoder::Output codes = model_.encode_batch(x0);
    const nn::Tensor z = nn::concat_channels(codes.z_a, codes.z_c);

    std::vector<int> t(n_views);
    for (auto& ti : t) ti = 1 + static_cast<int>(rng_.next_below(model_.schedule.T));
    nn::Tensor eps(n_views, 1, S, S);
    for (auto& v : eps.v) v = static_cast<float>(rng_.normal());
    const nn::Tensor x_t = q_sample(x0, t, eps, model_.schedule);
    const nn::Tensor eps_hat = model_.unet.forward(x_t, t, z);

    nn::Tensor deps(n_views, 1, S, S);
    const std::vector<double> ddim_losses = ddim_mse_loss_with_grad(eps_hat, eps, deps);

    // backward: UNet -> condition gradient, plus contrastive gradients
    model_.zero_grad();
    const nn::Tensor dz = model_.unet.backward(deps);
    nn::Tensor dz_a(n_views, model_.cfg.encoder.d_a, 1, 1);
    nn::Tensor dz_c(n_views, model_.cfg.encoder.d_c, 1, 1);
    nn::split_channels(dz, model_.cfg.encoder.d_a, dz_a, dz_c);
    const TotalLossResult loss = total_loss_with_grad(B, n_augs, codes.z_a, codes.z_c,
                                                      ddim_losses, cfg_.weights, dz_a, dz_c);
    model_.encoder.backward(dz_a, dz_c);

    if (!std::isfinite(loss.total)) {
        nlohmann::json diag = {{"step", state_.step},
                               {"bank_seed", bank_seed},
                               {"subject_picks", picks},
                               {"ddim", loss.ddim},
                               {"loss_a", loss.loss_a},
                               {"loss_c", loss.loss_c}};
        std::ofstream(run_dir_ / "divergence.json") << diag.dump(2) << '\n';
        throw std::runtime_error("trainer: non-finite loss at step " +
                                 std::to_string(state_.step) + "; see divergence.json");
    }

    clip_grad_norm(params_, cfg_.grad_clip);
    state_.optimizer.update(params_);
    state_.step += 1;

    StepMetrics m;
    m.step = state_.step;
    m.total = loss.total;
    m.ddim = loss.ddim;
    m.loss_a = loss.loss_a;
    m.loss_c = loss.loss_c;
    history_.push_back(m);
    return m;
}

void Trainer::write_metrics(const StepMetrics& m) {
    std::ofstream f(run_dir_ / "metrics.jsonl", std::ios::app);
    f << m.to_json().dump() << '\n';
}

StepMetrics Trainer::run() {
    StepMetrics last;
    while (state_.step < cfg_.steps) {
        last = step();
        if (cfg_.log_every > 0 && last.step % cfg_.log_every == 0) write_metrics(last);
        if (cfg_.checkpoint_every > 0 && last.step % cfg_.checkpoint_every == 0)
            save_checkpoint(model_, run_dir_ / "checkpoint.bin", &state_);
    }
    save_checkpoint(model_, run_dir_ / "checkpoint.bin", &state_);
    if (cfg_.log_every <= 0 || last.step % cfg_.log_every != 0) write_metrics(last);
    return last;
}

}  // namespace harmon
