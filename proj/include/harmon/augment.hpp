#pragma once

// Anatomy-preserving contrast augmentations: gamma, synthetic bias fields and
// random-convolution (GIN) intensity remapping, applied at upsampled resolution
// and alpha-blended with the original view.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "harmon/core.hpp"

namespace harmon {

enum class AugKind { gamma, bias, gin };

struct GammaParams {
    double u = 0.0;  // gamma = e^u, u in [0, 0.5]
};

struct BiasParams {
    std::vector<double> coefficients;  // cosine-expansion weights, normalized to max|g|=1
    double strength = 0.0;             // [0, 0.5]
};

struct GinParams {
    std::uint64_t weight_seed = 0;
    double alpha = 1.0;  // blend factor when applied standalone
};

struct AugPrimitive {
    AugKind kind = AugKind::gamma;
    GammaParams gamma;
    BiasParams bias;
    GinParams gin;
};

/// One serializable contrast transform: an ordered primitive chain applied at
/// upsampled resolution, followed by renormalization and alpha-blending.
struct AugSpec {
    std::vector<AugPrimitive> chain;
    double alpha = 1.0;
    int upsample_side = 512;

    nlohmann::json to_json() const;
    static AugSpec from_json(const nlohmann::json& j);
};

struct AugBank {
    std::vector<AugSpec> specs;
    std::uint64_t bank_seed = 0;

    nlohmann::json to_json() const;
    static AugBank from_json(const nlohmann::json& j);
};

struct GinNetworkConfig {
    int hidden_layers = 2;
    int hidden_channels = 2;
    int kernel_size = 3;
    int upsample_target = 512;
};

/// p -> p^(e^u) on the in-mask [0,1] scale; out-of-mask pixels unchanged.
Slice gamma_augment(const Slice& slice, double u);

/// Multiply in-mask [0,1]-scale pixels by 1 + strength * g(x,y), g a smooth
/// cosine expansion normalized to max |g| = 1.
Slice bias_field_augment(const Slice& slice, const BiasParams& spec);

/// Upsample, pass through a seeded random shallow conv net, downsample,
/// renormalize in-mask, then blend alpha*augmented + (1-alpha)*original.
Slice gin_augment(const Slice& slice, const GinNetworkConfig& config, std::uint64_t weight_seed,
                  double alpha);

/// Full view pipeline: upsample -> primitive chain -> downsample ->
/// renormalize to [-1,1] in mask -> alpha-blend with the original.
Slice compose_view(const Slice& slice, const AugSpec& spec);

/// n_augs composed specs with random primitive subsets and parameters;
/// deterministic under bank_seed. n_augs >= 2.
AugBank sample_aug_bank(int n_augs, std::uint64_t bank_seed, int upsample_side = 512);

}  // namespace harmon
