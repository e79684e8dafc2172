#include "harmon/augment.hpp"

#include <algorithm>
#include <cmath>

#include "harmon/nn.hpp"

namespace harmon {

namespace {

// cosine basis modes shared by all bias specs
constexpr int kBiasModes[6][2] = {{0, 1}, {1, 0}, {1, 1}, {0, 2}, {2, 0}, {2, 1}};

void require_symmetric(const Slice& s, const char* op) {
    if (s.value_range != ValueRange::symmetric)
        throw InvalidArgument(std::string(op) + ": slice must be in symmetric range");
}

// in-place gamma on the [0,1] scale, in-mask only
void gamma_core(Slice& s, double u) {
    const double g = std::exp(u);
    for (size_t i = 0; i < s.pixels.size(); ++i) {
        if (!s.mask[i]) continue;
        const double p01 = std::clamp((static_cast<double>(s.pixels.v[i]) + 1.0) / 2.0, 0.0, 1.0);
        s.pixels.v[i] = static_cast<float>(2.0 * std::pow(p01, g) - 1.0);
    }
}

Image2D evaluate_bias_field(const BiasParams& spec, int h, int w) {
    Image2D g(h, w, 0.f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = w > 1 ? static_cast<double>(x) / (w - 1) : 0.0;
            const double v = h > 1 ? static_cast<double>(y) / (h - 1) : 0.0;
            double acc = 0.0;
            for (size_t m = 0; m < spec.coefficients.size() && m < 6; ++m)
                acc += spec.coefficients[m] * std::cos(kBiasModes[m][0] * M_PI * u) *
                       std::cos(kBiasModes[m][1] * M_PI * v);
            g.at(y, x) = static_cast<float>(acc);
        }
    double mx = 0.0;
    for (float p : g.v) mx = std::max(mx, static_cast<double>(std::abs(p)));
    if (mx > 0.0)
        for (auto& p : g.v) p = static_cast<float>(p / mx);
    return g;
}

void bias_core(Slice& s, const BiasParams& spec) {
    if (spec.strength < 0.0 || spec.strength > 0.5)
        throw InvalidArgument("bias_field_augment: strength must be in [0, 0.5]");
    const Image2D g = evaluate_bias_field(spec, s.h(), s.w());
    for (size_t i = 0; i < s.pixels.size(); ++i) {
        if (!s.mask[i]) continue;
        const double p01 = (static_cast<double>(s.pixels.v[i]) + 1.0) / 2.0;
        const double f = 1.0 + spec.strength * g.v[i];
        s.pixels.v[i] = static_cast<float>(2.0 * p01 * f - 1.0);
    }
}

// random shallow conv net applied to the full (symmetric-range) image
void gin_core(Slice& s, const GinNetworkConfig& cfg, std::uint64_t weight_seed) {
    Rng rng(weight_seed);
    nn::Tensor x(1, 1, s.h(), s.w());
    std::copy(s.pixels.v.begin(), s.pixels.v.end(), x.v.begin());

    int cin = 1;
    for (int layer = 0; layer <= cfg.hidden_layers; ++layer) {
        const bool last = layer == cfg.hidden_layers;
        const int cout = last ? 1 : cfg.hidden_channels;
        nn::Conv2d conv(cin, cout, cfg.kernel_size);
        conv.init(rng);
        x = conv.forward(x);
        if (!last) {
            nn::LeakyReLU act(0.2f);
            x = act.forward(x);
        }
        cin = cout;
    }
    std::copy(x.v.begin(), x.v.end(), s.pixels.v.begin());
}

Slice upsample_slice(const Slice& s, int side) {
    Slice up;
    up.pixels = resize_bilinear(s.pixels, side, side);
    up.mask = resize_mask_nearest(s.mask, s.h(), s.w(), side, side);
    up.value_range = s.value_range;
    return up;
}

Slice downsample_renorm_blend(const Slice& up, const Slice& original, double alpha) {
    Slice out;
    out.pixels = resize_bilinear(up.pixels, original.h(), original.w());
    out.mask = original.mask;
    out.value_range = ValueRange::raw;
    normalize_symmetric(out);
    for (size_t i = 0; i < out.pixels.size(); ++i) {
        if (original.mask[i])
            out.pixels.v[i] = static_cast<float>(alpha * out.pixels.v[i] +
                                                 (1.0 - alpha) * original.pixels.v[i]);
        else
            out.pixels.v[i] = -1.f;
    }
    return out;
}

}  // namespace

Slice gamma_augment(const Slice& slice, double u) {
    require_symmetric(slice, "gamma_augment");
    if (u < 0.0 || u > 0.5) throw InvalidArgument("gamma_augment: u must be in [0, 0.5]");
    Slice out = slice;
    gamma_core(out, u);
    return out;
}

Slice bias_field_augment(const Slice& slice, const BiasParams& spec) {
    require_symmetric(slice, "bias_field_augment");
    Slice out = slice;
    bias_core(out, spec);
    return out;
}

Slice gin_augment(const Slice& slice, const GinNetworkConfig& config, std::uint64_t weight_seed,
                  double alpha) {
    require_symmetric(slice, "gin_augment");
    Slice up = upsample_slice(slice, config.upsample_target);
    gin_core(up, config, weight_seed);
    return downsample_renorm_blend(up, slice, alpha);
}

Slice compose_view(const Slice& slice, const AugSpec& spec) {
    require_symmetric(slice, "compose_view");
    if (spec.chain.empty()) return slice;
    Slice up = upsample_slice(slice, spec.upsample_side);
    for (const auto& prim : spec.chain) {
        switch (prim.kind) {
            case AugKind::gamma:
                if (prim.gamma.u < 0.0 || prim.gamma.u > 0.5)
                    throw InvalidArgument("compose_view: gamma u out of range");
                gamma_core(up, prim.gamma.u);
                break;
            case AugKind::bias:
                bias_core(up, prim.bias);
                break;
            case AugKind::gin: {
                GinNetworkConfig cfg;
                cfg.upsample_target = spec.upsample_side;
                gin_core(up, cfg, prim.gin.weight_seed);
                break;
            }
        }
    }
    return downsample_renorm_blend(up, slice, spec.alpha);
}

AugBank sample_aug_bank(int n_augs, std::uint64_t bank_seed, int upsample_side) {
    if (n_augs < 2) throw InvalidArgument("sample_aug_bank: need n_augs >= 2");
    Rng rng(bank_seed);
    AugBank bank;
    bank.bank_seed = bank_seed;
    for (int i = 0; i < n_augs; ++i) {
        AugSpec spec;
        spec.upsample_side = upsample_side;
        spec.alpha = rng.uniform();
        bool use_gamma = rng.uniform() < 0.5;
        bool use_bias = rng.uniform() < 0.5;
        bool use_gin = rng.uniform() < 0.5;
        if (!use_gamma && !use_bias && !use_gin) {
            const auto pick = rng.next_below(3);
            use_gamma = pick == 0;
            use_bias = pick == 1;
            use_gin = pick == 2;
        }
        // canonical order: gamma -> bias -> GIN
        if (use_gamma) {
            AugPrimitive p;
            p.kind = AugKind::gamma;
            p.gamma.u = rng.uniform(0.0, 0.5);
            spec.chain.push_back(p);
        }
        if (use_bias) {
            AugPrimitive p;
            p.kind = AugKind::bias;
            for (int m = 0; m < 6; ++m) p.bias.coefficients.push_back(rng.uniform(-1.0, 1.0));
            p.bias.strength = rng.uniform(0.0, 0.5);
            spec.chain.push_back(p);
        }
        if (use_gin) {
            AugPrimitive p;
            p.kind = AugKind::gin;
            p.gin.weight_seed = rng.raw();
            spec.chain.push_back(p);
        }
        bank.specs.push_back(std::move(spec));
    }
    // continuous parameters make collisions practically impossible; assert anyway
    for (size_t a = 0; a < bank.specs.size(); ++a)
        for (size_t b = a + 1; b < bank.specs.size(); ++b)
            if (bank.specs[a].to_json() == bank.specs[b].to_json())
                throw std::runtime_error("sample_aug_bank: duplicate specs");
    return bank;
}

// ---- serialization ----

namespace {
std::string kind_name(AugKind k) {
    switch (k) {
        case AugKind::gamma: return "gamma";
        case AugKind::bias: return "bias";
        case AugKind::gin: return "gin";
    }
    return "gamma";
}
AugKind kind_from(const std::string& s) {
    if (s == "gamma") return AugKind::gamma;
    if (s == "bias") return AugKind::bias;
    if (s == "gin") return AugKind::gin;
    throw InvalidArgument("unknown augmentation kind: " + s);
}
}  // namespace

nlohmann::json AugSpec::to_json() const {
    nlohmann::json j;
    j["alpha"] = alpha;
    j["upsample_side"] = upsample_side;
    j["chain"] = nlohmann::json::array();
    for (const auto& p : chain) {
        nlohmann::json pj;
        pj["kind"] = kind_name(p.kind);
        switch (p.kind) {
            case AugKind::gamma: pj["u"] = p.gamma.u; break;
            case AugKind::bias:
                pj["coefficients"] = p.bias.coefficients;
                pj["strength"] = p.bias.strength;
                break;
            case AugKind::gin:
                pj["weight_seed"] = p.gin.weight_seed;
                pj["alpha"] = p.gin.alpha;
                break;
        }
        j["chain"].push_back(pj);
    }
    return j;
}

AugSpec AugSpec::from_json(const nlohmann::json& j) {
    AugSpec spec;
    spec.alpha = j.at("alpha").get<double>();
    spec.upsample_side = j.at("upsample_side").get<int>();
    for (const auto& pj : j.at("chain")) {
        AugPrimitive p;
        p.kind = kind_from(pj.at("kind").get<std::string>());
        switch (p.kind) {
            case AugKind::gamma: p.gamma.u = pj.at("u").get<double>(); break;
            case AugKind::bias:
                p.bias.coefficients = pj.at("coefficients").get<std::vector<double>>();
                p.bias.strength = pj.at("strength").get<double>();
                break;
            case AugKind::gin:
                p.gin.weight_seed = pj.at("weight_seed").get<std::uint64_t>();
                p.gin.alpha = pj.value("alpha", 1.0);
                break;
        }
        spec.chain.push_back(std::move(p));
    }
    return spec;
}

nlohmann::json AugBank::to_json() const {
    nlohmann::json j;
    j["bank_seed"] = bank_seed;
    j["specs"] = nlohmann::json::array();
    for (const auto& s : specs) j["specs"].push_back(s.to_json());
    return j;
}

AugBank AugBank::from_json(const nlohmann::json& j) {
    AugBank bank;
    bank.bank_seed = j.at("bank_seed").get<std::uint64_t>();
    for (const auto& sj : j.at("specs")) bank.specs.push_back(AugSpec::from_json(sj));
    return bank;
}

}  // namespace harmon
