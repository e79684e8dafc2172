#include "harmon/harmonize.hpp"

#include <cstring>
#include <fstream>

namespace harmon {

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j;
    j["encoder"] = {{"image_size", encoder.image_size},
                    {"base_width", encoder.base_width},
                    {"z_sem_dim", encoder.z_sem_dim},
                    {"d_a", encoder.d_a},
                    {"d_c", encoder.d_c}};
    j["unet"] = {{"image_size", unet.image_size},
                 {"widths", unet.widths},
                 {"cond_dim", unet.cond_dim},
                 {"emb_dim", unet.emb_dim},
                 {"time_dim", unet.time_dim}};
    j["T"] = T;
    j["beta_start"] = beta_start;
    j["beta_end"] = beta_end;
    j["sample_steps"] = sample_steps;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    const auto& e = j.at("encoder");
    c.encoder = {e.at("image_size").get<int>(), e.at("base_width").get<int>(),
                 e.at("z_sem_dim").get<int>(), e.at("d_a").get<int>(), e.at("d_c").get<int>()};
    const auto& u = j.at("unet");
    c.unet.image_size = u.at("image_size").get<int>();
    c.unet.widths = u.at("widths").get<std::vector<int>>();
    c.unet.cond_dim = u.at("cond_dim").get<int>();
    c.unet.emb_dim = u.at("emb_dim").get<int>();
    c.unet.time_dim = u.at("time_dim").get<int>();
    c.T = j.at("T").get<int>();
    c.beta_start = j.at("beta_start").get<double>();
    c.beta_end = j.at("beta_end").get<double>();
    c.sample_steps = j.at("sample_steps").get<int>();
    return c;
}

HarmonizationModel::HarmonizationModel(const ModelConfig& cfg_)
    : cfg(cfg_), encoder(cfg_.encoder), unet(cfg_.unet) {
    if (cfg.unet.cond_dim != cfg.encoder.d_a + cfg.encoder.d_c)
        throw InvalidArgument("model: cond_dim must equal d_a + d_c");
    schedule = DiffusionSchedule::linear_beta(cfg.T, cfg.beta_start, cfg.beta_end);
}

void HarmonizationModel::init(std::uint64_t seed) {
    Rng rng(seed);
    encoder.init(rng);
    unet.init(rng);
}

SemanticCode HarmonizationModel::encode(const Slice& slice) {
    auto out = encoder.forward(slice_to_tensor(slice));
    SemanticCode code;
    code.z_a.assign(out.z_a.v.begin(), out.z_a.v.end());
    code.z_c.assign(out.z_c.v.begin(), out.z_c.v.end());
    return code;
}

SemanticEncoder::Output HarmonizationModel::encode_batch(const nn::Tensor& x) {
    return encoder.forward(x);
}

nn::Tensor HarmonizationModel::predict_noise(const nn::Tensor& x_t, const std::vector<int>& t,
                                             const nn::Tensor& z) {
    return unet.forward(x_t, t, z);
}

nn::Tensor HarmonizationModel::condition(const std::vector<float>& z_a,
                                         const std::vector<float>& z_c) const {
    if (static_cast<int>(z_a.size()) != cfg.encoder.d_a ||
        static_cast<int>(z_c.size()) != cfg.encoder.d_c)
        throw InvalidArgument("condition: code dims do not match the model");
    nn::Tensor z(1, cfg.unet.cond_dim, 1, 1);
    std::copy(z_a.begin(), z_a.end(), z.v.begin());
    std::copy(z_c.begin(), z_c.end(), z.v.begin() + z_a.size());
    return z;
}

nn::Tensor HarmonizationModel::ddim_invert(const nn::Tensor& x0, const nn::Tensor& z, int n_steps) {
    auto ts = schedule.sampling_times(n_steps);  // descending T..0
    nn::Tensor x = x0;
    for (int i = static_cast<int>(ts.size()) - 1; i > 0; --i) {
        const int t_lo = ts[i];
        const int t_hi = ts[i - 1];
        std::vector<int> tb(x.n, t_lo);
        nn::Tensor eps = unet.forward(x, tb, z);
        x = ddim_step(x, eps, t_lo, t_hi, schedule);
    }
    return x;
}

nn::Tensor HarmonizationModel::denoise(const nn::Tensor& x_T, const nn::Tensor& z, int n_steps) {
    auto ts = schedule.sampling_times(n_steps);
    nn::Tensor x = x_T;
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        std::vector<int> tb(x.n, ts[i]);
        nn::Tensor eps = unet.forward(x, tb, z);
        x = ddim_step(x, eps, ts[i], ts[i + 1], schedule);
    }
    return x;
}

void HarmonizationModel::collect(std::vector<nn::Param*>& out) {
    encoder.collect(out);
    unet.collect(out);
}

void HarmonizationModel::visit(const nn::ParamVisitor& fn) {
    encoder.visit("encoder", fn);
    unet.visit("unet", fn);
}

void HarmonizationModel::zero_grad() {
    encoder.zero_grad();
    unet.zero_grad();
}

TargetContrast estimate_target_contrast(const std::vector<Slice>& references,
                                        HarmonizationModel& model,
                                        const std::vector<std::string>& reference_ids) {
    if (references.empty())
        throw InvalidArgument("estimate_target_contrast: need at least one reference");
    TargetContrast tc;
    tc.n_references = static_cast<int>(references.size());
    tc.reference_ids = reference_ids;
    tc.z_c_bar.assign(model.cfg.encoder.d_c, 0.f);
    for (const auto& ref : references) {
        SemanticCode code = model.encode(ref);  // anatomy vector discarded
        for (size_t j = 0; j < tc.z_c_bar.size(); ++j) tc.z_c_bar[j] += code.z_c[j];
    }
    const float inv = 1.f / static_cast<float>(references.size());
    for (auto& v : tc.z_c_bar) v *= inv;
    return tc;
}

Slice harmonize(const Slice& source, const TargetContrast& target, HarmonizationModel& model,
                const HarmonizeOptions& opts) {
    if (static_cast<int>(target.z_c_bar.size()) != model.cfg.encoder.d_c)
        throw InvalidArgument("harmonize: target contrast dim does not match the model");
    SemanticCode code = model.encode(source);
    nn::Tensor cond_src = model.condition(code.z_a, code.z_c);
    nn::Tensor cond_swp = model.condition(code.z_a, target.z_c_bar);
    nn::Tensor x0 = slice_to_tensor(source);
    nn::Tensor x_T =
        model.ddim_invert(x0, opts.invert_under_swapped ? cond_swp : cond_src, opts.n_steps);
    nn::Tensor out = model.denoise(x_T, cond_swp, opts.n_steps);
    Slice result;
    result.pixels = Image2D(source.h(), source.w());
    std::copy(out.v.begin(), out.v.end(), result.pixels.v.begin());
    result.mask = source.mask;
    result.value_range = ValueRange::symmetric;
    for (size_t i = 0; i < result.pixels.size(); ++i) {
        if (result.mask[i])
            result.pixels.v[i] = std::clamp(result.pixels.v[i], -1.f, 1.f);
        else
            result.pixels.v[i] = -1.f;
    }
    return result;
}

// ---- checkpointing ----

namespace {

constexpr char kMagic[8] = {'H', 'A', 'R', 'M', 'C', 'P', '0', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& f, std::uint32_t v) { f.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ostream& f, std::uint64_t v) { f.write(reinterpret_cast<char*>(&v), 8); }
void write_str(std::ostream& f, const std::string& s) {
    write_u64(f, s.size());
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_floats(std::ostream& f, const std::vector<float>& v) {
    write_u64(f, v.size());
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

struct Reader {
    std::ifstream f;
    explicit Reader(const std::filesystem::path& p) : f(p, std::ios::binary) {
        if (!f) throw std::runtime_error("checkpoint: cannot open " + p.string());
    }
    void raw(void* dst, size_t n) {
        f.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(f.gcount()) != n)
            throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    std::string str() {
        const auto n = u64();
        if (n > (1ull << 32)) throw std::runtime_error("checkpoint: corrupt string length");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    std::vector<float> floats() {
        const auto n = u64();
        if (n > (1ull << 34)) throw std::runtime_error("checkpoint: corrupt tensor length");
        std::vector<float> v(n);
        raw(v.data(), n * sizeof(float));
        return v;
    }
};

}  // namespace

void save_checkpoint(HarmonizationModel& model, const std::filesystem::path& path,
                     const TrainerState* state) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open for write " + path.string());
    f.write(kMagic, 8);
    write_u32(f, kVersion);
    write_str(f, model.cfg.to_json().dump());

    std::vector<std::pair<std::string, nn::Param*>> params;
    model.visit([&](const std::string& name, nn::Param& p) { params.emplace_back(name, &p); });
    write_u64(f, params.size());
    for (auto& [name, p] : params) {
        write_str(f, name);
        write_floats(f, p->w);
    }

    f.put(state ? 1 : 0);
    if (state) {
        write_u64(f, static_cast<std::uint64_t>(state->step));
        write_u64(f, static_cast<std::uint64_t>(state->optimizer.step));
        write_u64(f, state->optimizer.m_.size());
        for (size_t i = 0; i < state->optimizer.m_.size(); ++i) {
            write_floats(f, state->optimizer.m_[i]);
            write_floats(f, state->optimizer.v_[i]);
        }
        write_u64(f, state->aug_bank_seeds.size());
        for (auto s : state->aug_bank_seeds) write_u64(f, s);
    }
}

std::unique_ptr<HarmonizationModel> load_checkpoint(const std::filesystem::path& path,
                                                    TrainerState* state) {
    Reader r(path);
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic (not a checkpoint file)");
    const auto version = r.u32();
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    auto cfg = ModelConfig::from_json(nlohmann::json::parse(r.str()));
    auto model = std::make_unique<HarmonizationModel>(cfg);

    std::vector<std::pair<std::string, nn::Param*>> params;
    model->visit([&](const std::string& name, nn::Param& p) { params.emplace_back(name, &p); });
    const auto count = r.u64();
    if (count != params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (auto& [name, p] : params) {
        const std::string got = r.str();
        if (got != name) throw std::runtime_error("checkpoint: parameter name mismatch: " + got);
        auto vals = r.floats();
        if (vals.size() != p->w.size())
            throw std::runtime_error("checkpoint: parameter size mismatch: " + name);
        p->w = std::move(vals);
    }

    char has_state = 0;
    r.raw(&has_state, 1);
    if (has_state && state) {
        state->step = static_cast<long>(r.u64());
        state->optimizer.step = static_cast<long>(r.u64());
        const auto n = r.u64();
        state->optimizer.m_.resize(n);
        state->optimizer.v_.resize(n);
        for (size_t i = 0; i < n; ++i) {
            state->optimizer.m_[i] = r.floats();
            state->optimizer.v_[i] = r.floats();
        }
        const auto ns = r.u64();
        state->aug_bank_seeds.resize(ns);
        for (size_t i = 0; i < ns; ++i) state->aug_bank_seeds[i] = r.u64();
    }
    return model;
}

}  // namespace harmon
