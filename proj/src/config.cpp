#include "harmon/config.hpp"

#include <fstream>

namespace harmon {

namespace {

nlohmann::json data_to_json(const DataConfig& d) {
    return {{"n_subjects", d.n_subjects},
            {"n_eval_subjects", d.n_eval_subjects},
            {"image_size", d.image_size},
            {"seed", d.seed},
            {"train_profiles", d.train_profiles},
            {"heldout_profile", d.heldout_profile}};
}

DataConfig data_from_json(const nlohmann::json& j) {
    DataConfig d;
    d.n_subjects = j.at("n_subjects");
    d.n_eval_subjects = j.at("n_eval_subjects");
    d.image_size = j.at("image_size");
    d.seed = j.at("seed");
    d.train_profiles = j.at("train_profiles").get<std::vector<std::string>>();
    d.heldout_profile = j.at("heldout_profile");
    return d;
}

nlohmann::json eval_to_json(const EvalConfig& e) {
    return {{"target_profile", e.target_profile},
            {"n_steps", e.n_steps},
            {"n_references", e.n_references}};
}

EvalConfig eval_from_json(const nlohmann::json& j) {
    EvalConfig e;
    e.target_profile = j.at("target_profile");
    e.n_steps = j.at("n_steps");
    e.n_references = j.at("n_references");
    return e;
}

}  // namespace

CohortSplit split_cohort(const CohortManifest& manifest, const DataConfig& data) {
    const auto subjects = manifest.subject_ids();
    if (data.n_eval_subjects < 1 ||
        data.n_eval_subjects >= static_cast<int>(subjects.size()))
        throw InvalidArgument("split_cohort: n_eval_subjects must leave both splits non-empty");
    const auto cut = subjects.end() - data.n_eval_subjects;
    CohortSplit split;
    split.train =
        manifest.subset({subjects.begin(), cut}).subset_profiles(data.train_profiles);
    split.eval = manifest.subset({cut, subjects.end()});
    return split;
}

nlohmann::json RunConfig::to_json() const {
    return {{"schema_version", schema_version},
            {"data", data_to_json(data)},
            {"model", model.to_json()},
            {"train", train.to_json()},
            {"eval", eval_to_json(eval)}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.schema_version = j.at("schema_version");
    if (c.schema_version != kConfigSchemaVersion)
        throw InvalidArgument("config: unsupported schema_version " +
                              std::to_string(c.schema_version));
    c.data = data_from_json(j.at("data"));
    c.model = ModelConfig::from_json(j.at("model"));
    c.train = TrainConfig::from_json(j.at("train"));
    c.eval = eval_from_json(j.at("eval"));
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("config: cannot open " + path.string());
    nlohmann::json j;
    f >> j;
    return RunConfig::from_json(j);
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream f(path);
    f << cfg.to_json().dump(2) << '\n';
}

void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw InvalidArgument("override must look like key.path=value: " + ov);
        const std::string keypath = ov.substr(0, eq);
        const std::string raw = ov.substr(eq + 1);

        nlohmann::json* node = &doc;
        size_t start = 0;
        while (true) {
            const size_t dot = keypath.find('.', start);
            const std::string key = keypath.substr(start, dot - start);
            if (!node->is_object() || !node->contains(key))
                throw InvalidArgument("unknown config key: " + keypath);
            node = &(*node)[key];
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw;  // plain string
        *node = value;
    }
}

ScannerProfile profile_by_id(const std::string& id) {
    ScannerProfile p;
    p.profile_id = id;
    if (id == "site_a") {  // near-identity reference site
        p.transfer_knots = {0.0, 0.26, 0.5, 0.74, 1.0};
        p.bias_coeffs = {0.02, -0.02, 0.0, 0.0, 0.0};
        p.noise_sigma = 0.01;
        p.seed = 11;
    } else if (id == "site_b") {  // compressive transfer, mild bias
        p.transfer_knots = {0.0, 0.38, 0.62, 0.80, 0.95};
        p.bias_coeffs = {0.06, 0.04, -0.03, 0.0, 0.02};
        p.noise_sigma = 0.015;
        p.seed = 22;
    } else if (id == "site_c") {  // expansive dark transfer, stronger bias
        p.transfer_knots = {0.05, 0.15, 0.40, 0.70, 1.0};
        p.bias_coeffs = {-0.05, 0.07, 0.04, -0.03, 0.0};
        p.noise_sigma = 0.02;
        p.seed = 33;
    } else if (id == "site_d") {  // held-out: non-monotone fold in the upper
                                  // mid-range plus a strong bias field and
                                  // heavier noise — outside every seen site
        p.transfer_knots = {0.00, 0.30, 0.62, 0.52, 0.95};
        p.bias_coeffs = {0.24, -0.18, -0.15, 0.12, 0.09};
        p.noise_sigma = 0.04;
        p.seed = 44;
    } else {
        throw InvalidArgument("unknown scanner profile id: " + id);
    }
    p.validate();
    return p;
}

}  // namespace harmon
