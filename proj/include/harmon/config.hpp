#pragma once

// Versioned run configuration: one JSON document covering data generation,
// augmentation, model, loss, training and evaluation, with dotted-key
// command-line overrides.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "harmon/harmonize.hpp"
#include "harmon/train.hpp"

namespace harmon {

inline constexpr int kConfigSchemaVersion = 1;

struct DataConfig {
    int n_subjects = 24;
    int n_eval_subjects = 8;  // last n subjects form the held-out eval split
    int image_size = 64;
    std::uint64_t seed = 7;
    std::vector<std::string> train_profiles = {"site_a", "site_b", "site_c"};
    std::string heldout_profile = "site_d";
};

struct CohortSplit {
    CohortManifest train;  // first subjects, training profiles only
    CohortManifest eval;   // last n_eval_subjects, all profiles
};

/// Deterministic subject split of one cohort; training never sees the
/// held-out profile or the eval subjects.
CohortSplit split_cohort(const CohortManifest& manifest, const DataConfig& data);

struct EvalConfig {
    std::string target_profile = "site_a";
    int n_steps = 20;
    int n_references = 10;
};

struct RunConfig {
    int schema_version = kConfigSchemaVersion;
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Apply "a.b.c=value" overrides onto a JSON document. Values parse as JSON
/// when possible and fall back to strings. Unknown keys throw.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// Built-in scanner profile library for the synthetic cohort; throws on
/// unknown ids. Known ids: site_a..site_d (site_a near-identity).
ScannerProfile profile_by_id(const std::string& id);

}  // namespace harmon
