#pragma once

// Experimental protocols: traveling-subject fidelity, scanner-bias / target-
// fidelity classification, and downstream age regression on an unseen scanner.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "harmon/harmonize.hpp"
#include "harmon/phantom.hpp"

namespace harmon {

struct PairRecord {
    std::string subject_id;
    std::string source_profile;
    std::string target_profile;
    bool harmonized = false;  // false = unharmonized baseline row
    double psnr_db = 0.0;
    double ms_ssim = 0.0;
};

struct MetricReport {
    std::vector<PairRecord> records;
    std::vector<std::string> skipped_subjects;

    std::vector<double> values(bool harmonized, bool psnr) const;
    nlohmann::json to_json() const;
    void write_csv(const std::filesystem::path& path) const;
};

struct EvalOptions {
    int n_steps = 20;
    int n_references = 10;
};

/// For each subject and non-target profile: harmonize to the target profile
/// and compare against the subject's ground-truth target render; also records
/// the unharmonized baseline row. Target references are the target-profile
/// renders of *other* subjects in the manifest.
MetricReport traveling_subject_eval(const CohortManifest& manifest, HarmonizationModel& model,
                                    const std::string& target_profile,
                                    const EvalOptions& opts = {});

struct ScannerBiasResult {
    double f1_harmonized_vs_origin = 0.0;
    double acc_harmonized_vs_target = 0.0;
    double f1_unharmonized_vs_origin = 0.0;
    double acc_unharmonized_vs_target = 0.0;

    nlohmann::json to_json() const;
};

/// Train a profile classifier on unharmonized train-split images, then score
/// eval-split images before and after harmonization to target_profile.
/// Train/eval subject sets must be disjoint (asserted).
ScannerBiasResult scanner_bias_eval(const CohortManifest& train_manifest,
                                    const CohortManifest& eval_manifest, HarmonizationModel& model,
                                    const std::string& target_profile, const EvalOptions& opts = {});

struct AgeRegressionResult {
    double r2_unharmonized = 0.0;
    double r2_harmonized = 0.0;
    double r2_train_profiles = 0.0;  // sanity: regressor scored on its own domains

    nlohmann::json to_json() const;
};

/// Ridge age regressor trained on train_profiles of the train split; evaluated
/// on eval-split images of eval_profile, raw and harmonized to harmonize_to.
AgeRegressionResult age_regression_eval(const CohortManifest& train_manifest,
                                        const CohortManifest& eval_manifest,
                                        HarmonizationModel& model,
                                        const std::vector<std::string>& train_profiles,
                                        const std::string& eval_profile,
                                        const std::string& harmonize_to,
                                        const EvalOptions& opts = {});

/// Per-class Dice between the phantom's label-derived region masks and a
/// nearest-class-mean segmentation of the image (class means taken from the
/// label map); returns mean Dice over tissue classes. The label map is the
/// ground-truth anatomy of the source, so this scores anatomy preservation
/// without rewarding agreement on source noise.
double anatomy_dice(const Slice& image, const Phantom& phantom);

/// Build a TargetContrast from target-profile renders in the manifest,
/// excluding a subject (no self-reference).
TargetContrast target_from_manifest(const CohortManifest& manifest,
                                    const std::string& target_profile,
                                    const std::string& exclude_subject, HarmonizationModel& model,
                                    int n_references);

}  // namespace harmon
