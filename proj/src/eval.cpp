#include "harmon/eval.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "harmon/features.hpp"
#include "harmon/metrics.hpp"

namespace harmon {

std::vector<double> MetricReport::values(bool harmonized, bool psnr) const {
    std::vector<double> out;
    for (const auto& r : records)
        if (r.harmonized == harmonized) out.push_back(psnr ? r.psnr_db : r.ms_ssim);
    return out;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j;
    j["records"] = nlohmann::json::array();
    for (const auto& r : records)
        j["records"].push_back({{"subject_id", r.subject_id},
                                {"source_profile", r.source_profile},
                                {"target_profile", r.target_profile},
                                {"harmonized", r.harmonized},
                                {"psnr_db", r.psnr_db},
                                {"ms_ssim", r.ms_ssim}});
    for (const bool harm : {false, true}) {
        const std::string key = harm ? "harmonized" : "baseline";
        j["aggregates"][key] = {{"psnr_median", median(values(harm, true))},
                                {"psnr_iqr", iqr(values(harm, true))},
                                {"ms_ssim_median", median(values(harm, false))},
                                {"ms_ssim_iqr", iqr(values(harm, false))}};
    }
    j["skipped_subjects"] = skipped_subjects;
    return j;
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream f(path);
    f << "subject_id,source_profile,target_profile,harmonized,psnr_db,ms_ssim\n";
    for (const auto& r : records)
        f << r.subject_id << ',' << r.source_profile << ',' << r.target_profile << ','
          << (r.harmonized ? 1 : 0) << ',' << r.psnr_db << ',' << r.ms_ssim << '\n';
}

TargetContrast target_from_manifest(const CohortManifest& manifest,
                                    const std::string& target_profile,
                                    const std::string& exclude_subject, HarmonizationModel& model,
                                    int n_references) {
    std::vector<Slice> refs;
    std::vector<std::string> ids;
    for (const auto& e : manifest.entries) {
        if (e.profile_id != target_profile || e.subject_id == exclude_subject) continue;
        refs.push_back(manifest.load(e));
        ids.push_back(e.subject_id);
        if (static_cast<int>(refs.size()) >= n_references) break;
    }
    if (refs.empty())
        throw InvalidArgument("target_from_manifest: no reference images for " + target_profile);
    return estimate_target_contrast(refs, model, ids);
}

MetricReport traveling_subject_eval(const CohortManifest& manifest, HarmonizationModel& model,
                                    const std::string& target_profile, const EvalOptions& opts) {
    MetricReport report;
    const auto subjects = manifest.subject_ids();
    const auto profiles = manifest.profile_ids();
    for (const auto& subject : subjects) {
        const ManifestEntry* gt = manifest.find(subject, target_profile);
        if (!gt) {
            report.skipped_subjects.push_back(subject);
            continue;
        }
        const Slice target_render = manifest.load(*gt);
        const TargetContrast tc =
            target_from_manifest(manifest, target_profile, subject, model, opts.n_references);
        for (const auto& profile : profiles) {
            if (profile == target_profile) continue;
            const ManifestEntry* src = manifest.find(subject, profile);
            if (!src) {
                report.skipped_subjects.push_back(subject + "/" + profile);
                continue;
            }
            const Slice source = manifest.load(*src);
            // unharmonized baseline
            report.records.push_back({subject, profile, target_profile, false,
                                      psnr(source, target_render), ms_ssim(source, target_render)});
            HarmonizeOptions ho;
            ho.n_steps = opts.n_steps;
            const Slice harmonized = harmonize(source, tc, model, ho);
            report.records.push_back({subject, profile, target_profile, true,
                                      psnr(harmonized, target_render),
                                      ms_ssim(harmonized, target_render)});
        }
    }
    return report;
}

namespace {

void assert_disjoint_subjects(const CohortManifest& a, const CohortManifest& b,
                              const char* context) {
    std::set<std::string> sa;
    for (const auto& e : a.entries) sa.insert(e.subject_id);
    for (const auto& e : b.entries)
        if (sa.count(e.subject_id))
            throw InvalidArgument(std::string(context) +
                                  ": subject leakage between train and eval splits: " +
                                  e.subject_id);
}

}  // namespace

nlohmann::json ScannerBiasResult::to_json() const {
    return {{"f1_harmonized_vs_origin", f1_harmonized_vs_origin},
            {"acc_harmonized_vs_target", acc_harmonized_vs_target},
            {"f1_unharmonized_vs_origin", f1_unharmonized_vs_origin},
            {"acc_unharmonized_vs_target", acc_unharmonized_vs_target},
            {"f1_variant", "macro"}};
}

ScannerBiasResult scanner_bias_eval(const CohortManifest& train_manifest,
                                    const CohortManifest& eval_manifest, HarmonizationModel& model,
                                    const std::string& target_profile, const EvalOptions& opts) {
    assert_disjoint_subjects(train_manifest, eval_manifest, "scanner_bias_eval");
    const auto profiles = train_manifest.profile_ids();
    if (profiles.size() < 3)
        throw InvalidArgument("scanner_bias_eval: need >= 3 profiles");
    auto label_of = [&](const std::string& p) {
        const auto it = std::find(profiles.begin(), profiles.end(), p);
        if (it == profiles.end())
            throw InvalidArgument("scanner_bias_eval: unknown profile " + p);
        return static_cast<int>(it - profiles.begin());
    };

    std::vector<std::vector<double>> x_train;
    std::vector<int> y_train;
    for (const auto& e : train_manifest.entries) {
        x_train.push_back(feature_vector(train_manifest.load(e)));
        y_train.push_back(label_of(e.profile_id));
    }
    SoftmaxClassifier clf;
    clf.fit(x_train, y_train, static_cast<int>(profiles.size()));

    const int target_label = label_of(target_profile);
    const TargetContrast tc =
        target_from_manifest(train_manifest, target_profile, "", model, opts.n_references);

    std::vector<int> origin_labels, target_labels, pred_raw, pred_harm;
    for (const auto& e : eval_manifest.entries) {
        const Slice source = eval_manifest.load(e);
        origin_labels.push_back(label_of(e.profile_id));
        target_labels.push_back(target_label);
        pred_raw.push_back(clf.predict(feature_vector(source)));
        HarmonizeOptions ho;
        ho.n_steps = opts.n_steps;
        pred_harm.push_back(clf.predict(feature_vector(harmonize(source, tc, model, ho))));
    }

    ScannerBiasResult r;
    const int k = static_cast<int>(profiles.size());
    r.f1_unharmonized_vs_origin = macro_f1(origin_labels, pred_raw, k);
    r.acc_unharmonized_vs_target = accuracy(target_labels, pred_raw);
    r.f1_harmonized_vs_origin = macro_f1(origin_labels, pred_harm, k);
    r.acc_harmonized_vs_target = accuracy(target_labels, pred_harm);
    return r;
}

nlohmann::json AgeRegressionResult::to_json() const {
    return {{"r2_unharmonized", r2_unharmonized},
            {"r2_harmonized", r2_harmonized},
            {"r2_train_profiles", r2_train_profiles}};
}

AgeRegressionResult age_regression_eval(const CohortManifest& train_manifest,
                                        const CohortManifest& eval_manifest,
                                        HarmonizationModel& model,
                                        const std::vector<std::string>& train_profiles,
                                        const std::string& eval_profile,
                                        const std::string& harmonize_to, const EvalOptions& opts) {
    if (train_profiles.size() < 2)
        throw InvalidArgument("age_regression_eval: need >= 2 training profiles");
    for (const auto& p : train_profiles)
        if (p == eval_profile)
            throw InvalidArgument("age_regression_eval: eval profile must be unseen");
    assert_disjoint_subjects(train_manifest, eval_manifest, "age_regression_eval");

    std::vector<std::vector<double>> x_train;
    std::vector<double> y_train;
    for (const auto& e : train_manifest.entries) {
        if (std::find(train_profiles.begin(), train_profiles.end(), e.profile_id) ==
            train_profiles.end())
            continue;
        x_train.push_back(feature_vector(train_manifest.load(e)));
        y_train.push_back(e.age_proxy);
    }
    RidgeRegressor reg;
    reg.fit(x_train, y_train);

    {  // sanity: regressor on its own training domains
        std::vector<double> pred;
        for (const auto& x : x_train) pred.push_back(reg.predict(x));
        AgeRegressionResult tmp;
        tmp.r2_train_profiles = r_squared(y_train, pred);
        // carried over below
        const TargetContrast tc =
            target_from_manifest(train_manifest, harmonize_to, "", model, opts.n_references);
        std::vector<double> truth, pred_raw, pred_harm;
        for (const auto& e : eval_manifest.entries) {
            if (e.profile_id != eval_profile) continue;
            const Slice source = eval_manifest.load(e);
            truth.push_back(e.age_proxy);
            pred_raw.push_back(reg.predict(feature_vector(source)));
            HarmonizeOptions ho;
            ho.n_steps = opts.n_steps;
            pred_harm.push_back(reg.predict(feature_vector(harmonize(source, tc, model, ho))));
        }
        tmp.r2_unharmonized = r_squared(truth, pred_raw);
        tmp.r2_harmonized = r_squared(truth, pred_harm);
        return tmp;
    }
}

double anatomy_dice(const Slice& image, const Phantom& phantom) {
    // nearest-class-mean segmentation of the image (means taken over the
    // true label regions), then per-class Dice against the label map itself
    std::vector<double> class_mean(kNumTissueClasses + 1, 0.0);
    std::vector<int> class_count(kNumTissueClasses + 1, 0);
    for (int y = 0; y < image.h(); ++y)
        for (int x = 0; x < image.w(); ++x) {
            const int cls = phantom.label(y, x);
            if (cls == kBackground || !image.in_mask(y, x)) continue;
            class_mean[cls] += image.pixels.at(y, x);
            class_count[cls] += 1;
        }
    for (int c = 1; c <= kNumTissueClasses; ++c)
        if (class_count[c]) class_mean[c] /= class_count[c];
    std::vector<int> seg(image.pixels.size(), kBackground);
    for (int y = 0; y < image.h(); ++y)
        for (int x = 0; x < image.w(); ++x) {
            if (!image.in_mask(y, x)) continue;
            int best = kBackground;
            double best_d = 1e300;
            for (int c = 1; c <= kNumTissueClasses; ++c) {
                if (!class_count[c]) continue;
                const double d = std::abs(image.pixels.at(y, x) - class_mean[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            seg[static_cast<size_t>(y) * image.w() + x] = best;
        }
    double dice_sum = 0.0;
    int classes = 0;
    for (int c = 1; c <= kNumTissueClasses; ++c) {
        size_t inter = 0, n_label = 0, n_seg = 0;
        for (int y = 0; y < image.h(); ++y)
            for (int x = 0; x < image.w(); ++x) {
                const size_t i = static_cast<size_t>(y) * image.w() + x;
                const bool in_label = phantom.label(y, x) == c && image.in_mask(y, x);
                if (in_label) ++n_label;
                if (seg[i] == c) ++n_seg;
                if (in_label && seg[i] == c) ++inter;
            }
        if (n_label + n_seg == 0) continue;
        dice_sum += 2.0 * static_cast<double>(inter) / static_cast<double>(n_label + n_seg);
        ++classes;
    }
    return classes ? dice_sum / classes : 0.0;
}

}  // namespace harmon
