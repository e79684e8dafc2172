// Single entry point wiring data generation, training, harmonization,
// evaluation and plotting into reproducible run directories.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "harmon/config.hpp"
#include "harmon/eval.hpp"
#include "harmon/metrics.hpp"
#include "harmon/plot.hpp"
#include "harmon/train.hpp"

namespace fs = std::filesystem;
using namespace harmon;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
};

RunConfig resolve_config(const CommonOpts& c) {
    nlohmann::json doc = c.config_path.empty() ? RunConfig{}.to_json()
                                               : load_run_config(c.config_path).to_json();
    apply_overrides(doc, c.overrides);
    return RunConfig::from_json(doc);
}

void start_run(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    save_run_config(cfg, out_dir / "config.resolved.json");
}

std::vector<ScannerProfile> cohort_profiles(const DataConfig& d, bool include_heldout) {
    std::vector<ScannerProfile> profiles;
    for (const auto& id : d.train_profiles) profiles.push_back(profile_by_id(id));
    if (include_heldout) profiles.push_back(profile_by_id(d.heldout_profile));
    return profiles;
}

int cmd_gen_data(const CommonOpts& c, bool force) {
    const RunConfig cfg = resolve_config(c);
    const fs::path out(c.out_dir);
    if (fs::exists(out / "manifest.jsonl") && !force) {
        std::cerr << "refusing to overwrite existing dataset at " << out
                  << " (pass --force to regenerate)\n";
        return kExitData;
    }
    start_run(cfg, out);
    const CohortManifest m = make_traveling_cohort(
        cfg.data.n_subjects, cohort_profiles(cfg.data, true), cfg.data.seed, cfg.data.image_size,
        out);
    std::cout << "wrote " << m.entries.size() << " entries to " << (out / "manifest.jsonl")
              << "\n";
    return 0;
}

int cmd_train(const CommonOpts& c, const std::string& manifest_path,
              const std::string& resume_path) {
    const RunConfig cfg = resolve_config(c);
    const fs::path out(c.out_dir);
    start_run(cfg, out);
    // training sees neither the eval subjects nor the held-out profile
    const CohortManifest data = split_cohort(load_manifest(manifest_path), cfg.data).train;

    std::unique_ptr<HarmonizationModel> model;
    TrainerState resumed;
    if (!resume_path.empty()) {
        model = load_checkpoint(resume_path, &resumed);
    } else {
        model = std::make_unique<HarmonizationModel>(cfg.model);
        model->init(cfg.train.seed);
    }
    Trainer trainer(*model, data, cfg.train, out);
    if (!resume_path.empty()) trainer.state() = std::move(resumed);
    const StepMetrics last = trainer.run();
    std::cout << "step " << last.step << " total " << last.total << " ddim " << last.ddim
              << " loss_a " << last.loss_a << " loss_c " << last.loss_c << "\n";
    return 0;
}

int cmd_harmonize(const CommonOpts& c, const std::string& checkpoint_path,
                  const std::string& manifest_path, const std::string& subject,
                  const std::string& source_profile) {
    const RunConfig cfg = resolve_config(c);
    const fs::path out(c.out_dir);
    start_run(cfg, out);
    auto model = load_checkpoint(checkpoint_path);
    const CohortManifest m = load_manifest(manifest_path);
    const ManifestEntry* e = m.find(subject, source_profile);
    if (!e) throw InvalidArgument("no manifest entry for " + subject + "/" + source_profile);
    const Slice source = m.load(*e);
    const TargetContrast tc =
        target_from_manifest(m, cfg.eval.target_profile, subject, *model, cfg.eval.n_references);
    HarmonizeOptions ho;
    ho.n_steps = cfg.eval.n_steps;
    const Slice result = harmonize(source, tc, *model, ho);
    save_slice(result, out / (subject + "_to_" + cfg.eval.target_profile + ".f32"),
               {subject, cfg.eval.target_profile});
    write_png(slice_to_rgb(result), out / (subject + "_to_" + cfg.eval.target_profile + ".png"));
    std::cout << "harmonized " << subject << "/" << source_profile << " -> "
              << cfg.eval.target_profile << "\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& c, const std::string& checkpoint_path,
                 const std::string& manifest_path) {
    const RunConfig cfg = resolve_config(c);
    const fs::path out(c.out_dir);
    start_run(cfg, out);
    auto model = load_checkpoint(checkpoint_path);
    const CohortSplit split = split_cohort(load_manifest(manifest_path), cfg.data);
    const CohortManifest& train_m = split.train;
    const CohortManifest& eval_m = split.eval;
    EvalOptions opts;
    opts.n_steps = cfg.eval.n_steps;
    opts.n_references = cfg.eval.n_references;

    const MetricReport ts = traveling_subject_eval(eval_m, *model, cfg.eval.target_profile, opts);
    std::ofstream(out / "traveling_subject.json") << ts.to_json().dump(2) << '\n';
    ts.write_csv(out / "traveling_subject.csv");

    // the scanner classifier only knows the training profiles
    const ScannerBiasResult sb =
        scanner_bias_eval(train_m, eval_m.subset_profiles(cfg.data.train_profiles), *model,
                          cfg.eval.target_profile, opts);
    std::ofstream(out / "scanner_bias.json") << sb.to_json().dump(2) << '\n';

    const AgeRegressionResult ar =
        age_regression_eval(train_m, eval_m, *model, cfg.data.train_profiles,
                            cfg.data.heldout_profile, cfg.eval.target_profile, opts);
    std::ofstream(out / "age_regression.json") << ar.to_json().dump(2) << '\n';

    // example triplets for the plot subcommand
    const fs::path ex = out / "examples";
    fs::create_directories(ex);
    const TargetContrast tc =
        target_from_manifest(eval_m, cfg.eval.target_profile, "", *model, opts.n_references);
    int dumped = 0;
    for (const auto& e : eval_m.entries) {
        if (e.profile_id == cfg.eval.target_profile || dumped >= 4) continue;
        const ManifestEntry* gt = eval_m.find(e.subject_id, cfg.eval.target_profile);
        if (!gt) continue;
        HarmonizeOptions ho;
        ho.n_steps = opts.n_steps;
        const Slice src = eval_m.load(e);
        const std::string stem = e.subject_id + "_" + e.profile_id;
        save_slice(src, ex / (stem + "_source.f32"), {e.subject_id, e.profile_id});
        save_slice(harmonize(src, tc, *model, ho), ex / (stem + "_harmonized.f32"),
                   {e.subject_id, cfg.eval.target_profile});
        save_slice(eval_m.load(*gt), ex / (stem + "_target.f32"),
                   {e.subject_id, cfg.eval.target_profile});
        ++dumped;
    }
    std::cout << "reports written to " << out << "\n";
    return 0;
}

int cmd_plot(const CommonOpts& c, const std::string& report_dir) {
    const fs::path in(report_dir);
    const fs::path out(c.out_dir);
    fs::create_directories(out);
    std::ifstream f(in / "traveling_subject.json");
    if (!f) throw InvalidArgument("missing report " + (in / "traveling_subject.json").string());
    nlohmann::json rep;
    f >> rep;

    // per-source-profile median PSNR / MS-SSIM bars
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> psnr_by, ssim_by;
    for (const auto& r : rep.at("records")) {
        const std::string key = r.at("source_profile");
        const bool harm = r.at("harmonized");
        (harm ? psnr_by[key].second : psnr_by[key].first).push_back(r.at("psnr_db"));
        (harm ? ssim_by[key].second : ssim_by[key].first).push_back(r.at("ms_ssim"));
    }
    std::vector<BarGroup> psnr_groups, ssim_groups;
    for (const auto& [key, v] : psnr_by)
        psnr_groups.push_back({key, median(v.first), median(v.second)});
    for (const auto& [key, v] : ssim_by)
        ssim_groups.push_back({key, median(v.first), median(v.second)});
    write_png(bar_chart(psnr_groups, "PSNR DB"), out / "psnr.png");
    write_png(bar_chart(ssim_groups, "MS-SSIM"), out / "ms_ssim.png");

    // difference-map grids from the example triplets, when present
    std::vector<RgbImage> panels;
    if (fs::exists(in / "examples")) {
        std::vector<fs::path> stems;
        for (const auto& p : fs::directory_iterator(in / "examples"))
            if (p.path().filename().string().ends_with("_source.f32")) stems.push_back(p.path());
        std::sort(stems.begin(), stems.end());
        for (const auto& sp : stems) {
            std::string base = sp.string();
            base.erase(base.size() - std::string("_source.f32").size());
            const Slice src = load_slice(sp);
            const Slice harm = load_slice(base + "_harmonized.f32");
            const Slice tgt = load_slice(base + "_target.f32");
            panels.push_back(slice_to_rgb(src));
            panels.push_back(slice_to_rgb(harm));
            panels.push_back(slice_to_rgb(tgt));
            panels.push_back(difference_to_rgb(src, tgt));
            panels.push_back(difference_to_rgb(harm, tgt));
        }
    }
    if (!panels.empty()) write_png(tile(panels, 5), out / "difference_grid.png");
    std::cout << "figures written to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contrast harmonization pipeline"};
    app.require_subcommand(1);

    CommonOpts common;
    bool force = false;
    std::string manifest_path, resume_path, checkpoint_path, subject, source_profile;
    std::string report_dir;

    auto add_common = [&](CLI::App* sub, bool needs_out = true) {
        sub->add_option("--config", common.config_path, "run configuration JSON");
        sub->add_option("--set", common.overrides, "dotted-key override, e.g. train.lr=2e-4");
        auto* o = sub->add_option("--out", common.out_dir, "output run directory");
        if (needs_out) o->required();
    };

    auto* gen = app.add_subcommand("gen-data", "render a synthetic traveling-subject cohort");
    add_common(gen);
    gen->add_flag("--force", force, "overwrite an existing dataset");

    auto* train = app.add_subcommand("train", "train the harmonization model");
    add_common(train);
    train->add_option("--manifest", manifest_path, "training manifest.jsonl")->required();
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    auto* harm = app.add_subcommand("harmonize", "contrast-swap a single image");
    add_common(harm);
    harm->add_option("--checkpoint", checkpoint_path)->required();
    harm->add_option("--manifest", manifest_path)->required();
    harm->add_option("--subject", subject)->required();
    harm->add_option("--source-profile", source_profile)->required();

    auto* eval = app.add_subcommand("evaluate", "run all evaluation protocols");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint_path)->required();
    eval->add_option("--manifest", manifest_path, "gen-data cohort manifest.jsonl")->required();

    auto* plot = app.add_subcommand("plot", "render PNG figures from evaluation reports");
    add_common(plot);
    plot->add_option("--report", report_dir, "evaluate output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(common, force);
        if (train->parsed()) return cmd_train(common, manifest_path, resume_path);
        if (harm->parsed())
            return cmd_harmonize(common, checkpoint_path, manifest_path, subject, source_profile);
        if (eval->parsed())
            return cmd_evaluate(common, checkpoint_path, manifest_path);
        if (plot->parsed()) return cmd_plot(common, report_dir);
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
