#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "fusepipe/fusepipe.hpp"

namespace {

using namespace fusepipe;
namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string grid;
    std::string variant;
};

pipeline::PipelineConfig resolve(const Options& o) {
    require(!o.config.empty(), ErrorCode::ConfigInvalid, "--config is required");
    auto cfg = pipeline::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out.empty()) cfg.out = fs::absolute(o.out);
    if (!o.grid.empty()) {
        require(o.grid == "table4" || o.grid == "prose", ErrorCode::ConfigInvalid, "--grid must be table4 or prose");
        cfg.grid = o.grid;
    }
    return cfg;
}

std::vector<transforms::Variant> variants_of(const Options& o, const pipeline::PipelineConfig& cfg) {
    if (o.variant.empty()) return cfg.variants;
    return {transforms::parse_variant(o.variant)};
}

int exit_code(ErrorCode c) {
    switch (c) {
    case ErrorCode::ConfigInvalid: return 2;
    case ErrorCode::MissingArtifact: return 3;
    default: return 1;
    }
}

void make_synthetic(const fs::path& dir, const synthetic::SyntheticSpec& spec) {
    const auto data = synthetic::make(spec);
    nlohmann::json features = nlohmann::json::array();
    for (const auto& view : data.views) {
        const fs::path csv = dir / "features" / (view.model_tag + ".csv");
        write_labeled_csv(make_labeled(view, data.labels), csv);
        features.push_back("features/" + view.model_tag + ".csv");
        std::cout << "wrote " << csv.string() << "\n";
    }
    const nlohmann::json cfg = {{"schema_version", pipeline::kSchemaVersion},
                                {"dataset", "synthetic"},
                                {"features", features},
                                {"split", {{"train_fraction", 0.8}, {"stratified", true}}},
                                {"cv", {{"folds", 5}, {"stratified", true}}},
                                {"grid", "table4"},
                                {"seed", 42},
                                {"out", "out"}};
    write_file(dir / "config.json", cfg.dump(2) + "\n");
    std::cout << "wrote " << (dir / "config.json").string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fusepipe: deep-feature fusion and classifier ensemble experiments"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* sub, bool with_variant) {
        sub->add_option("--config", o.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "master seed (overrides config)");
        sub->add_option("--out", o.out, "output directory (overrides config)");
        sub->add_option("--grid", o.grid, "table4 | prose (overrides config)");
        if (with_variant)
            sub->add_option("--variant", o.variant, "simple | norm_pca | smote | norm_pca_smote (default: config list)");
    };

    auto* preprocess = app.add_subcommand("preprocess", "crop, resize and optionally augment images");
    auto* split = app.add_subcommand("split", "write the train/test split");
    auto* tune = app.add_subcommand("tune", "grid search every (feature set, classifier) pair");
    auto* train = app.add_subcommand("train", "fit tuned models and score single feature sets");
    auto* fuse = app.add_subcommand("fuse", "fuse the top feature sets and score them");
    auto* vote = app.add_subcommand("vote", "score majority votes of the top classifiers");
    auto* report = app.add_subcommand("report", "render tables from cached results only");
    auto* run = app.add_subcommand("pipeline", "run every stage");
    for (auto* s : {preprocess, split, tune, train, fuse, vote, report, run}) common(s, s != preprocess && s != split);

    auto* synth = app.add_subcommand("make-synthetic", "write the two-class Gaussian fixture and a config");
    std::string synth_dir = "synthetic";
    synthetic::SyntheticSpec spec;
    synth->add_option("--dir", synth_dir, "destination directory");
    synth->add_option("--n", spec.n, "samples");
    synth->add_option("--d", spec.d, "features per view");
    synth->add_option("--views", spec.views, "number of feature sets");
    synth->add_option("--separation", spec.separation, "class-mean distance per feature");
    synth->add_option("--seed", spec.seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            make_synthetic(synth_dir, spec);
            return 0;
        }
        const auto cfg = resolve(o);
        const auto variants = variants_of(o, cfg);
        pipeline::Runner runner(cfg);
        if (preprocess->parsed()) {
            runner.allow_only({"preprocess"});
            runner.preprocess();
        } else if (split->parsed()) {
            runner.allow_only({"split"});
            (void)runner.split();
        } else if (tune->parsed()) {
            runner.allow_only({"tune"});
            runner.tune_singles(variants);
        } else if (train->parsed()) {
            runner.allow_only({"train"});
            for (auto v : variants) runner.train(v);
        } else if (fuse->parsed()) {
            runner.allow_only({"fuse"});
            for (auto v : variants) runner.fuse(v);
        } else if (vote->parsed()) {
            runner.allow_only({"vote"});
            for (auto v : variants) runner.vote(v);
        } else if (report->parsed()) {
            runner.allow_only({"report"});
            for (const auto& p : runner.report(variants)) std::cout << p.string() << "\n";
        } else if (run->parsed()) {
            runner.run(variants);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
