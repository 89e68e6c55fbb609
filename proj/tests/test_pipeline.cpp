#include <gtest/gtest.h>

#include <sstream>

#include "fusepipe/pipeline.hpp"
#include "fusepipe/synthetic.hpp"
#include "support.hpp"

using namespace fusepipe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Three small views, three cheap classifiers with tiny grids.
fs::path small_study(const std::string& name, std::uint64_t seed = 42) {
    const fs::path dir = fptest::scratch(name);
    const auto data = synthetic::make({60, 4, 3.0, 3, 5});
    json features = json::array();
    for (const auto& v : data.views) {
        const auto labelled = make_labeled(v, data.labels);
        write_labeled_csv(labelled, dir / "features" / (v.model_tag + ".csv"));
        features.push_back("features/" + v.model_tag + ".csv");
    }
    write_file(dir / "grid.json", json{{"GaussianNB", {{"var_smoothing", {1e-9, 1e-3}}}},
                                       {"KNN", {{"n_neighbors", {1, 3, 5}}}},
                                       {"RFClassifier", {{"n_estimators", {5, 10}}, {"max_depth", {2}}}}}
                                      .dump());
    const json cfg = {{"schema_version", 1},
                      {"dataset", "tiny"},
                      {"features", features},
                      {"cv", {{"folds", 3}, {"stratified", true}}},
                      {"grid", "grid.json"},
                      {"classifiers", {"GaussianNB", "KNN", "RFClassifier"}},
                      {"transforms", {{"pca_variance", 0.9}, {"smote_k", 3}}},
                      {"seed", seed},
                      {"out", "out"}};
    write_file(dir / "config.json", cfg.dump(1));
    return dir;
}

std::map<std::string, std::string> tree_contents(const fs::path& root, const std::string& sub) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root / sub))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
    return out;
}

void run_all(const fs::path& dir) {
    std::ostringstream log;
    pipeline::Runner r(pipeline::load_config(dir / "config.json"), log);
    const auto cfg = r.config();
    r.run(cfg.variants);
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

} // namespace

TEST(Config, StrictKeysAndSchema) {
    const fs::path dir = fptest::scratch("cfg");
    const json base = {{"schema_version", 1}, {"features", {"a.csv"}}};
    EXPECT_NO_THROW(pipeline::parse_config(base, dir));
    json extra = base;
    extra["learning_rate"] = 0.1;
    EXPECT_EQ(code_of([&] { pipeline::parse_config(extra, dir); }), ErrorCode::ConfigInvalid);
    json nested = base;
    nested["cv"] = {{"folds", 5}, {"shuffle", true}};
    EXPECT_EQ(code_of([&] { pipeline::parse_config(nested, dir); }), ErrorCode::ConfigInvalid);
    json unversioned = base;
    unversioned.erase("schema_version");
    EXPECT_EQ(code_of([&] { pipeline::parse_config(unversioned, dir); }), ErrorCode::ConfigInvalid);
    json bad_kind = base;
    bad_kind["classifiers"] = {"Perceptron"};
    EXPECT_EQ(code_of([&] { pipeline::parse_config(bad_kind, dir); }), ErrorCode::ConfigInvalid);
    write_file(dir / "broken.json", "{ not json");
    EXPECT_EQ(code_of([&] { pipeline::load_config(dir / "broken.json"); }), ErrorCode::ConfigInvalid);
}

TEST(Config, HashIgnoresLocationAndOutput) {
    const json a = {{"schema_version", 1}, {"features", {"f/a.csv"}}, {"out", "x"}};
    json b = a;
    b["out"] = "y";
    EXPECT_EQ(pipeline::parse_config(a, "/tmp/one").hash(), pipeline::parse_config(b, "/tmp/two").hash());
    b["seed"] = 7;
    EXPECT_NE(pipeline::parse_config(a, "/tmp/one").hash(), pipeline::parse_config(b, "/tmp/one").hash());
}

TEST(Pipeline, StagesRefuseMissingInputs) {
    const auto dir = small_study("stages");
    std::ostringstream log;
    pipeline::Runner report(pipeline::load_config(dir / "config.json"), log);
    report.allow_only({"report"});
    EXPECT_EQ(code_of([&] { report.report({transforms::Variant::Simple}); }), ErrorCode::MissingArtifact);
    pipeline::Runner train(pipeline::load_config(dir / "config.json"), log);
    train.allow_only({"split", "train"});
    EXPECT_EQ(code_of([&] { train.train(transforms::Variant::Simple); }), ErrorCode::MissingArtifact);
}

TEST(Pipeline, FullRunWritesTwelveTablesDeterministically) {
    const auto one = small_study("run_one");
    const auto two = small_study("run_two");
    run_all(one);
    run_all(two);
    const auto a = tree_contents(one / "out", "reports");
    EXPECT_EQ(a, tree_contents(two / "out", "reports"));
    EXPECT_EQ(read_file(one / "out" / "manifest.json"), read_file(two / "out" / "manifest.json"));
    std::size_t tables = 0;
    for (const auto& [path, body] : a)
        if (path.ends_with(".md")) {
            ++tables;
            EXPECT_NE(body.find("| Average |"), std::string::npos) << path;
        }
    EXPECT_EQ(tables, 12u);
    EXPECT_EQ(a.size(), 36u);

    const auto single = report_from_json(json::parse(a.at("reports/simple/single.json")));
    EXPECT_EQ(single.rows.size(), 3u);
    EXPECT_EQ(single.columns, (std::vector<std::string>{"GaussianNB", "KNN", "RFClassifier"}));
    const auto fusion = report_from_json(json::parse(a.at("reports/simple/fusion.json")));
    EXPECT_EQ(fusion.rows.size(), 4u);

    const json manifest = json::parse(read_file(one / "out" / "manifest.json"));
    for (const auto& [rel, sha] : manifest.at("reports").items()) EXPECT_EQ(sha, sha256_hex(a.at(rel))) << rel;
}

TEST(Pipeline, ResumeRegeneratesDeletedArtifacts) {
    const auto dir = small_study("resume");
    run_all(dir);
    const auto before = tree_contents(dir / "out", "reports");
    const auto manifest = read_file(dir / "out" / "manifest.json");
    fs::remove(dir / "out" / "cells" / "simple" / "view_a" / "KNN.json");
    fs::remove_all(dir / "out" / "tune" / "simple" / "view_b");
    std::ostringstream log;
    pipeline::Runner partial(pipeline::load_config(dir / "config.json"), log);
    partial.allow_only({"report"});
    EXPECT_EQ(code_of([&] { partial.report(partial.config().variants); }), ErrorCode::MissingArtifact);
    run_all(dir);
    EXPECT_EQ(tree_contents(dir / "out", "reports"), before);
    EXPECT_EQ(read_file(dir / "out" / "manifest.json"), manifest);
}

TEST(Pipeline, SeedChangeInvalidatesCachedCells) {
    const auto dir = small_study("reseed");
    run_all(dir);
    json cfg = json::parse(read_file(dir / "config.json"));
    cfg["seed"] = 43;
    write_file(dir / "config.json", cfg.dump(1));
    std::ostringstream log;
    pipeline::Runner stale(pipeline::load_config(dir / "config.json"), log);
    stale.allow_only({"report"});
    EXPECT_EQ(code_of([&] { stale.report({transforms::Variant::Simple}); }), ErrorCode::MissingArtifact);
}
