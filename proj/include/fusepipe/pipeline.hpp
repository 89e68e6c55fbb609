#pragma once

// Declarative experiment runner: split, tune, per-variant train/evaluate,
// feature fusion, classifier voting and table rendering. Every stage writes
// its artifacts under the output directory, keyed by a hash of its inputs, and
// reuses them when the key matches.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fusepipe/classifiers/classifier.hpp"
#include "fusepipe/ensemble.hpp"
#include "fusepipe/evalreport.hpp"
#include "fusepipe/featureio.hpp"
#include "fusepipe/hash.hpp"
#include "fusepipe/hpo.hpp"
#include "fusepipe/imgprep.hpp"
#include "fusepipe/png_io.hpp"
#include "fusepipe/transforms.hpp"

namespace fusepipe::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

struct ImageStage {
    fs::path input_dir;
    fs::path output_dir;
    int target = 224;
    imgprep::CleanParams clean;
    bool augment = false;
};

struct PipelineConfig {
    std::string dataset = "dataset";
    std::vector<fs::path> features;
    std::vector<std::string> feature_names; // as written in the config
    std::optional<ImageStage> images;
    double train_fraction = 0.8;
    bool stratified_split = true;
    int folds = 5;
    bool stratified_folds = true;
    std::string grid = "table4"; // table4 | prose | path to a grid document
    std::vector<Kind> classifiers{std::begin(kAllKinds), std::end(kAllKinds)};
    std::vector<transforms::Variant> variants{std::begin(transforms::kAllVariants), std::end(transforms::kAllVariants)};
    double pca_variance = 0.95;
    std::size_t smote_k = 5;
    std::size_t top_feature_sets = 5;
    std::vector<int> fusion_sizes{2, 3};
    std::vector<int> vote_sizes{2, 3};
    bool retune_per_variant = false;
    std::uint64_t seed = 42;
    fs::path out = "out";
    fs::path base_dir = "."; // directory of the config file

    /// Everything that influences results, with paths made relative to the config directory.
    json normalized() const {
        json f = json::array();
        for (std::size_t i = 0; i < features.size(); ++i)
            f.push_back(i < feature_names.size() ? feature_names[i] : features[i].filename().string());
        json kinds = json::array();
        for (Kind k : classifiers) kinds.push_back(std::string(to_string(k)));
        json vars = json::array();
        for (auto v : variants) vars.push_back(std::string(transforms::to_string(v)));
        std::string grid_id = grid;
        if (grid != "table4" && grid != "prose" && fs::exists(grid)) grid_id = "sha256:" + sha256_hex(read_file(grid));
        return {{"schema_version", kSchemaVersion},
                {"dataset", dataset},
                {"features", f},
                {"split", {{"train_fraction", train_fraction}, {"stratified", stratified_split}}},
                {"cv", {{"folds", folds}, {"stratified", stratified_folds}}},
                {"grid", grid_id},
                {"classifiers", kinds},
                {"variants", vars},
                {"transforms", {{"pca_variance", pca_variance}, {"smote_k", smote_k}}},
                {"ensemble", {{"top_feature_sets", top_feature_sets}, {"fusion_sizes", fusion_sizes}, {"vote_sizes", vote_sizes}}},
                {"retune_per_variant", retune_per_variant},
                {"seed", seed}};
    }

    std::string hash() const { return sha256_hex(normalized().dump()); }
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    require(j.is_object(), ErrorCode::ConfigInvalid, where + " must be an object");
    for (const auto& [k, v] : j.items())
        require(allowed.count(k) > 0, ErrorCode::ConfigInvalid, "unknown key '" + k + "' in " + where);
}

template <class T>
T get(const json& j, const std::string& key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::ConfigInvalid, "key '" + key + "' in " + where + " has the wrong type");
    }
}

} // namespace detail

inline PipelineConfig parse_config(const json& j, const fs::path& base_dir) {
    using detail::get;
    detail::check_keys(j,
                       {"schema_version", "dataset", "features", "images", "split", "cv", "grid", "classifiers", "variants",
                        "transforms", "ensemble", "retune_per_variant", "seed", "out"},
                       "config");
    require(j.contains("schema_version") && j["schema_version"] == kSchemaVersion, ErrorCode::ConfigInvalid,
            "config must declare schema_version " + std::to_string(kSchemaVersion));
    PipelineConfig c;
    c.base_dir = base_dir;
    c.dataset = get<std::string>(j, "dataset", c.dataset, "config");
    require(j.contains("features") && j["features"].is_array() && !j["features"].empty(), ErrorCode::ConfigInvalid,
            "config needs a non-empty 'features' list");
    for (const auto& p : j["features"]) {
        require(p.is_string(), ErrorCode::ConfigInvalid, "feature entries must be paths");
        c.features.push_back(base_dir / p.get<std::string>());
        c.feature_names.push_back(p.get<std::string>());
    }
    if (j.contains("images")) {
        const json& im = j["images"];
        detail::check_keys(im, {"input_dir", "output_dir", "target", "threshold", "blur_radius", "morph_iters", "augment"},
                           "images");
        ImageStage s;
        require(im.contains("input_dir") && im.contains("output_dir"), ErrorCode::ConfigInvalid,
                "images needs input_dir and output_dir");
        s.input_dir = base_dir / get<std::string>(im, "input_dir", "", "images");
        s.output_dir = base_dir / get<std::string>(im, "output_dir", "", "images");
        s.target = get<int>(im, "target", 224, "images");
        s.clean.threshold = get<int>(im, "threshold", s.clean.threshold, "images");
        s.clean.blur_radius = get<int>(im, "blur_radius", s.clean.blur_radius, "images");
        s.clean.morph_iters = get<int>(im, "morph_iters", s.clean.morph_iters, "images");
        s.augment = get<bool>(im, "augment", false, "images");
        c.images = s;
    }
    if (j.contains("split")) {
        detail::check_keys(j["split"], {"train_fraction", "stratified"}, "split");
        c.train_fraction = get<double>(j["split"], "train_fraction", c.train_fraction, "split");
        c.stratified_split = get<bool>(j["split"], "stratified", c.stratified_split, "split");
    }
    if (j.contains("cv")) {
        detail::check_keys(j["cv"], {"folds", "stratified"}, "cv");
        c.folds = get<int>(j["cv"], "folds", c.folds, "cv");
        c.stratified_folds = get<bool>(j["cv"], "stratified", c.stratified_folds, "cv");
        require(c.folds >= 2, ErrorCode::ConfigInvalid, "cv.folds must be >= 2");
    }
    if (j.contains("grid")) {
        const std::string g = get<std::string>(j, "grid", "table4", "config");
        c.grid = (g == "table4" || g == "prose") ? g : (base_dir / g).string();
    }
    if (j.contains("classifiers")) {
        c.classifiers.clear();
        for (const auto& k : j["classifiers"]) {
            try {
                c.classifiers.push_back(parse_kind(k.get<std::string>()));
            } catch (const Error& e) {
                fail(ErrorCode::ConfigInvalid, e.what());
            }
        }
        require(!c.classifiers.empty(), ErrorCode::ConfigInvalid, "classifiers list is empty");
    }
    if (j.contains("variants")) {
        c.variants.clear();
        for (const auto& v : j["variants"]) c.variants.push_back(transforms::parse_variant(v.get<std::string>()));
        require(!c.variants.empty(), ErrorCode::ConfigInvalid, "variants list is empty");
    }
    if (j.contains("transforms")) {
        detail::check_keys(j["transforms"], {"pca_variance", "smote_k"}, "transforms");
        c.pca_variance = get<double>(j["transforms"], "pca_variance", c.pca_variance, "transforms");
        c.smote_k = get<std::size_t>(j["transforms"], "smote_k", c.smote_k, "transforms");
    }
    if (j.contains("ensemble")) {
        detail::check_keys(j["ensemble"], {"top_feature_sets", "fusion_sizes", "vote_sizes"}, "ensemble");
        c.top_feature_sets = get<std::size_t>(j["ensemble"], "top_feature_sets", c.top_feature_sets, "ensemble");
        c.fusion_sizes = get<std::vector<int>>(j["ensemble"], "fusion_sizes", c.fusion_sizes, "ensemble");
        c.vote_sizes = get<std::vector<int>>(j["ensemble"], "vote_sizes", c.vote_sizes, "ensemble");
        for (int s : c.fusion_sizes) require(s == 2 || s == 3, ErrorCode::ConfigInvalid, "fusion sizes must be 2 or 3");
        for (int s : c.vote_sizes) require(s == 2 || s == 3, ErrorCode::ConfigInvalid, "vote sizes must be 2 or 3");
        require(c.top_feature_sets >= 1, ErrorCode::ConfigInvalid, "top_feature_sets must be >= 1");
    }
    c.retune_per_variant = get<bool>(j, "retune_per_variant", false, "config");
    c.seed = get<std::uint64_t>(j, "seed", c.seed, "config");
    c.out = base_dir / get<std::string>(j, "out", "out", "config");
    return c;
}

inline PipelineConfig load_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigInvalid, "config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j, fs::absolute(path).parent_path());
}

/// Table names in output order.
inline constexpr const char* kTables[] = {"single", "fusion", "vote"};

class Runner {
public:
    explicit Runner(PipelineConfig cfg, std::ostream& log = std::cerr) : cfg_(std::move(cfg)), log_(log) {}

    const PipelineConfig& config() const noexcept { return cfg_; }

    /// Restricts which stages may produce missing artifacts; empty allows all.
    void allow_only(std::set<std::string> stages) { allowed_ = std::move(stages); }

    // ---- preprocess ------------------------------------------------------
    void preprocess() {
        if (!cfg_.images) {
            note("preprocess", "no image stage configured; feature files are used as given");
            return;
        }
        const ImageStage& s = *cfg_.images;
        require(fs::is_directory(s.input_dir), ErrorCode::MissingArtifact, "image directory " + s.input_dir.string() + " not found");
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(s.input_dir))
            if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        std::size_t written = 0;
        for (const auto& f : files) {
            const fs::path rel = fs::relative(f, s.input_dir);
            const imgprep::GrayImage cropped = imgprep::crop_and_resize(imgprep::read_png(f), s.target, s.clean);
            if (!s.augment) {
                const fs::path dst = s.output_dir / rel;
                if (!fs::exists(dst)) imgprep::write_png(cropped, dst), ++written;
                continue;
            }
            for (const auto& a : imgprep::augment(std::vector<imgprep::GrayImage>{cropped})) {
                fs::path dst = s.output_dir / rel;
                if (a.label() != "r0") dst.replace_filename(rel.stem().string() + "#" + a.label() + ".png");
                if (!fs::exists(dst)) imgprep::write_png(a.image, dst), ++written;
            }
        }
        note("preprocess", std::to_string(files.size()) + " images, " + std::to_string(written) + " outputs written");
    }

    // ---- split -----------------------------------------------------------
    const SplitIndices& split() {
        if (split_) return *split_;
        const fs::path path = out("split.json");
        const LabeledDataset& ref = dataset(single_tags().front());
        const SplitSpec spec{cfg_.train_fraction, derive_seed(cfg_.seed, "split"), cfg_.stratified_split};
        const SplitIndices idx = split_indices(ref, spec);
        if (!fs::exists(path)) need("split", path);
        json j = {{"train", ids_of(ref, idx.train)}, {"test", ids_of(ref, idx.test)}};
        write_if_changed(path, j.dump(1) + "\n");
        split_ = idx;
        note("split", std::to_string(idx.train.size()) + " train / " + std::to_string(idx.test.size()) + " test");
        return *split_;
    }

    // ---- tune ------------------------------------------------------------
    /// λ* for (tag, kind), tuned on the training split of the tuning variant.
    ClassifierSpec tuned(const std::string& tag, Kind kind, transforms::Variant variant) {
        const auto tv = cfg_.retune_per_variant ? variant : transforms::Variant::Simple;
        const std::string key = tune_key(tag, kind, tv);
        const fs::path path = out("tune/" + std::string(transforms::to_string(tv)) + "/" + tag + "/" +
                                  std::string(to_string(kind)) + ".json");
        if (auto cached = read_keyed(path, key)) return spec_from(kind, cached->at("best_params"), cached->at("seed"));
        need(is_fused(tag) ? "fuse" : "tune", path);

        hpo::CvConfig cv{cfg_.folds, cfg_.stratified_folds, derive_seed(cfg_.seed, "cv")};
        const LabeledDataset& train = prepared(tv, tag).first;
        hpo::SearchOptions opt;
        opt.refit = false;
        const hpo::SearchResult r = hpo::grid_search(kind, grid(kind), train, cv, opt, model_seed(kind));
        json params = json::object();
        for (const auto& [k, v] : r.best_spec.params) params[k] = v;
        std::size_t failed = 0;
        for (const auto& e : r.ledger) failed += !e.ok();
        const json doc = {{"key", key},          {"tag", tag},
                          {"kind", std::string(to_string(kind))},
                          {"best_index", r.best_index}, {"best_score", r.best_score},
                          {"best_params", params},      {"seed", r.best_spec.seed},
                          {"configs", r.ledger.size()}, {"failed", failed}};
        write_file(fs::path(path).replace_extension(".ledger.csv"), hpo::ledger_csv(r));
        write_file(out("timing/tune/" + std::string(transforms::to_string(tv)) + "/" + tag + "/" +
                       std::string(to_string(kind)) + ".csv"),
                   hpo::timing_csv(r));
        write_file(path, doc.dump(1) + "\n");
        note("tune", tag + " " + std::string(to_string(kind)) + ": " + std::to_string(r.ledger.size()) +
                         " configs, best cv " + fixed4(r.best_score));
        return r.best_spec;
    }

    void tune_singles(const std::vector<transforms::Variant>& variants) {
        std::vector<transforms::Variant> tvs{transforms::Variant::Simple};
        if (cfg_.retune_per_variant) tvs = variants;
        for (auto tv : tvs)
            for (const auto& tag : single_tags())
                for (Kind k : cfg_.classifiers) (void)tuned(tag, k, tv);
    }

    // ---- train / evaluate --------------------------------------------------
    /// Test accuracy of λ* for (variant, tag, kind); cached.
    json cell(transforms::Variant v, const std::string& tag, Kind kind, bool compute = true) {
        const std::string vname(transforms::to_string(v));
        const fs::path path = out("cells/" + vname + "/" + tag + "/" + std::string(to_string(kind)) + ".json");
        const std::string key = sha256_hex(json{{"tune", tune_key(tag, kind, cfg_.retune_per_variant ? v : transforms::Variant::Simple)},
                                                {"variant", vname},
                                                {"transforms", variant_options_json()}}
                                               .dump());
        if (auto cached = read_keyed(path, key)) return *cached;
        require(compute, ErrorCode::MissingArtifact,
                "cell " + path.string() + " is missing or stale (run train/fuse first)");
        need(is_fused(tag) ? "fuse" : "train", path);
        const ClassifierSpec spec = tuned(tag, kind, v);
        const auto& [train, test] = prepared(v, tag);
        const TrainedModel model = fit(spec, train);
        const Labels pred = predict(model, test.features);
        const double acc = accuracy(test.labels, pred);
        save_model(model, out("models/" + vname + "/" + tag + "/" + std::string(to_string(kind)) + ".json"));
        const json doc = {{"key", key},
                          {"variant", vname},
                          {"tag", tag},
                          {"kind", std::string(to_string(kind))},
                          {"accuracy", acc},
                          {"n_test", pred.size()},
                          {"predictions", pred}};
        write_file(path, doc.dump() + "\n");
        return doc;
    }

    RunReport single_report(transforms::Variant v, bool compute = true) {
        RunReport r = blank_report(v, "single");
        for (const auto& tag : single_tags())
            for (Kind k : cfg_.classifiers) r.set(tag, std::string(to_string(k)), cell(v, tag, k, compute).at("accuracy"));
        return r;
    }

    void train(transforms::Variant v) {
        const RunReport r = single_report(v, true);
        note("train", std::string(transforms::to_string(v)) + ": " + std::to_string(r.cells.size()) + " cells");
    }

    // ---- fuse ------------------------------------------------------------
    std::vector<std::vector<std::string>> fusion_sets(transforms::Variant v, bool compute = true) {
        const auto ranking = ensemble::rank_feature_sets(single_report(v, compute));
        require(ranking.size() >= 3, ErrorCode::ConfigInvalid, "feature fusion needs at least three feature sets");
        std::vector<std::vector<std::string>> out;
        for (auto& f : ensemble::enumerate_fusions(ensemble::top_tags(ranking, 3)))
            if (std::find(cfg_.fusion_sizes.begin(), cfg_.fusion_sizes.end(), static_cast<int>(f.size())) !=
                cfg_.fusion_sizes.end())
                out.push_back(std::move(f));
        return out;
    }

    RunReport fusion_report(transforms::Variant v, bool compute = true) {
        RunReport r = blank_report(v, "fusion");
        for (const auto& parts : fusion_sets(v, compute)) {
            const std::string tag = ensemble::join(parts);
            if (compute) register_fusion(parts);
            for (Kind k : cfg_.classifiers) r.set(tag, std::string(to_string(k)), cell(v, tag, k, compute).at("accuracy"));
        }
        return r;
    }

    void fuse(transforms::Variant v) {
        const RunReport r = fusion_report(v, true);
        note("fuse", std::string(transforms::to_string(v)) + ": " + std::to_string(r.rows.size()) + " fused sets");
    }

    // ---- vote ------------------------------------------------------------
    RunReport vote_report(transforms::Variant v, bool compute = true) {
        const RunReport single = single_report(v, compute);
        const auto sets = ensemble::top_tags(ensemble::rank_feature_sets(single), cfg_.top_feature_sets);
        const std::size_t k = std::min<std::size_t>(3, cfg_.classifiers.size());
        const auto top = ensemble::rank_classifiers(single, k, sets);
        require(top.size() == 3, ErrorCode::ConfigInvalid, "classifier voting needs at least three classifiers");
        RunReport r = blank_report(v, "vote");
        const std::string vname(transforms::to_string(v));
        for (const auto& e : ensemble::vote_combinations(top)) {
            if (std::find(cfg_.vote_sizes.begin(), cfg_.vote_sizes.end(), static_cast<int>(e.members.size())) ==
                cfg_.vote_sizes.end())
                continue;
            for (const auto& tag : sets) {
                const fs::path path = out("cells/" + vname + "/vote/" + tag + "/" + e.name() + ".json");
                std::vector<json> members;
                json keys = json::array();
                for (const auto& m : e.members) {
                    members.push_back(cell(v, tag, parse_kind(m), compute));
                    keys.push_back(members.back().at("key"));
                }
                const std::string key = sha256_hex(json{{"members", keys}, {"ranks", e.ranks}}.dump());
                std::optional<json> doc = read_keyed(path, key);
                if (!doc) {
                    require(compute, ErrorCode::MissingArtifact, "vote cell " + path.string() + " has not been computed");
                    need("vote", path);
                    std::vector<Labels> preds;
                    for (const auto& m : members) preds.push_back(m.at("predictions").get<Labels>());
                    const Labels voted = ensemble::majority_vote(preds, e.ranks);
                    const double acc = accuracy(prepared(v, tag).second.labels, voted);
                    doc = json{{"key", key}, {"members", e.members}, {"ranks", e.ranks}, {"accuracy", acc}, {"predictions", voted}};
                    write_file(path, doc->dump() + "\n");
                }
                r.set(e.name(), tag, doc->at("accuracy"));
            }
        }
        return r;
    }

    void vote(transforms::Variant v) {
        const RunReport r = vote_report(v, true);
        note("vote", std::string(transforms::to_string(v)) + ": " + std::to_string(r.rows.size()) + " ensembles");
    }

    // ---- report ----------------------------------------------------------
    /// Renders every table from cached cells only.
    std::vector<fs::path> report(const std::vector<transforms::Variant>& variants) {
        std::vector<fs::path> written;
        json reports = json::object();
        for (auto v : variants) {
            const std::string vname(transforms::to_string(v));
            const RunReport single = single_report(v, false);
            const auto ranking = ensemble::rank_feature_sets(single);
            std::set<std::string> starred;
            for (const auto& t : ensemble::top_tags(ranking, 3)) starred.insert(t);
            const RunReport tables[] = {single, fusion_report(v, false), vote_report(v, false)};
            for (const RunReport& r : tables) {
                const fs::path stem = out("reports/" + vname + "/" + r.table);
                const std::string md = "# " + cfg_.dataset + " / " + vname + " / " + r.table + "\n\n" +
                                       make_table(r, TableFormat::Markdown, r.table == "single" ? starred : std::set<std::string>{});
                const std::string csv = make_table(r, TableFormat::Csv, r.table == "single" ? starred : std::set<std::string>{});
                const std::string js = to_json(r).dump(1) + "\n";
                for (const auto& [ext, body] : {std::pair{".md", md}, std::pair{".csv", csv}, std::pair{".json", js}}) {
                    const fs::path p = fs::path(stem).concat(ext);
                    write_file(p, body);
                    written.push_back(p);
                    reports[fs::relative(p, cfg_.out).generic_string()] = sha256_hex(body);
                }
            }
        }
        write_manifest(variants, reports);
        written.push_back(out("manifest.json"));
        note("report", std::to_string(written.size()) + " files written");
        return written;
    }

    void run(const std::vector<transforms::Variant>& variants) {
        preprocess();
        (void)split();
        tune_singles(variants);
        for (auto v : variants) train(v);
        for (auto v : variants) fuse(v);
        for (auto v : variants) vote(v);
        (void)report(variants);
    }

    std::vector<std::string> single_tags() {
        load_features();
        return single_tags_;
    }

    /// Full labelled dataset for a single or fused tag.
    const LabeledDataset& dataset(const std::string& tag) {
        load_features();
        const auto it = data_.find(tag);
        if (it != data_.end()) return it->second;
        const auto parts = split_tag(tag);
        require(parts.size() >= 2, ErrorCode::MissingArtifact, "unknown feature set '" + tag + "'");
        register_fusion(parts);
        return data_.at(tag);
    }

    /// (train, test) of a tag after the variant's transforms.
    const std::pair<LabeledDataset, LabeledDataset>& prepared(transforms::Variant v, const std::string& tag) {
        const auto key = std::make_pair(v, tag);
        if (auto it = prepared_.find(key); it != prepared_.end()) return it->second;
        const LabeledDataset& full = dataset(tag);
        const SplitIndices& idx = split();
        const LabeledDataset train = full.subset(idx.train);
        const LabeledDataset test = full.subset(idx.test);
        const auto fv = transforms::FittedVariant::fit(train, v, variant_options());
        return prepared_.emplace(key, std::make_pair(fv.train(), fv.apply(test))).first->second;
    }

private:
    fs::path out(const std::string& rel) const { return cfg_.out / rel; }

    static bool is_fused(const std::string& tag) { return tag.find('+') != std::string::npos; }

    void need(const std::string& stage, const fs::path& artifact) const {
        require(allowed_.empty() || allowed_.count(stage) > 0, ErrorCode::MissingArtifact,
                "missing " + artifact.string() + " (produced by the '" + stage + "' stage)");
    }

    void note(const std::string& stage, const std::string& msg) { log_ << "[" << stage << "] " << msg << std::endl; }

    static std::vector<std::string> ids_of(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
        std::vector<std::string> out;
        for (std::size_t r : rows) out.push_back(ds.features.sample_ids[r]);
        return out;
    }

    static std::vector<std::string> split_tag(const std::string& tag) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            const auto p = tag.find('+', start);
            out.push_back(tag.substr(start, p - start));
            if (p == std::string::npos) break;
            start = p + 1;
        }
        return out;
    }

    static void write_if_changed(const fs::path& p, const std::string& body) {
        if (fs::exists(p) && read_file(p) == body) return;
        write_file(p, body);
    }

    static std::optional<json> read_keyed(const fs::path& p, const std::string& key) {
        if (!fs::exists(p)) return std::nullopt;
        try {
            json j = json::parse(read_file(p));
            if (j.value("key", "") == key) return j;
        } catch (const json::exception&) {
        }
        return std::nullopt;
    }

    void load_features() {
        if (!single_tags_.empty()) return;
        for (const auto& path : cfg_.features) {
            require(fs::exists(path), ErrorCode::MissingArtifact,
                    "feature file " + path.string() + " not found (run the external extraction stage)");
            LabeledDataset ds = read_labeled_csv(path);
            const std::string tag = ds.features.model_tag;
            require(!data_.count(tag), ErrorCode::ConfigInvalid, "feature set '" + tag + "' listed twice");
            if (!single_tags_.empty()) {
                const LabeledDataset& ref = data_.at(single_tags_.front());
                require(ds.features.sample_ids == ref.features.sample_ids && ds.labels == ref.labels &&
                            ds.class_names == ref.class_names,
                        ErrorCode::RowMisalignment, "feature set '" + tag + "' does not share samples and labels with '" +
                                                        single_tags_.front() + "'");
            }
            data_key_[tag] = sha256_file(path);
            file_of_[tag] = single_tags_.size() < cfg_.feature_names.size() ? cfg_.feature_names[single_tags_.size()]
                                                                             : path.filename().string();
            data_.emplace(tag, std::move(ds));
            single_tags_.push_back(tag);
        }
    }

    void register_fusion(const std::vector<std::string>& parts) {
        const std::string tag = ensemble::join(parts);
        if (data_.count(tag)) return;
        std::vector<const FeatureMatrix*> src;
        std::string key = "fuse";
        for (const auto& p : parts) {
            require(data_.count(p), ErrorCode::MissingArtifact, "unknown feature set '" + p + "'");
            src.push_back(&data_.at(p).features);
            key += ":" + data_key_.at(p);
        }
        data_.emplace(tag, data_.at(parts.front()).with_features(ensemble::fuse_features(src)));
        data_key_[tag] = sha256_hex(key);
    }

    std::uint64_t model_seed(Kind k) const { return derive_seed(cfg_.seed, "model/" + std::string(to_string(k))); }

    transforms::VariantOptions variant_options() const {
        return {cfg_.pca_variance, cfg_.smote_k, derive_seed(cfg_.seed, "smote")};
    }

    json variant_options_json() const {
        const auto o = variant_options();
        return {{"pca_variance", o.pca_variance}, {"smote_k", o.smote_k}, {"seed", o.seed}};
    }

    const json& grids() {
        if (grids_.is_null()) {
            if (cfg_.grid == "table4" || cfg_.grid == "prose") grids_ = grids::by_name(cfg_.grid);
            else {
                require(fs::exists(cfg_.grid), ErrorCode::MissingArtifact, "grid file " + cfg_.grid + " not found");
                try {
                    grids_ = json::parse(read_file(cfg_.grid));
                } catch (const json::exception& e) {
                    fail(ErrorCode::ConfigInvalid, "grid file is not valid JSON: " + std::string(e.what()));
                }
            }
        }
        return grids_;
    }

    hpo::HyperGrid grid(Kind k) {
        const std::string name(to_string(k));
        require(grids().contains(name), ErrorCode::ConfigInvalid, "grid document has no entry for " + name);
        return hpo::grid_from_json(k, grids().at(name));
    }

    std::string tune_key(const std::string& tag, Kind kind, transforms::Variant tv) {
        (void)dataset(tag);
        (void)split();
        return sha256_hex(json{{"data", data_key_.at(tag)},
                               {"split", sha256_file(out("split.json"))},
                               {"grid", grids().at(std::string(to_string(kind)))},
                               {"cv", {cfg_.folds, cfg_.stratified_folds, derive_seed(cfg_.seed, "cv")}},
                               {"variant", std::string(transforms::to_string(tv))},
                               {"transforms", tv == transforms::Variant::Simple ? json(nullptr) : variant_options_json()},
                               {"seed", model_seed(kind)},
                               {"version", kVersion}}
                              .dump());
    }

    static ClassifierSpec spec_from(Kind kind, const json& params, const json& seed) {
        ClassifierSpec s{kind, {}, seed.get<std::uint64_t>()};
        for (const auto& [k, v] : params.items()) s.params[k] = v;
        return s;
    }

    RunReport blank_report(transforms::Variant v, const std::string& table) const {
        RunReport r;
        r.dataset = cfg_.dataset;
        r.variant = std::string(transforms::to_string(v));
        r.table = table;
        r.seed = cfg_.seed;
        r.config_hash = cfg_.hash();
        return r;
    }

    void write_manifest(const std::vector<transforms::Variant>& variants, const json& reports) {
        json features = json::array();
        for (const auto& tag : single_tags()) {
            const auto& ds = data_.at(tag);
            features.push_back({{"tag", tag},
                                {"file", file_of_.at(tag)},
                                {"sha256", data_key_.at(tag)},
                                {"n", ds.rows()},
                                {"embed_dim", ds.cols()}});
        }
        json tuned_doc = json::object();
        json fusions = json::object();
        json votes = json::object();
        std::set<std::string> tags;
        for (auto v : variants) {
            const std::string vname(transforms::to_string(v));
            json f = json::array();
            for (const auto& parts : fusion_sets(v, false)) {
                f.push_back(ensemble::join(parts));
                tags.insert(ensemble::join(parts));
            }
            fusions[vname] = f;
            const RunReport single = single_report(v, false);
            const auto sets = ensemble::top_tags(ensemble::rank_feature_sets(single), cfg_.top_feature_sets);
            votes[vname] = {{"feature_sets", sets}, {"classifiers", ensemble::rank_classifiers(single, 3, sets)}};
        }
        for (const auto& t : single_tags()) tags.insert(t);
        std::vector<transforms::Variant> tvs{transforms::Variant::Simple};
        if (cfg_.retune_per_variant) tvs = variants;
        for (auto tv : tvs)
            for (const auto& tag : tags)
                for (Kind k : cfg_.classifiers) {
                    const fs::path p = out("tune/" + std::string(transforms::to_string(tv)) + "/" + tag + "/" +
                                           std::string(to_string(k)) + ".json");
                    require(fs::exists(p), ErrorCode::MissingArtifact, "tuning result " + p.string() + " missing");
                    const json t = json::parse(read_file(p));
                    tuned_doc[std::string(transforms::to_string(tv))][tag][std::string(to_string(k))] = {
                        {"params", t.at("best_params")}, {"cv_accuracy", t.at("best_score")}, {"seed", t.at("seed")}};
                }
        json seeds = {{"master", cfg_.seed},
                      {"split", derive_seed(cfg_.seed, "split")},
                      {"cv", derive_seed(cfg_.seed, "cv")},
                      {"smote", derive_seed(cfg_.seed, "smote")}};
        for (Kind k : cfg_.classifiers) seeds["model"][std::string(to_string(k))] = model_seed(k);
        const json manifest = {{"software", "fusepipe"},
                               {"version", kVersion},
                               {"config", cfg_.normalized()},
                               {"config_hash", cfg_.hash()},
                               {"seeds", seeds},
                               {"features", features},
                               {"split_sha256", sha256_file(out("split.json"))},
                               {"tuned", tuned_doc},
                               {"fusions", fusions},
                               {"votes", votes},
                               {"reports", reports}};
        write_file(out("manifest.json"), manifest.dump(1) + "\n");
    }

    PipelineConfig cfg_;
    std::ostream& log_;
    std::vector<std::string> single_tags_;
    std::map<std::string, LabeledDataset> data_;
    std::map<std::string, std::string> data_key_;
    std::map<std::string, std::string> file_of_;
    std::optional<SplitIndices> split_;
    std::map<std::pair<transforms::Variant, std::string>, std::pair<LabeledDataset, LabeledDataset>> prepared_;
    json grids_;
    std::set<std::string> allowed_;
};

} // namespace fusepipe::pipeline
