// Library walk-through on an in-memory fixture: split, tune two classifiers
// per view, fuse the views and vote.

#include <iostream>

#include "fusepipe/fusepipe.hpp"

using namespace fusepipe;

int main() {
    const auto data = synthetic::make({200, 8, 2.0, 2, 3});
    std::vector<LabeledDataset> views;
    for (const auto& v : data.views) views.push_back(make_labeled(v, data.labels));
    views.push_back(views[0].with_features(ensemble::fuse_features({views[0].features, views[1].features})));

    const SplitIndices idx = split_indices(views[0], {0.8, 42, true});
    const hpo::CvConfig cv{5, true, 42};
    const std::map<Kind, nlohmann::json> grids{
        {Kind::KNN, {{"n_neighbors", {1, 2, 3, 4}}}},
        {Kind::GaussianNB, {{"var_smoothing", {1e-9, 1e-6}}}},
        {Kind::RandomForest, {{"n_estimators", {50, 100}}, {"max_depth", {nullptr, 5}}}},
    };

    RunReport report;
    report.table = "single";
    std::map<std::string, std::vector<Labels>> predictions;
    Labels truth;
    for (const auto& view : views) {
        const auto train = view.subset(idx.train);
        const auto test = view.subset(idx.test);
        truth = test.labels;
        for (const auto& [kind, grid] : grids) {
            const auto result = hpo::grid_search(kind, hpo::grid_from_json(kind, grid), train, cv);
            const Labels pred = predict(*result.model, test.features);
            report.set(view.features.model_tag, std::string(to_string(kind)), accuracy(test.labels, pred));
            predictions[view.features.model_tag].push_back(pred);
        }
    }
    std::cout << make_table(report, TableFormat::Markdown) << "\n";

    const std::string best = ensemble::rank_feature_sets(report).front().tag;
    const Labels voted = ensemble::majority_vote(predictions[best], {1, 2, 3});
    std::cout << "vote on " << best << ": " << accuracy(truth, voted) << "\n";
}
