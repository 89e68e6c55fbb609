#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "fusepipe/hpo.hpp"
#include "support.hpp"

using namespace fusepipe;
using nlohmann::json;

namespace {

// Fold-by-fold accuracy of one spec, fitting each fold from scratch.
std::vector<double> direct_cv(const ClassifierSpec& spec, const LabeledDataset& ds, const hpo::CvConfig& cv) {
    std::vector<double> out;
    for (const auto& val : hpo::make_folds(ds, cv)) {
        std::vector<std::size_t> train;
        std::set<std::size_t> v(val.begin(), val.end());
        for (std::size_t i = 0; i < ds.rows(); ++i)
            if (!v.count(i)) train.push_back(i);
        const auto tr = ds.subset(train);
        const auto te = ds.subset(val);
        const auto model = fit_raw(spec, {tr.X(), tr.labels, ds.num_classes()});
        const auto pred = predict_raw(model, te.X());
        std::size_t hit = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == te.labels[i];
        out.push_back(static_cast<double>(hit) / static_cast<double>(pred.size()));
    }
    return out;
}

hpo::HyperGrid grid(Kind kind, json j) { return hpo::grid_from_json(kind, j); }

const LabeledDataset& noisy() {
    static const LabeledDataset ds = fptest::blobs(60, 3, 2, 1.2, 21);
    return ds;
}

} // namespace

TEST(Grid, Table4ProductSizes) {
    EXPECT_EQ(hpo::builtin_grid(Kind::GBDT).size(), 81u);
    EXPECT_EQ(hpo::expand_grid(hpo::builtin_grid(Kind::GBDT)).size(), 81u);
    for (Kind k : kAllKinds) {
        const auto g = hpo::builtin_grid(k);
        std::size_t product = 1;
        for (const auto& [key, v] : g.values) product *= v.size();
        const auto specs = hpo::expand_grid(g);
        EXPECT_EQ(specs.size(), product) << to_string(k);
        std::set<std::string> distinct;
        for (const auto& s : specs) distinct.insert(hpo::params_json(s));
        EXPECT_EQ(distinct.size(), product) << to_string(k);
    }
    EXPECT_EQ(hpo::expand_grid(grid(Kind::KNN, {{"n_neighbors", {3}}})).size(), 1u);
}

TEST(Grid, LastKeyVariesFastest) {
    const auto specs = hpo::expand_grid(grid(Kind::KNN, {{"p", {1, 2}}, {"n_neighbors", {1, 3, 5}}}));
    ASSERT_EQ(specs.size(), 6u);
    EXPECT_EQ(specs[0].params.at("n_neighbors"), 1);
    EXPECT_EQ(specs[0].params.at("p"), 1);
    EXPECT_EQ(specs[1].params.at("p"), 2);
    EXPECT_EQ(specs[2].params.at("n_neighbors"), 3);
}

TEST(Grid, EmptyListAndBadValues) {
    try {
        grid(Kind::KNN, {{"n_neighbors", json::array()}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyList);
    }
    EXPECT_THROW(grid(Kind::KNN, {{"n_neighbors", {0}}}), Error);
    EXPECT_THROW(grid(Kind::KNN, {{"colour", {1}}}), Error);
}

TEST(Folds, PartitionStratifiedDeterministic) {
    Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 20 + rng.below(200);
        const int K = 2 + static_cast<int>(rng.below(3));
        Labels y(n);
        for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::size_t>(K)));
        for (int c = 0; c < K; ++c)
            for (int r = 0; r < 5; ++r) y[static_cast<std::size_t>(c * 5 + r)] = c;
        const auto ds = fptest::dataset(Matrix::Zero(static_cast<Eigen::Index>(n), 1), y, K);
        const hpo::CvConfig cv{5, true, rng.next()};
        const auto folds = hpo::make_folds(ds, cv);
        EXPECT_EQ(folds, hpo::make_folds(ds, cv));
        std::vector<int> seen(n, 0);
        for (const auto& f : folds)
            for (std::size_t i : f) ++seen[i];
        EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
        const auto counts = ds.class_counts();
        for (const auto& f : folds) {
            std::vector<double> in(static_cast<std::size_t>(K), 0);
            for (std::size_t i : f) in[static_cast<std::size_t>(y[i])] += 1;
            for (int c = 0; c < K; ++c) {
                const double expected = static_cast<double>(counts[static_cast<std::size_t>(c)]) / 5.0;
                EXPECT_LT(std::fabs(in[static_cast<std::size_t>(c)] - expected), 1.0 + 1e-12);
            }
        }
    }
}

TEST(Folds, UnsatisfiableAndGroupedCopies) {
    const auto small = fptest::dataset(Matrix::Zero(8, 1), {0, 0, 0, 1, 1, 1, 1, 1}, 2);
    try {
        hpo::make_folds(small, {5, true, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnsatisfiableFolds);
    }
    EXPECT_NO_THROW(hpo::make_folds(small, {5, false, 1}));

    auto ds = fptest::dataset(Matrix::Zero(40, 1), Labels(40, 0), 2);
    for (std::size_t i = 0; i < 40; ++i) {
        ds.features.sample_ids[i] = "img" + std::to_string(i / 4) + "#r" + std::to_string(i % 4);
        ds.labels[i] = static_cast<int>((i / 4) % 2);
    }
    for (const auto& f : hpo::make_folds(ds, {5, true, 3})) {
        std::set<std::string> groups;
        for (std::size_t i : f) groups.insert(std::string(source_group(ds.features.sample_ids[i])));
        EXPECT_EQ(f.size(), groups.size() * 4);
    }
}

TEST(Search, RiggedGridPicksMemorisingNeighbour) {
    // 10 positives far from 40 negatives: 1-NN is perfect, 25 neighbours outvote every positive
    Matrix X(50, 1);
    Labels y(50);
    for (int i = 0; i < 50; ++i) {
        y[static_cast<std::size_t>(i)] = i % 5 == 0 ? 1 : 0;
        X(i, 0) = i + 1000.0 * y[static_cast<std::size_t>(i)];
    }
    const auto ds = fptest::dataset(X, y, 2);
    const hpo::CvConfig cv{5, true, 7};
    const auto r = hpo::grid_search(Kind::KNN, grid(Kind::KNN, {{"n_neighbors", {25, 1}}}), ds, cv);
    EXPECT_EQ(r.best_spec.params.at("n_neighbors"), 1);
    EXPECT_EQ(r.best_score, 1.0);
    for (const auto& e : r.ledger) {
        const auto want = direct_cv(e.spec, ds, cv);
        EXPECT_EQ(e.fold_scores, want);
    }
    EXPECT_DOUBLE_EQ(r.ledger[0].mean, 0.8);
    ASSERT_TRUE(r.model.has_value());
}

TEST(Search, SingleConfigWinsRegardless) {
    const auto r = hpo::grid_search(Kind::GaussianNB, grid(Kind::GaussianNB, {{"var_smoothing", {1e3}}}), noisy(), {});
    EXPECT_EQ(r.best_index, 0u);
    EXPECT_EQ(r.ledger.size(), 1u);
}

TEST(Search, EqualMeansPreferLowerStd) {
    std::vector<hpo::LedgerEntry> ledger(3);
    ledger[0].fold_scores = {1.0, 0.5};
    ledger[1].fold_scores = {0.75, 0.75};
    ledger[2].fold_scores = {0.75, 0.75};
    for (std::size_t i = 0; i < 3; ++i) {
        ledger[i].index = i;
        ledger[i].mean = hpo::mean_of(ledger[i].fold_scores);
        ledger[i].stddev = hpo::std_of(ledger[i].fold_scores);
    }
    EXPECT_EQ(hpo::select_best(ledger), 1u);
    ledger[0].fold_scores = {0.8, 0.8};
    ledger[0].mean = 0.8;
    ledger[0].stddev = 0;
    EXPECT_EQ(hpo::select_best(ledger), 0u);
    ledger[0].error = ErrorCode::NoConvergence;
    EXPECT_EQ(hpo::select_best(ledger), 1u);
}

TEST(Search, SharedTrainingMatchesIndependentFits) {
    const hpo::CvConfig cv{4, true, 9};
    const std::vector<std::pair<Kind, json>> grids{
        {Kind::RandomForest, {{"n_estimators", {3, 6}}, {"max_depth", json::array({nullptr, 2, 4})}}},
        {Kind::AdaBoost, {{"n_estimators", {5, 20}}, {"learning_rate", {0.5, 1.0}}}},
        {Kind::GBDT, {{"n_estimators", {0, 4, 12}}, {"max_depth", {2}}, {"subsample", {0.7, 1.0}}}},
        {Kind::KNN, {{"n_neighbors", {1, 3, 7}}, {"weights", {"uniform", "distance"}}, {"p", {1, 2}}}},
        {Kind::SvmRbf, {{"C", {0.1, 10.0}}, {"tol", {1e-3, 1e-5}}, {"max_iter", {-1, 5}}, {"class_weight", json::array({nullptr, "balanced"})}}},
        {Kind::SvmLinear, {{"C", {1.0}}, {"tol", {1e-2, 1e-4}}}},
        {Kind::MLP, {{"hidden_layer_sizes", json::array({json::array({4})})}, {"max_iter", {20}}}},
    };
    for (const auto& [kind, j] : grids) {
        const auto specs = hpo::expand_grid(grid(kind, j), 5);
        const auto ledger = hpo::evaluate_configs(specs, noisy(), cv, 1);
        ASSERT_EQ(ledger.size(), specs.size());
        for (std::size_t i = 0; i < specs.size(); ++i) {
            ASSERT_TRUE(ledger[i].ok()) << to_string(kind) << " " << ledger[i].message;
            EXPECT_EQ(ledger[i].fold_scores, direct_cv(specs[i], noisy(), cv)) << to_string(kind) << " " << hpo::params_json(specs[i]);
        }
    }
}

TEST(Search, BestScoreRecomputesFromScratch) {
    const hpo::CvConfig cv{5, true, 11};
    const auto r = hpo::grid_search(Kind::RandomForest,
                                    grid(Kind::RandomForest, {{"n_estimators", {5, 10}}, {"min_samples_leaf", {1, 4}}}), noisy(), cv);
    const auto scores = direct_cv(r.best_spec, noisy(), cv);
    EXPECT_NEAR(r.best_score, hpo::mean_of(scores), 1e-12);
    double top = 0;
    for (const auto& e : r.ledger) top = std::max(top, e.mean);
    EXPECT_EQ(r.best_score, top);
}

TEST(Search, ParallelLedgerEqualsSerial) {
    const auto specs = hpo::expand_grid(grid(Kind::RandomForest, {{"n_estimators", {2, 4}}, {"min_samples_split", {2, 5, 10}}}));
    const auto a = hpo::evaluate_configs(specs, noisy(), {}, 1);
    const auto b = hpo::evaluate_configs(specs, noisy(), {}, 8);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].fold_scores, b[i].fold_scores);
}

TEST(Search, LedgerCsvMarksSelection) {
    const auto r = hpo::grid_search(Kind::KNN, grid(Kind::KNN, {{"n_neighbors", {1, 3}}}), noisy(), {}, {1, false});
    const auto csv = hpo::ledger_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,status,mean,std,fold1,fold2,fold3,fold4,fold5,selected,params");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_NE(csv.find("\"{\"\"n_neighbors\"\":1}\""), std::string::npos);
    EXPECT_FALSE(r.model.has_value());
}
