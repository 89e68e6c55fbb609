#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "fusepipe/featureio.hpp"
#include "support.hpp"

using namespace fusepipe;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

LabeledDataset sized(std::size_t n0, std::size_t n1) {
    const std::size_t n = n0 + n1;
    Matrix X(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) X(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    std::vector<int> y(n, 1);
    for (std::size_t i = 0; i < n0; ++i) y[i * n / n0] = 0;
    return fptest::dataset(X, y, 2);
}

} // namespace

TEST(FeatureCsv, RoundTripIsLossless) {
    Rng rng(1);
    FeatureMatrix fm;
    fm.model_tag = "m";
    fm.sample_ids = {"a", "b", "c"};
    fm.values.resize(3, 4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) fm.values(i, j) = (rng.uniform() - 0.5) * std::pow(10.0, j * 7 - 10);
    fm.values(0, 0) = 0.1;
    fm.values(1, 1) = -1e308;
    const auto dir = fptest::scratch("csv");
    write_feature_csv(fm, dir / "m.csv");
    const auto back = read_feature_csv(dir / "m.csv");
    EXPECT_EQ(back, fm);
    EXPECT_TRUE(std::filesystem::exists(dir / "m.csv.manifest.json"));
}

TEST(FeatureCsv, LabeledRoundTrip) {
    auto ds = fptest::blobs(12, 3, 3, 2.0, 4);
    ds.class_names = {"glioma", "meningioma", "none"};
    ds.features.model_tag = "vit_x";
    const auto dir = fptest::scratch("csv_labeled");
    write_labeled_csv(ds, dir / "x.csv");
    const auto back = read_labeled_csv(dir / "x.csv");
    EXPECT_EQ(back.features, ds.features);
    EXPECT_EQ(back.labels, ds.labels);
    EXPECT_EQ(back.class_names, ds.class_names);
}

TEST(FeatureCsv, Errors) {
    EXPECT_EQ(code_of([] { (void)parse_feature_csv("sample_id,label,f0,f1,f2,f3\na,,1,2,3\n", "m"); }), ErrorCode::RaggedRow);
    EXPECT_EQ(code_of([] { (void)parse_feature_csv("sample_id,label,f0\na,,NaN\n", "m"); }), ErrorCode::NonFiniteValue);
    EXPECT_EQ(code_of([] { (void)parse_feature_csv("id,label,f0\na,,1\n", "m"); }), ErrorCode::MalformedHeader);
    EXPECT_EQ(code_of([] { (void)parse_feature_csv("sample_id,label,f1\na,,1\n", "m"); }), ErrorCode::MalformedHeader);
    EXPECT_EQ(code_of([] { (void)parse_feature_csv("sample_id,label,f0\na,,1\na,,2\n", "m"); }), ErrorCode::DuplicateSampleId);
}

TEST(FeatureCsv, ManifestHashIsChecked) {
    FeatureMatrix fm;
    fm.model_tag = "m";
    fm.sample_ids = {"a"};
    fm.values = Matrix::Ones(1, 2);
    const auto dir = fptest::scratch("csv_hash");
    write_feature_csv(fm, dir / "m.csv");
    write_file(dir / "m.csv", read_file(dir / "m.csv") + "b,,1,2\n");
    EXPECT_EQ(code_of([&] { (void)read_feature_csv(dir / "m.csv"); }), ErrorCode::Io);
}

TEST(Split, TableTwoSizes) {
    for (bool strat : {true, false}) {
        const auto small = split_indices(sized(98, 155), {0.8, 42, strat});
        EXPECT_EQ(small.train.size(), 202u);
        EXPECT_EQ(small.test.size(), 51u);
        const auto large = split_indices(sized(1500, 1500), {0.8, 42, strat});
        EXPECT_EQ(large.train.size(), 2400u);
        EXPECT_EQ(large.test.size(), 600u);
    }
}

TEST(Split, EveryCompositionOf253GivesTwoHundredTwo) {
    for (std::size_t n0 = 2; n0 <= 251; ++n0) {
        const auto idx = split_indices(sized(n0, 253 - n0), {0.8, 7, true});
        ASSERT_EQ(idx.train.size(), 202u) << n0;
    }
}

TEST(Split, PartitionStratifiedDeterministic) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 20 + rng.below(200);
        const int k = 2 + static_cast<int>(rng.below(3));
        Matrix X = Matrix::Zero(static_cast<Eigen::Index>(n), 1);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % static_cast<std::size_t>(k));
        rng.shuffle(y);
        const auto ds = fptest::dataset(X, y, k);
        const double f = 0.5 + 0.4 * rng.uniform();
        const SplitSpec spec{f, rng.below(1000), true};
        const auto a = split_indices(ds, spec);
        const auto b = split_indices(ds, spec);
        EXPECT_EQ(a.train, b.train);
        std::set<std::size_t> all(a.train.begin(), a.train.end());
        for (auto t : a.test) EXPECT_TRUE(all.insert(t).second);
        EXPECT_EQ(all.size(), n);
        const auto counts = ds.class_counts();
        std::vector<std::size_t> tr(static_cast<std::size_t>(k));
        for (auto i : a.train) ++tr[static_cast<std::size_t>(y[i])];
        for (int c = 0; c < k; ++c)
            EXPECT_LE(std::fabs(static_cast<double>(tr[static_cast<std::size_t>(c)]) - f * static_cast<double>(counts[static_cast<std::size_t>(c)])), 1.0);
    }
}

TEST(Split, SeedChangesMembership) {
    const auto ds = sized(50, 50);
    EXPECT_NE(split_indices(ds, {0.8, 1, true}).test, split_indices(ds, {0.8, 2, true}).test);
}

TEST(Split, TooFewSamples) {
    EXPECT_EQ(code_of([] { (void)split_indices(sized(1, 10), {0.8, 1, true}); }), ErrorCode::TooFewSamples);
    EXPECT_EQ(code_of([] { (void)split_indices(sized(5, 5), {1.0, 1, true}); }), ErrorCode::ParamOutOfRange);
}

TEST(Split, AugmentedCopiesFollowTheirSource) {
    Matrix X = Matrix::Zero(40, 1);
    std::vector<int> y;
    LabeledDataset ds;
    for (int i = 0; i < 10; ++i)
        for (const char* suffix : {"", "#r90", "#r180", "#r0f"}) {
            ds.features.sample_ids.push_back("img" + std::to_string(i) + suffix);
            y.push_back(i % 2);
        }
    ds.features.values = X;
    ds.labels = y;
    ds.class_names = {"0", "1"};
    const auto idx = split_indices(ds, {0.8, 3, true});
    EXPECT_EQ(idx.train.size(), 32u);
    EXPECT_EQ(idx.test.size(), 2u);
    for (auto t : idx.test) EXPECT_FALSE(is_augmented(ds.features.sample_ids[t]));
}

TEST(Split, SelectIdsReordersAndChecks) {
    const auto ds = sized(3, 3);
    const auto sel = select_ids(ds, {"s4", "s0"});
    EXPECT_EQ(sel.features.sample_ids, (std::vector<std::string>{"s4", "s0"}));
    EXPECT_EQ(code_of([&] { (void)select_ids(ds, {"zz"}); }), ErrorCode::RowMisalignment);
}
