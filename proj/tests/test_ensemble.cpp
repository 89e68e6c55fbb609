#include <gtest/gtest.h>

#include "fusepipe/ensemble.hpp"
#include "reference_table.hpp"
#include "support.hpp"

using namespace fusepipe;
using namespace fusepipe::ensemble;

namespace {

FeatureMatrix block(const std::string& tag, Eigen::Index rows, Eigen::Index cols, double base) {
    FeatureMatrix fm;
    fm.model_tag = tag;
    fm.sample_ids = fptest::make_ids(static_cast<std::size_t>(rows));
    fm.values.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) fm.values(i, j) = base + 100 * i + j;
    return fm;
}

} // namespace

TEST(Vote, ThreeVoterTruthTable) {
    for (int bits = 0; bits < 8; ++bits) {
        const Labels a{bits & 1}, b{(bits >> 1) & 1}, c{(bits >> 2) & 1};
        const int ones = a[0] + b[0] + c[0];
        EXPECT_EQ(majority_vote({a, b, c}, {1, 2, 3})[0], ones >= 2 ? 1 : 0) << bits;
        EXPECT_EQ(majority_vote({c, a, b}, {3, 1, 2})[0], ones >= 2 ? 1 : 0) << bits;
    }
    EXPECT_EQ(majority_vote({{1}, {1}, {0}}, {1, 2, 3}), Labels{1});
}

TEST(Vote, TwoVoterTieGoesToBetterRank) {
    const Labels x{0, 1, 1, 0}, y{1, 1, 0, 0};
    EXPECT_EQ(majority_vote({x, y}, {1, 2}), x);
    EXPECT_EQ(majority_vote({x, y}, {2, 1}), y);
    // three distinct labels: every label is tied, the rank-1 member decides
    EXPECT_EQ(majority_vote({{0}, {1}, {2}}, {2, 1, 3}), Labels{1});
}

TEST(Vote, UnanimityAndReorderingWithoutTies) {
    Rng rng(31);
    for (int t = 0; t < 20; ++t) {
        Labels p(50);
        for (auto& v : p) v = static_cast<int>(rng.below(3));
        EXPECT_EQ(majority_vote({p, p, p}, {1, 2, 3}), p);
        EXPECT_EQ(majority_vote({p, p}, {2, 1}, VotePolicy::Weighted, {0.1, 5}), p);
        Labels q(50), r(50);
        for (std::size_t i = 0; i < 50; ++i) {
            q[i] = rng.below(2) ? p[i] : static_cast<int>(rng.below(3));
            r[i] = p[i];
        }
        // p and r agree everywhere, so no tie can arise among two agreeing of three
        const auto a = majority_vote({p, q, r}, {1, 2, 3});
        EXPECT_EQ(majority_vote({q, r, p}, {3, 2, 1}), a);
        EXPECT_EQ(a, p);
    }
}

TEST(Vote, WeightedAndErrors) {
    EXPECT_EQ(majority_vote({{0}, {1}, {1}}, {1, 2, 3}, VotePolicy::Weighted, {3, 1, 1}), Labels{0});
    EXPECT_THROW(majority_vote({{0}, {1}}, {1, 2}, VotePolicy::Weighted, {1, 0}), Error);
    try {
        majority_vote({{0, 1}, {1}}, {1, 2});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
    }
}

TEST(Fuse, DimensionsOrderAndAssociativity) {
    const auto a = block("A", 5, 3, 0), b = block("B", 5, 2, 0.5), c = block("C", 5, 4, 0.25);
    const auto abc = fuse_features({a, b, c});
    EXPECT_EQ(abc.values.cols(), 9);
    EXPECT_EQ(abc.model_tag, "A+B+C");
    EXPECT_EQ(fuse_features({fuse_features({a, b}), c}).values, abc.values);
    EXPECT_EQ(fuse_features({a, fuse_features({b, c})}).values, abc.values);
    EXPECT_EQ(abc.values.middleCols(3, 2), b.values);
    const auto wide = fuse_features({block("L", 4, 1024, 0), block("M", 4, 768, 0)});
    EXPECT_EQ(wide.values.cols(), 1792);
    const auto twice = fuse_features({a, a});
    EXPECT_EQ(twice.values.leftCols(3), twice.values.rightCols(3));
}

TEST(Fuse, MisalignedRowsRejected) {
    const auto a = block("A", 4, 2, 0);
    auto b = block("B", 4, 2, 0);
    std::swap(b.sample_ids[0], b.sample_ids[1]);
    try {
        fuse_features({a, b});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RowMisalignment);
    }
    EXPECT_THROW(fuse_features({a, block("C", 3, 2, 0)}), Error);
}

TEST(Fuse, EnumerationOrder) {
    const auto f = enumerate_fusions({"A", "B", "C"});
    ASSERT_EQ(f.size(), 4u);
    EXPECT_EQ(join(f[0]), "A+B");
    EXPECT_EQ(join(f[1]), "A+C");
    EXPECT_EQ(join(f[2]), "B+C");
    EXPECT_EQ(join(f[3]), "A+B+C");
    const auto v = vote_combinations({"MLP", "SVM_RBF", "KNN"});
    EXPECT_EQ(v[1].ranks, (std::vector<int>{1, 3}));
    EXPECT_EQ(v[3].name(), "MLP+SVM_RBF+KNN");
}

TEST(Ranking, PublishedTableTopThree) {
    const auto report = fptest::reference_report();
    const auto ranking = rank_feature_sets(report);
    ASSERT_EQ(ranking.size(), 13u);
    for (const auto& row : fptest::kReferenceRows) {
        const auto it = std::find_if(ranking.begin(), ranking.end(), [&](const RankedSet& s) { return s.tag == row.tag; });
        EXPECT_NEAR(it->mean, row.average, 1e-4 + 1e-12) << row.tag;
    }
    EXPECT_EQ(ranking[0].tag, "vit_large_patch16_224");
    EXPECT_EQ(ranking[1].tag, "vit_base_patch32_384");
    EXPECT_EQ(ranking[2].tag, "vit_base_patch32_224");
    std::vector<int> ranks;
    for (const auto& s : ranking) ranks.push_back(s.rank);
    for (int i = 0; i < 13; ++i) EXPECT_EQ(ranks[static_cast<std::size_t>(i)], i + 1);
}

TEST(Ranking, EqualMeansPreferLowerSpread) {
    RunReport r;
    r.set("wide", "a", 0.8);
    r.set("wide", "b", 0.84);
    r.set("narrow", "a", 0.81);
    r.set("narrow", "b", 0.83);
    const auto ranking = rank_feature_sets(r);
    EXPECT_EQ(ranking[0].tag, "narrow");
    RunReport one;
    one.set("only", "a", 0.5);
    EXPECT_EQ(rank_feature_sets(one)[0].rank, 1);
    RunReport holes = r;
    holes.set("third", "a", 0.9);
    try {
        rank_feature_sets(holes);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IncompleteReport);
    }
}

TEST(Ranking, ShiftLeavesOrderUnchanged) {
    const auto base = top_tags(rank_feature_sets(fptest::reference_report()), 13);
    for (double shift : {-0.5, -0.01, 0.003}) EXPECT_EQ(top_tags(rank_feature_sets(fptest::reference_report(shift)), 13), base);
}

TEST(Ranking, ClassifiersOverTopFiveSets) {
    const auto report = fptest::reference_report();
    const auto top5 = top_tags(rank_feature_sets(report), 5);
    std::vector<std::pair<double, std::string>> score;
    for (const auto& c : fptest::kReferenceColumns) {
        double s = 0;
        for (const auto& t : top5) s += report.at(t, c);
        score.emplace_back(-s, c);
    }
    std::sort(score.begin(), score.end());
    const auto got = rank_classifiers(report, 3);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(got[i], score[i].second);
    EXPECT_EQ(got[0], "SVM_RBF");
    EXPECT_EQ(got[1], "MLP");
    EXPECT_THROW(rank_classifiers(report, 10), Error);
    EXPECT_THROW(rank_classifiers(report, 0), Error);

    RunReport shuffled;
    for (auto it = fptest::kReferenceRows.rbegin(); it != fptest::kReferenceRows.rend(); ++it)
        for (std::size_t c = 9; c-- > 0;) shuffled.set(it->tag, fptest::kReferenceColumns[c], it->acc[c]);
    EXPECT_EQ(rank_classifiers(shuffled, 3), got);
}
