#include <gtest/gtest.h>

#include "fusepipe/evalreport.hpp"
#include "reference_table.hpp"

using namespace fusepipe;

TEST(Accuracy, SmallCases) {
    EXPECT_DOUBLE_EQ(accuracy({0, 1, 1, 0}, {0, 1, 0, 0}), 0.75);
    EXPECT_DOUBLE_EQ(accuracy({1}, {1}), 1.0);
    EXPECT_DOUBLE_EQ(accuracy({1, 1}, {0, 0}), 0.0);
    EXPECT_THROW(accuracy({}, {}), Error);
    try {
        accuracy({0, 1}, {0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
    }
}

TEST(Accuracy, ConfusionTraceMatches) {
    Rng rng(41);
    for (int t = 0; t < 20; ++t) {
        const int K = 2 + static_cast<int>(rng.below(4));
        Labels a(100), b(100);
        for (std::size_t i = 0; i < 100; ++i) {
            a[i] = static_cast<int>(rng.below(static_cast<std::size_t>(K)));
            b[i] = rng.below(3) ? a[i] : static_cast<int>(rng.below(static_cast<std::size_t>(K)));
        }
        const auto m = confusion_matrix(a, b, K);
        std::size_t trace = 0, total = 0;
        for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j) {
                total += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (i == j) trace += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            }
        EXPECT_EQ(total, 100u);
        EXPECT_DOUBLE_EQ(static_cast<double>(trace) / 100.0, accuracy(a, b));
    }
    EXPECT_THROW(confusion_matrix({0, 2}, {0, 1}, 2), Error);
}

TEST(Report, JsonRoundTripIsByteIdentical) {
    auto r = fptest::reference_report();
    r.seed = 42;
    r.config_hash = "abc";
    const auto text = to_json(r).dump(2);
    const auto back = report_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(to_json(back).dump(2), text);
    EXPECT_EQ(back.rows, r.rows);
    EXPECT_EQ(back.at("vit_base_patch8_224", "SVM_linear"), 0.995);
}

// Cells and averages are both rounded to four places, so they can disagree by up to 1e-4.
TEST(Report, PublishedAverages) {
    const auto r = fptest::reference_report();
    for (std::size_t c = 0; c < 9; ++c)
        EXPECT_NEAR(r.column_mean(fptest::kReferenceColumns[c]), fptest::kReferenceColumnAverages[c], 1e-4 + 1e-12)
            << fptest::kReferenceColumns[c];
    for (const auto& row : fptest::kReferenceRows) EXPECT_NEAR(r.row_mean(row.tag), row.average, 1e-4 + 1e-12) << row.tag;
}

TEST(Report, MarkdownAndCsvTables) {
    const auto r = fptest::reference_report();
    const auto md = make_table(r, TableFormat::Markdown, {"vit_large_patch16_224"});
    const auto avg = md.substr(md.rfind("| Average"));
    EXPECT_NE(avg.find("| 0.9908 |"), std::string::npos);
    EXPECT_NE(md.find("| vit_large_patch16_224* | 0.9600 |"), std::string::npos);
    EXPECT_NE(md.find("| vit_base_patch16_224 | 0.9483 |"), std::string::npos);
    EXPECT_EQ(std::count(md.begin(), md.end(), '\n'), 13 + 3);
    const auto csv = make_table(r, TableFormat::Csv);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "Feature set,XGBoost,MLP,GaussianNB,Adaboost,KNN,RFClassifier,SVM_linear,SVM_sigmoid,SVM_RBF,Average");
    EXPECT_NE(csv.find("vit_large_patch16_224,0.9600,0.9950,0.8683,0.9933,0.9850,0.9833,0.9967,0.9833,0.9967,0.9735\n"),
              std::string::npos);
}

TEST(Report, MissingCellRaises) {
    RunReport r;
    r.set("a", "x", 0.5);
    r.set("b", "y", 0.5);
    try {
        make_table(r, TableFormat::Csv);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IncompleteReport);
    }
    EXPECT_THROW(r.set("a", "x", 1.5), Error);
}
