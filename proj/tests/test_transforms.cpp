#include <gtest/gtest.h>

#include <cmath>

#include "fusepipe/transforms.hpp"
#include "support.hpp"

using namespace fusepipe;
using namespace fusepipe::transforms;

namespace {

FeatureMatrix fm_of(const Matrix& X) {
    FeatureMatrix fm;
    fm.values = X;
    fm.sample_ids = fptest::make_ids(static_cast<std::size_t>(X.rows()));
    fm.model_tag = "t";
    return fm;
}

Matrix random_matrix(Eigen::Index n, Eigen::Index d, Rng& rng) {
    Matrix X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.normal() * (j + 1) + 3 * j;
    return X;
}

// Distance from p to the segment [a, b].
double segment_residual(const Vector& p, const Vector& a, const Vector& b) {
    const Vector ab = b - a;
    const double len = ab.squaredNorm();
    const double t = len == 0 ? 0 : std::clamp((p - a).dot(ab) / len, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

} // namespace

TEST(Scaler, TwoPointColumn) {
    Matrix X(2, 1);
    X << 1, 3;
    const auto p = fit_scaler(fm_of(X));
    EXPECT_DOUBLE_EQ(p.mean(0), 2.0);
    EXPECT_DOUBLE_EQ(p.std(0), 1.0);
    const auto t = apply_scaler(fm_of(X), p);
    EXPECT_DOUBLE_EQ(t.values(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(t.values(1, 0), 1.0);
}

TEST(Scaler, ConstantColumnIsOnlyCentred) {
    Matrix X(3, 1);
    X << 5, 5, 5;
    const auto t = apply_scaler(fm_of(X), fit_scaler(fm_of(X)));
    EXPECT_EQ(t.values, Matrix::Zero(3, 1));
}

TEST(Scaler, RandomFitSetIsStandardised) {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix X = random_matrix(10 + trial, 3, rng);
        const auto t = apply_scaler(fm_of(X), fit_scaler(fm_of(X))).values;
        for (Eigen::Index j = 0; j < 3; ++j) {
            const double mean = t.col(j).mean();
            const double var = (t.col(j).array() - mean).square().mean();
            EXPECT_LT(std::fabs(mean), 1e-12);
            EXPECT_LT(std::fabs(std::sqrt(var) - 1.0), 1e-9);
        }
    }
}

TEST(Pca, AxisAlignedPair) {
    Matrix X(2, 2);
    X << -1, 0, 1, 0;
    const auto m = fit_pca(fm_of(X), VarianceFraction{1.0});
    ASSERT_EQ(m.k(), 1u);
    EXPECT_NEAR(m.components(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(m.components(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(m.eigenvalues(0), 1.0, 1e-12);
    EXPECT_NEAR(m.all_eigenvalues(1), 0.0, 1e-12);
    EXPECT_THROW((void)fit_pca(fm_of(X), FixedComponents{2}), Error);
}

TEST(Pca, IsotropicCloudKeepsBothAxes) {
    Matrix X(4, 2);
    X << 1, 0, -1, 0, 0, 1, 0, -1;
    const auto m = fit_pca(fm_of(X), VarianceFraction{0.95});
    EXPECT_EQ(m.k(), 2u);
}

TEST(Pca, OrthonormalAndReconstruction) {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 30, d = 6;
        const Matrix X = random_matrix(n, d, rng);
        const auto full = fit_pca(fm_of(X), FixedComponents{static_cast<std::size_t>(d)});
        const Matrix gram = full.components * full.components.transpose();
        EXPECT_LT((gram - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-8);
        for (Eigen::Index i = 1; i < d; ++i) EXPECT_GE(full.eigenvalues(i - 1), full.eigenvalues(i));
        for (Eigen::Index i = 0; i < d; ++i) {
            Eigen::Index arg;
            full.components.row(i).cwiseAbs().maxCoeff(&arg);
            EXPECT_GT(full.components(i, arg), 0.0);
        }

        for (std::size_t k = 1; k <= static_cast<std::size_t>(d); ++k) {
            const auto m = fit_pca(fm_of(X), FixedComponents{k});
            const Matrix Z = pca_transform(fm_of(X), m).values;
            const Matrix back = (Z * m.components).rowwise() + m.mean.transpose();
            const double err = (X - back).squaredNorm();
            const double discarded = full.all_eigenvalues.tail(d - static_cast<Eigen::Index>(k)).sum();
            EXPECT_NEAR(err, discarded * n, 1e-6 * std::max(1.0, err));
        }
        const auto m95 = fit_pca(fm_of(X), VarianceFraction{0.95});
        EXPECT_LE(full.eigenvalues.sum() / full.all_eigenvalues.sum(), 1 + 1e-12);
        EXPECT_GE(m95.variance_captured, 0.95);
        if (m95.k() > 1) {
            const double before = full.all_eigenvalues.head(static_cast<Eigen::Index>(m95.k()) - 1).sum();
            EXPECT_LT(before / full.all_eigenvalues.sum(), 0.95);
        }
    }
}

TEST(Smote, BalancedIsUnchanged) {
    const auto ds = fptest::blobs(10, 2, 2, 3.0, 1);
    const auto out = smote(ds, {5, 1});
    EXPECT_EQ(out.features, ds.features);
    EXPECT_EQ(out.labels, ds.labels);
}

TEST(Smote, TwoPointMinorityLiesOnSegment) {
    Matrix X(8, 2);
    X << 0, 0, 1, 1, 5, 5, 6, 5, 5, 6, 6, 6, 7, 7, 7, 6;
    const auto ds = fptest::dataset(X, {0, 0, 1, 1, 1, 1, 1, 1}, 2);
    const auto out = smote(ds, {1, 3});
    ASSERT_EQ(out.rows(), 12u);
    const Vector a = Vector::Zero(2), b = Vector::Ones(2);
    for (std::size_t i = 8; i < 12; ++i) {
        EXPECT_EQ(out.labels[i], 0);
        EXPECT_EQ(out.features.sample_ids[i].rfind("syn:", 0), 0u);
        EXPECT_LT(segment_residual(out.X().row(static_cast<Eigen::Index>(i)).transpose(), a, b), 1e-9);
    }
}

TEST(Smote, TenVersusFourBalances) {
    const auto base = fptest::blobs(14, 3, 2, 3.0, 2);
    std::vector<int> y(14, 0);
    for (int i = 0; i < 4; ++i) y[static_cast<std::size_t>(i * 3)] = 1;
    const auto ds = fptest::dataset(base.X(), y, 2);
    const auto out = smote(ds, {5, 9});
    EXPECT_EQ(out.class_counts(), (std::vector<std::size_t>{10, 10}));
}

TEST(Smote, SyntheticPointsOnNeighbourSegments) {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 1 + rng.below(4);
        const auto base = fptest::blobs(40, 3, 3, 2.0, 10 + static_cast<std::uint64_t>(trial));
        std::vector<int> y(40);
        for (std::size_t i = 0; i < 40; ++i) y[i] = i < 24 ? 0 : (i < 33 ? 1 : 2);
        const auto ds = fptest::dataset(base.X(), y, 3);
        const auto out = smote(ds, {k, rng.below(100)});
        EXPECT_EQ(out.class_counts(), (std::vector<std::size_t>{24, 24, 24}));
        EXPECT_EQ(out.X().topRows(40), ds.X());
        for (std::size_t s = 40; s < out.rows(); ++s) {
            const int c = out.labels[s];
            const Vector p = out.X().row(static_cast<Eigen::Index>(s)).transpose();
            double best = 1e300;
            for (std::size_t a = 0; a < 40; ++a) {
                if (y[a] != c) continue;
                std::vector<std::pair<double, std::size_t>> dist;
                for (std::size_t b = 0; b < 40; ++b)
                    if (b != a && y[b] == c) dist.emplace_back((ds.X().row(static_cast<Eigen::Index>(a)) - ds.X().row(static_cast<Eigen::Index>(b))).squaredNorm(), b);
                std::sort(dist.begin(), dist.end());
                for (std::size_t t = 0; t < std::min(k, dist.size()); ++t)
                    best = std::min(best, segment_residual(p, ds.X().row(static_cast<Eigen::Index>(a)).transpose(),
                                                           ds.X().row(static_cast<Eigen::Index>(dist[t].second)).transpose()));
            }
            EXPECT_LT(best, 1e-9);
        }
    }
}

TEST(Smote, TooFewMinority) {
    Matrix X = Matrix::Zero(5, 1);
    try {
        (void)smote(fptest::dataset(X, {0, 0, 0, 0, 1}, 2), {5, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewMinority);
    }
}

TEST(Variant, FitOnTrainOnlyAndApplyNeverRefits) {
    const auto train = fptest::blobs(40, 5, 2, 2.0, 5);
    const auto test = fptest::blobs(10, 5, 2, 2.0, 6);
    const auto fv = FittedVariant::fit(train, Variant::NormPca);
    const auto a = fv.apply(test);
    auto shifted = test;
    shifted.features.values.array() += 100.0;
    const auto b = fv.apply(shifted);
    // a pure affine map fitted on train: a constant shift of the test rows moves all outputs by a fixed vector
    const Matrix diff = b.X() - a.X();
    for (Eigen::Index i = 1; i < diff.rows(); ++i) EXPECT_LT((diff.row(i) - diff.row(0)).norm(), 1e-9);
    EXPECT_EQ(fv.train().X(), fv.apply(train.features).values);
    for (auto v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
    EXPECT_THROW(parse_variant("pca_only"), Error);
}
