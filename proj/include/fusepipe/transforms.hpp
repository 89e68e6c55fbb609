#pragma once

// z-score scaling, covariance PCA and SMOTE oversampling. Every transform is
// fitted on a training split and then applied unchanged elsewhere.

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fusepipe/error.hpp"
#include "fusepipe/featureio.hpp"
#include "fusepipe/rng.hpp"

namespace fusepipe::transforms {

inline constexpr double kDegenerateStd = 1e-12;

struct ScalerParams {
    Vector mean;
    Vector std; // population standard deviation
};

inline ScalerParams fit_scaler(const FeatureMatrix& train) {
    require(train.rows() >= 2, ErrorCode::TooFewSamples, "fit_scaler needs at least 2 rows");
    const auto& X = train.values;
    ScalerParams p;
    p.mean = X.colwise().mean().transpose();
    p.std.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double var = (X.col(j).array() - p.mean(j)).square().sum() / static_cast<double>(X.rows());
        p.std(j) = std::sqrt(var);
    }
    return p;
}

/// Columns whose fitted std is below 1e-12 are only centred.
inline FeatureMatrix apply_scaler(const FeatureMatrix& fm, const ScalerParams& params) {
    require(static_cast<Eigen::Index>(fm.cols()) == params.mean.size(), ErrorCode::ShapeMismatch,
            "scaler fitted on a different dimensionality");
    FeatureMatrix out = fm;
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
        out.values.col(j).array() -= params.mean(j);
        if (params.std(j) >= kDegenerateStd) out.values.col(j).array() /= params.std(j);
    }
    return out;
}

struct PcaModel {
    Vector mean;
    Matrix components;   // k x d, orthonormal rows
    Vector eigenvalues;  // k, descending
    Vector all_eigenvalues; // d, descending (kept for explained-variance audits)
    double variance_captured = 0.0;

    std::size_t k() const noexcept { return static_cast<std::size_t>(components.rows()); }
};

struct FixedComponents {
    std::size_t k;
};
struct VarianceFraction {
    double fraction;
};
using PcaTarget = std::variant<FixedComponents, VarianceFraction>;

inline PcaModel fit_pca(const FeatureMatrix& train, PcaTarget target = VarianceFraction{0.95}) {
    const auto n = train.values.rows();
    const auto d = train.values.cols();
    require(n >= 2, ErrorCode::TooFewSamples, "fit_pca needs at least 2 rows");
    PcaModel model;
    model.mean = train.values.colwise().mean().transpose();
    const Matrix centered = train.values.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    require(solver.info() == Eigen::Success, ErrorCode::RankDeficient, "eigendecomposition failed");

    Vector values(d);
    Eigen::MatrixXd vectors(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        values(i) = std::max(0.0, solver.eigenvalues()(d - 1 - i));
        vectors.col(i) = solver.eigenvectors().col(d - 1 - i);
    }
    const double total = values.sum();
    const double top = d > 0 ? values(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < d; ++i)
        if (values(i) > 1e-12 * std::max(top, 1e-300)) ++rank;
    rank = std::min<Eigen::Index>(rank, n - 1);

    Eigen::Index k = 0;
    if (const auto* fixed = std::get_if<FixedComponents>(&target)) {
        k = static_cast<Eigen::Index>(fixed->k);
        require(k >= 1 && k <= d, ErrorCode::ParamOutOfRange, "component count must lie in [1, d]");
        require(k <= rank, ErrorCode::RankDeficient,
                "requested " + std::to_string(k) + " components but the data has rank " + std::to_string(rank));
    } else {
        const double frac = std::get<VarianceFraction>(target).fraction;
        require(frac > 0.0 && frac <= 1.0, ErrorCode::ParamOutOfRange, "variance fraction must lie in (0,1]");
        double cumulative = 0.0;
        k = std::max<Eigen::Index>(rank, 1);
        for (Eigen::Index i = 0; i < d; ++i) {
            cumulative += values(i);
            if (total > 0.0 && cumulative / total >= frac) {
                k = i + 1;
                break;
            }
        }
    }

    model.components.resize(k, d);
    for (Eigen::Index i = 0; i < k; ++i) {
        Vector v = vectors.col(i);
        Eigen::Index arg = 0;
        for (Eigen::Index j = 1; j < d; ++j)
            if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
        if (v(arg) < 0) v = -v;
        model.components.row(i) = v.transpose();
    }
    model.eigenvalues = values.head(k);
    model.all_eigenvalues = values;
    model.variance_captured = total > 0.0 ? model.eigenvalues.sum() / total : 1.0;
    return model;
}

inline FeatureMatrix pca_transform(const FeatureMatrix& fm, const PcaModel& model) {
    require(static_cast<Eigen::Index>(fm.cols()) == model.mean.size(), ErrorCode::ShapeMismatch,
            "PCA fitted on a different dimensionality");
    FeatureMatrix out;
    out.sample_ids = fm.sample_ids;
    out.model_tag = fm.model_tag;
    out.values = (fm.values.rowwise() - model.mean.transpose()) * model.components.transpose();
    return out;
}

struct SmoteConfig {
    std::size_t k_neighbors = 5;
    std::uint64_t seed = 42;
};

/// Oversamples every class up to the majority count. Synthetic rows are
/// appended after the untouched originals with ids `syn:<class>:<i>`.
inline LabeledDataset smote(const LabeledDataset& ds, const SmoteConfig& cfg) {
    require(cfg.k_neighbors >= 1, ErrorCode::ParamOutOfRange, "k_neighbors must be >= 1");
    const auto counts = ds.class_counts();
    const std::size_t majority = *std::max_element(counts.begin(), counts.end());
    const auto d = ds.X().cols();

    std::vector<std::vector<double>> synthetic_rows;
    std::vector<int> synthetic_labels;
    std::vector<std::string> synthetic_ids;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] >= majority) continue;
        require(counts[c] >= 2, ErrorCode::TooFewMinority,
                "class '" + ds.class_names[c] + "' has fewer than 2 samples to interpolate");
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ds.rows(); ++i)
            if (ds.labels[i] == static_cast<int>(c)) members.push_back(i);
        const std::size_t k = std::min(cfg.k_neighbors, members.size() - 1);

        std::vector<std::vector<std::size_t>> neighbours(members.size());
        for (std::size_t a = 0; a < members.size(); ++a) {
            std::vector<std::pair<double, std::size_t>> dist;
            for (std::size_t b = 0; b < members.size(); ++b) {
                if (a == b) continue;
                dist.emplace_back((ds.X().row(static_cast<Eigen::Index>(members[a])) -
                                   ds.X().row(static_cast<Eigen::Index>(members[b])))
                                      .squaredNorm(),
                                  b);
            }
            std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
            for (std::size_t t = 0; t < k; ++t) neighbours[a].push_back(dist[t].second);
        }

        Rng rng(derive_seed(cfg.seed, "smote/" + ds.class_names[c]));
        for (std::size_t s = 0; s < majority - counts[c]; ++s) {
            const std::size_t a = rng.below(members.size());
            const std::size_t b = neighbours[a][rng.below(k)];
            const double u = rng.uniform();
            const auto xa = ds.X().row(static_cast<Eigen::Index>(members[a]));
            const auto xb = ds.X().row(static_cast<Eigen::Index>(members[b]));
            std::vector<double> row(static_cast<std::size_t>(d));
            for (Eigen::Index j = 0; j < d; ++j) row[static_cast<std::size_t>(j)] = xa(j) + u * (xb(j) - xa(j));
            synthetic_rows.push_back(std::move(row));
            synthetic_labels.push_back(static_cast<int>(c));
            synthetic_ids.push_back("syn:" + ds.class_names[c] + ":" + std::to_string(s));
        }
    }
    if (synthetic_rows.empty()) return ds;

    LabeledDataset out;
    out.class_names = ds.class_names;
    out.features.model_tag = ds.features.model_tag;
    out.features.values.resize(static_cast<Eigen::Index>(ds.rows() + synthetic_rows.size()), d);
    out.features.values.topRows(static_cast<Eigen::Index>(ds.rows())) = ds.X();
    for (std::size_t s = 0; s < synthetic_rows.size(); ++s)
        for (Eigen::Index j = 0; j < d; ++j)
            out.features.values(static_cast<Eigen::Index>(ds.rows() + s), j) = synthetic_rows[s][static_cast<std::size_t>(j)];
    out.features.sample_ids = ds.features.sample_ids;
    out.features.sample_ids.insert(out.features.sample_ids.end(), synthetic_ids.begin(), synthetic_ids.end());
    out.labels = ds.labels;
    out.labels.insert(out.labels.end(), synthetic_labels.begin(), synthetic_labels.end());
    return out;
}

// ---------------------------------------------------------------------------
// Preprocessing variants

enum class Variant { Simple, NormPca, Smote, NormPcaSmote };

inline constexpr Variant kAllVariants[] = {Variant::Simple, Variant::NormPca, Variant::Smote, Variant::NormPcaSmote};

constexpr std::string_view to_string(Variant v) noexcept {
    switch (v) {
    case Variant::Simple: return "simple";
    case Variant::NormPca: return "norm_pca";
    case Variant::Smote: return "smote";
    case Variant::NormPcaSmote: return "norm_pca_smote";
    }
    return "simple";
}

inline Variant parse_variant(std::string_view text) {
    for (Variant v : kAllVariants)
        if (to_string(v) == text) return v;
    fail(ErrorCode::ConfigInvalid, "unknown preprocessing variant '" + std::string(text) + "'");
}

constexpr bool uses_norm_pca(Variant v) noexcept { return v == Variant::NormPca || v == Variant::NormPcaSmote; }
constexpr bool uses_smote(Variant v) noexcept { return v == Variant::Smote || v == Variant::NormPcaSmote; }

struct VariantOptions {
    double pca_variance = 0.95;
    std::size_t smote_k = 5;
    std::uint64_t seed = 42;
};

/// Transform chain (normalize -> PCA -> SMOTE) fitted on a training split.
/// The only way to obtain one is from training data, and `apply` never
/// refits, so test rows cannot influence the fitted state.
class FittedVariant {
public:
    static FittedVariant fit(const LabeledDataset& train, Variant variant, const VariantOptions& options = {}) {
        FittedVariant fv;
        fv.variant_ = variant;
        LabeledDataset current = train;
        if (uses_norm_pca(variant)) {
            fv.scaler_ = fit_scaler(current.features);
            current = current.with_features(apply_scaler(current.features, *fv.scaler_));
            fv.pca_ = fit_pca(current.features, VarianceFraction{options.pca_variance});
            current = current.with_features(pca_transform(current.features, *fv.pca_));
        }
        if (uses_smote(variant)) current = smote(current, SmoteConfig{options.smote_k, options.seed});
        fv.train_ = std::move(current);
        return fv;
    }

    Variant variant() const noexcept { return variant_; }
    const LabeledDataset& train() const noexcept { return train_; }
    const std::optional<ScalerParams>& scaler() const noexcept { return scaler_; }
    const std::optional<PcaModel>& pca() const noexcept { return pca_; }

    FeatureMatrix apply(const FeatureMatrix& fm) const {
        FeatureMatrix out = fm;
        if (scaler_) out = apply_scaler(out, *scaler_);
        if (pca_) out = pca_transform(out, *pca_);
        return out;
    }

    LabeledDataset apply(const LabeledDataset& ds) const { return ds.with_features(apply(ds.features)); }

private:
    FittedVariant() = default;

    Variant variant_ = Variant::Simple;
    LabeledDataset train_;
    std::optional<ScalerParams> scaler_;
    std::optional<PcaModel> pca_;
};

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector json_vector(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const Vector r = m.row(i).transpose();
        rows.push_back(vector_json(r));
    }
    return rows;
}

inline Matrix json_matrix(const nlohmann::json& j, Eigen::Index cols_if_empty = 0) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    const Eigen::Index cols = rows.empty() ? cols_if_empty : static_cast<Eigen::Index>(rows.front().size());
    Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(static_cast<Eigen::Index>(rows[i].size()) == cols, ErrorCode::ShapeMismatch, "ragged matrix in JSON");
        for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    }
    return m;
}

inline nlohmann::json to_json(const ScalerParams& p) { return {{"mean", vector_json(p.mean)}, {"std", vector_json(p.std)}}; }

inline ScalerParams scaler_from_json(const nlohmann::json& j) {
    return {json_vector(j.at("mean")), json_vector(j.at("std"))};
}

inline nlohmann::json to_json(const PcaModel& m) {
    return {{"mean", vector_json(m.mean)},
            {"components", matrix_json(m.components)},
            {"eigenvalues", vector_json(m.eigenvalues)},
            {"all_eigenvalues", vector_json(m.all_eigenvalues)},
            {"variance_captured", m.variance_captured}};
}

inline PcaModel pca_from_json(const nlohmann::json& j) {
    PcaModel m;
    m.mean = json_vector(j.at("mean"));
    m.components = json_matrix(j.at("components"), m.mean.size());
    m.eigenvalues = json_vector(j.at("eigenvalues"));
    m.all_eigenvalues = json_vector(j.at("all_eigenvalues"));
    m.variance_captured = j.at("variance_captured").get<double>();
    return m;
}

inline nlohmann::json to_json(const FittedVariant& fv) {
    nlohmann::json j{{"variant", std::string(to_string(fv.variant()))}};
    if (fv.scaler()) j["scaler"] = to_json(*fv.scaler());
    if (fv.pca()) j["pca"] = to_json(*fv.pca());
    return j;
}

} // namespace fusepipe::transforms
