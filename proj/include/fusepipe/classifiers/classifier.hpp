#pragma once

// Uniform fit/predict over the nine classifier kinds plus the versioned model
// document.

#include <nlohmann/json.hpp>

#include <string>
#include <variant>
#include <vector>

#include "fusepipe/classifiers/adaboost.hpp"
#include "fusepipe/classifiers/gbdt.hpp"
#include "fusepipe/classifiers/knn.hpp"
#include "fusepipe/classifiers/mlp.hpp"
#include "fusepipe/classifiers/naive_bayes.hpp"
#include "fusepipe/classifiers/params.hpp"
#include "fusepipe/classifiers/random_forest.hpp"
#include "fusepipe/classifiers/svm.hpp"
#include "fusepipe/hash.hpp"

namespace fusepipe {

using KindConfig = std::variant<gbdt::GbdtConfig, mlp::MlpConfig, gnb::GnbConfig, ada::AdaConfig, knn::KnnConfig,
                                forest::RfConfig, svm::SvmConfig>;

/// Parses and range-checks the parameters of `spec` for its kind.
inline KindConfig parse_config(const ClassifierSpec& spec) {
    switch (spec.kind) {
    case Kind::GBDT: return gbdt::config_from(spec.params);
    case Kind::MLP: return mlp::config_from(spec.params);
    case Kind::GaussianNB: return gnb::config_from(spec.params);
    case Kind::AdaBoost: return ada::config_from(spec.params);
    case Kind::KNN: return knn::config_from(spec.params);
    case Kind::RandomForest: return forest::config_from(spec.params);
    case Kind::SvmLinear:
    case Kind::SvmSigmoid:
    case Kind::SvmRbf: return svm::config_from(spec.kind, spec.params);
    }
    fail(ErrorCode::UnknownKind, "unknown classifier kind");
}

inline void validate_spec(const ClassifierSpec& spec) { (void)parse_config(spec); }

/// Parameters that actually influence the fitted model for input width
/// `n_features`, with defaults filled in. Two specs with equal effective
/// parameters (and seed) train identical models.
inline nlohmann::json effective_params(const ClassifierSpec& spec, int n_features) {
    const KindConfig cfg = parse_config(spec);
    nlohmann::json j = nlohmann::json::object();
    j["kind"] = std::string(to_string(spec.kind));
    if (const auto* c = std::get_if<gbdt::GbdtConfig>(&cfg)) {
        j["n_estimators"] = c->n_estimators;
        j["max_depth"] = c->max_depth;
        j["learning_rate"] = c->learning_rate;
        j["subsample"] = c->subsample;
        j["seed"] = c->subsample < 1.0 ? nlohmann::json(spec.seed) : nlohmann::json(nullptr);
    } else if (const auto* c = std::get_if<mlp::MlpConfig>(&cfg)) {
        j["hidden"] = c->hidden;
        j["activation"] = static_cast<int>(c->activation);
        j["solver"] = static_cast<int>(c->solver);
        j["max_iter"] = c->max_iter;
        j["loss"] = static_cast<int>(c->loss);
        j["tol"] = c->tol;
        j["n_iter_no_change"] = c->n_iter_no_change;
        j["seed"] = spec.seed;
        if (c->solver != mlp::Solver::Lbfgs) {
            j["learning_rate"] = c->learning_rate;
            j["batch_size"] = c->batch_size;
        }
        if (c->solver == mlp::Solver::Sgd) j["momentum"] = c->momentum;
        if (c->solver == mlp::Solver::Adam) j["adam"] = {c->beta1, c->beta2, c->epsilon};
    } else if (const auto* c = std::get_if<gnb::GnbConfig>(&cfg)) {
        j["var_smoothing"] = c->var_smoothing;
        j["priors"] = c->priors;
    } else if (const auto* c = std::get_if<ada::AdaConfig>(&cfg)) {
        j["n_estimators"] = c->n_estimators;
        j["learning_rate"] = c->learning_rate;
        j["max_depth"] = c->max_depth;
    } else if (const auto* c = std::get_if<knn::KnnConfig>(&cfg)) {
        j["n_neighbors"] = c->n_neighbors;
        j["weights"] = static_cast<int>(c->weights);
        j["p"] = c->p;
    } else if (const auto* c = std::get_if<forest::RfConfig>(&cfg)) {
        const int mf = forest::resolve_max_features(c->max_features, n_features);
        j["n_estimators"] = c->n_estimators;
        j["max_depth"] = c->tree.max_depth;
        j["min_samples_split"] = c->tree.min_samples_split;
        j["min_samples_leaf"] = c->tree.min_samples_leaf;
        j["max_features"] = mf;
        j["bootstrap"] = c->bootstrap;
        j["criterion"] = static_cast<int>(c->tree.criterion);
        j["seed"] = c->random_state.value_or(spec.seed);
    } else if (const auto* c = std::get_if<svm::SvmConfig>(&cfg)) {
        j["C"] = c->C;
        if (c->kernel != svm::KernelKind::Linear) j["gamma"] = c->gamma == "value" ? nlohmann::json(c->gamma_value) : nlohmann::json(c->gamma);
        if (c->kernel == svm::KernelKind::Sigmoid) j["coef0"] = c->coef0;
        j["tol"] = c->tol;
        j["balanced"] = c->balanced;
        j["max_iter"] = c->max_iter;
    }
    return j;
}

using FittedModel = std::variant<gbdt::GbdtModel, mlp::MlpModel, gnb::GnbModel, ada::AdaModel, knn::KnnModel,
                                 forest::RfModel, svm::SvmModel>;

struct TrainedModel {
    ClassifierSpec spec;
    int n_features = 0;
    std::vector<std::string> class_names;
    FittedModel fitted;
};

/// Trains on a raw matrix; `n_classes` fixes the label range.
inline FittedModel fit_raw(const ClassifierSpec& spec, const TrainView& data) {
    require(static_cast<Eigen::Index>(data.y.size()) == data.X.rows(), ErrorCode::LengthMismatch,
            "label count differs from row count");
    for (int l : data.y)
        require(l >= 0 && l < data.n_classes, ErrorCode::LabelOutOfRange, "label " + std::to_string(l) + " out of range");
    const KindConfig cfg = parse_config(spec);
    return std::visit(
        [&](const auto& c) -> FittedModel {
            using C = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<C, gbdt::GbdtConfig>) return gbdt::train_gbdt(c, data, spec.seed);
            else if constexpr (std::is_same_v<C, mlp::MlpConfig>) return mlp::train_mlp(c, data, spec.seed);
            else if constexpr (std::is_same_v<C, gnb::GnbConfig>) return gnb::train_gnb(c, data);
            else if constexpr (std::is_same_v<C, ada::AdaConfig>) return ada::train_ada(c, data, spec.seed);
            else if constexpr (std::is_same_v<C, knn::KnnConfig>) return knn::train_knn(c, data);
            else if constexpr (std::is_same_v<C, forest::RfConfig>) return forest::train_rf(c, data, spec.seed);
            else return svm::train_svm(c, data);
        },
        cfg);
}

inline TrainedModel fit(const ClassifierSpec& spec, const LabeledDataset& train) {
    train.validate(false);
    const Matrix& X = train.X();
    TrainedModel m{spec, static_cast<int>(X.cols()), train.class_names,
                   fit_raw(spec, {X, train.labels, train.num_classes()})};
    return m;
}

inline Labels predict_raw(const FittedModel& f, const Matrix& X) {
    return std::visit(
        [&](const auto& m) -> Labels {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, gbdt::GbdtModel>) return gbdt::gbdt_predict(m, X);
            else if constexpr (std::is_same_v<M, mlp::MlpModel>) return mlp::mlp_predict(m, X);
            else if constexpr (std::is_same_v<M, gnb::GnbModel>) return gnb::gnb_predict(m, X);
            else if constexpr (std::is_same_v<M, ada::AdaModel>) return ada::ada_predict(m, X);
            else if constexpr (std::is_same_v<M, knn::KnnModel>) return knn::knn_predict(m, X);
            else if constexpr (std::is_same_v<M, forest::RfModel>) return forest::rf_predict(m, X);
            else return svm::svm_predict(m, X);
        },
        f);
}

inline Labels predict(const TrainedModel& model, const Matrix& X) {
    if (X.rows() == 0) return {};
    require(X.cols() == model.n_features, ErrorCode::ShapeMismatch,
            "model expects " + std::to_string(model.n_features) + " features, got " + std::to_string(X.cols()));
    return predict_raw(model.fitted, X);
}

inline Labels predict(const TrainedModel& model, const FeatureMatrix& fm) { return predict(model, fm.values); }

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const TrainedModel& m) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : m.spec.params) params[k] = v;
    nlohmann::json fitted = std::visit([](const auto& f) { return to_json(f); }, m.fitted);
    return {{"format", "fusepipe.model"},
            {"version", kModelFormatVersion},
            {"kind", std::string(to_string(m.spec.kind))},
            {"params", params},
            {"seed", m.spec.seed},
            {"n_features", m.n_features},
            {"class_names", m.class_names},
            {"fitted", fitted}};
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    require(j.value("format", "") == "fusepipe.model", ErrorCode::ConfigInvalid, "not a model document");
    require(j.value("version", 0) == kModelFormatVersion, ErrorCode::ConfigInvalid, "unsupported model version");
    TrainedModel m;
    m.spec.kind = parse_kind(j.at("kind").get<std::string>());
    for (const auto& [k, v] : j.at("params").items()) m.spec.params[k] = v;
    m.spec.seed = j.at("seed").get<std::uint64_t>();
    m.n_features = j.at("n_features").get<int>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    const auto& f = j.at("fitted");
    switch (m.spec.kind) {
    case Kind::GBDT: m.fitted = gbdt::gbdt_from_json(f); break;
    case Kind::MLP: m.fitted = mlp::mlp_from_json(f); break;
    case Kind::GaussianNB: m.fitted = gnb::gnb_from_json(f); break;
    case Kind::AdaBoost: m.fitted = ada::ada_from_json(f); break;
    case Kind::KNN: m.fitted = knn::knn_from_json(f); break;
    case Kind::RandomForest: m.fitted = forest::rf_from_json(f); break;
    default: m.fitted = svm::svm_from_json(f); break;
    }
    return m;
}

inline void save_model(const TrainedModel& m, const std::filesystem::path& path) { write_file(path, to_json(m).dump()); }

inline TrainedModel load_model(const std::filesystem::path& path) {
    try {
        return model_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigInvalid, "malformed model document " + path.string() + ": " + e.what());
    }
}

} // namespace fusepipe
