#pragma once

// Gaussian naive Bayes with additive variance smoothing.

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "fusepipe/classifiers/params.hpp"
#include "fusepipe/transforms.hpp"

namespace fusepipe::gnb {

struct GnbConfig {
    double var_smoothing = 1e-9;
    std::vector<double> priors; // empty: class frequencies
};

inline GnbConfig config_from(const ParamMap& p) {
    static const std::set<std::string> keys{"var_smoothing", "priors"};
    params::check_keys(p, keys, Kind::GaussianNB);
    GnbConfig c;
    c.var_smoothing = params::number(p, "var_smoothing", 1e-9);
    if (!(c.var_smoothing >= 0.0)) params::bad("var_smoothing", "must be >= 0");
    if (const auto* v = params::find(p, "priors"); v && !v->is_null()) {
        if (!v->is_array() || v->empty()) params::bad("priors", "must be null or a non-empty list");
        double sum = 0.0;
        for (const auto& e : *v) {
            if (!e.is_number() || e.get<double>() < 0.0) params::bad("priors", "entries must be non-negative numbers");
            c.priors.push_back(e.get<double>());
            sum += c.priors.back();
        }
        if (std::abs(sum - 1.0) > 1e-6) params::bad("priors", "must sum to 1");
    }
    return c;
}

struct GnbModel {
    Matrix mean;     // K x d
    Matrix variance; // K x d, smoothing included
    std::vector<double> log_prior;
    double epsilon = 0.0;

    int classes() const noexcept { return static_cast<int>(mean.rows()); }
};

inline GnbModel train_gnb(const GnbConfig& c, const TrainView& data) {
    const auto n = data.X.rows();
    const auto d = data.X.cols();
    const int K = data.n_classes;
    require(n > 0, ErrorCode::Empty, "GaussianNB needs training rows");
    if (!c.priors.empty())
        require(static_cast<int>(c.priors.size()) == K, ErrorCode::ParamOutOfRange,
                "priors has " + std::to_string(c.priors.size()) + " entries for " + std::to_string(K) + " classes");

    GnbModel m;
    m.mean = Matrix::Zero(K, d);
    m.variance = Matrix::Zero(K, d);
    std::vector<double> count(static_cast<std::size_t>(K), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int k = data.y[static_cast<std::size_t>(i)];
        m.mean.row(k) += data.X.row(i);
        count[static_cast<std::size_t>(k)] += 1.0;
    }
    for (int k = 0; k < K; ++k)
        if (count[static_cast<std::size_t>(k)] > 0) m.mean.row(k) /= count[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < n; ++i) {
        const int k = data.y[static_cast<std::size_t>(i)];
        m.variance.row(k).array() += (data.X.row(i) - m.mean.row(k)).array().square();
    }
    for (int k = 0; k < K; ++k)
        if (count[static_cast<std::size_t>(k)] > 0) m.variance.row(k) /= count[static_cast<std::size_t>(k)];

    const Eigen::RowVectorXd overall_mean = data.X.colwise().mean();
    const Eigen::RowVectorXd overall_var =
        (data.X.rowwise() - overall_mean).array().square().colwise().sum() / static_cast<double>(n);
    m.epsilon = c.var_smoothing * (d > 0 ? overall_var.maxCoeff() : 0.0);
    m.variance.array() += m.epsilon;
    m.variance = m.variance.cwiseMax(std::numeric_limits<double>::min());

    m.log_prior.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const double prior = c.priors.empty() ? count[static_cast<std::size_t>(k)] / static_cast<double>(n)
                                              : c.priors[static_cast<std::size_t>(k)];
        m.log_prior[static_cast<std::size_t>(k)] =
            prior > 0.0 ? std::log(prior) : -std::numeric_limits<double>::infinity();
    }
    return m;
}

/// Unnormalised log posterior, one row per sample.
inline Matrix joint_log_likelihood(const GnbModel& m, const Matrix& X) {
    require(X.cols() == m.mean.cols(), ErrorCode::ShapeMismatch, "GaussianNB input width differs from training");
    const int K = m.classes();
    Matrix out(X.rows(), K);
    for (int k = 0; k < K; ++k) {
        const double norm = -0.5 * (2.0 * std::numbers::pi * m.variance.row(k).array()).log().sum();
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double quad = ((X.row(i) - m.mean.row(k)).array().square() / m.variance.row(k).array()).sum();
            out(i, k) = m.log_prior[static_cast<std::size_t>(k)] + norm - 0.5 * quad;
        }
    }
    return out;
}

/// Log posterior normalised with log-sum-exp.
inline Matrix predict_log_proba(const GnbModel& m, const Matrix& X) {
    Matrix jll = joint_log_likelihood(m, X);
    for (Eigen::Index i = 0; i < jll.rows(); ++i) {
        const double mx = jll.row(i).maxCoeff();
        const double lse = mx + std::log((jll.row(i).array() - mx).exp().sum());
        jll.row(i).array() -= lse;
    }
    return jll;
}

inline Labels gnb_predict(const GnbModel& m, const Matrix& X) {
    const Matrix jll = joint_log_likelihood(m, X);
    Labels out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < jll.rows(); ++i) {
        Eigen::Index arg = 0;
        jll.row(i).maxCoeff(&arg);
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}

inline nlohmann::json to_json(const GnbModel& m) {
    nlohmann::json prior = nlohmann::json::array();
    for (double lp : m.log_prior) prior.push_back(std::isfinite(lp) ? nlohmann::json(lp) : nlohmann::json(nullptr));
    return {{"mean", transforms::matrix_json(m.mean)},
            {"variance", transforms::matrix_json(m.variance)},
            {"log_prior", prior},
            {"epsilon", m.epsilon}};
}

inline GnbModel gnb_from_json(const nlohmann::json& j) {
    GnbModel m;
    m.mean = transforms::json_matrix(j.at("mean"));
    m.variance = transforms::json_matrix(j.at("variance"));
    for (const auto& lp : j.at("log_prior"))
        m.log_prior.push_back(lp.is_null() ? -std::numeric_limits<double>::infinity() : lp.get<double>());
    m.epsilon = j.at("epsilon").get<double>();
    return m;
}

} // namespace fusepipe::gnb
