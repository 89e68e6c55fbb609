#pragma once

// SAMME boosting over weighted CART trees.

#include <nlohmann/json.hpp>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "fusepipe/classifiers/decision_tree.hpp"
#include "fusepipe/classifiers/params.hpp"

namespace fusepipe::ada {

struct AdaConfig {
    int n_estimators = 100;
    double learning_rate = 1.0;
    int max_depth = 1;
};

inline AdaConfig config_from(const ParamMap& p) {
    static const std::set<std::string> keys{"n_estimators", "learning_rate", "max_depth"};
    params::check_keys(p, keys, Kind::AdaBoost);
    AdaConfig c;
    c.n_estimators = static_cast<int>(params::integer(p, "n_estimators", 100));
    if (c.n_estimators < 1) params::bad("n_estimators", "must be >= 1");
    c.learning_rate = params::number(p, "learning_rate", 1.0);
    if (!(c.learning_rate > 0.0)) params::bad("learning_rate", "must be > 0");
    c.max_depth = static_cast<int>(params::integer(p, "max_depth", 1));
    if (c.max_depth < 1) params::bad("max_depth", "must be >= 1");
    return c;
}

struct Round {
    double error = 0.0;
    double alpha = 0.0;
    std::vector<double> weights; // sample weights after the round's update
};

struct AdaModel {
    std::vector<tree::Tree> learners;
    std::vector<double> alphas;
    int n_classes = 2;
    std::vector<Round> history; // training trace, not serialised

    std::size_t size() const noexcept { return learners.size(); }
};

inline AdaModel train_ada(const AdaConfig& c, const TrainView& data, std::uint64_t seed) {
    const std::size_t n = data.y.size();
    const int K = data.n_classes;
    require(n > 0, ErrorCode::Empty, "AdaBoost needs training rows");
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    AdaModel m;
    m.n_classes = K;
    tree::TreeConfig tc;
    tc.max_depth = c.max_depth;
    const double chance = 1.0 - 1.0 / static_cast<double>(K);
    for (int round = 0; round < c.n_estimators; ++round) {
        tree::Tree t = tree::fit_tree(data.X, data.y, K, tc, derive_seed(seed, static_cast<std::uint64_t>(round)), w);
        const Labels pred = t.predict(data.X);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (pred[i] != data.y[i]) err += w[i];
        if (err <= 0.0) {
            m.learners.push_back(std::move(t));
            m.alphas.push_back(1.0);
            m.history.push_back({0.0, 1.0, w});
            break;
        }
        if (err >= chance) break;
        const double alpha = c.learning_rate * (std::log((1.0 - err) / err) + std::log(static_cast<double>(K - 1)));
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (pred[i] != data.y[i]) w[i] *= std::exp(alpha);
            require(std::isfinite(w[i]), ErrorCode::DegenerateWeights, "sample weight overflowed");
            sum += w[i];
        }
        require(sum >= 1e-300 && std::isfinite(sum), ErrorCode::DegenerateWeights, "sample weight mass collapsed");
        for (double& wi : w) wi /= sum;
        m.learners.push_back(std::move(t));
        m.alphas.push_back(alpha);
        m.history.push_back({err, alpha, w});
    }
    return m;
}

/// Predictions of the first `stages` learners (all when negative).
inline Labels ada_predict(const AdaModel& m, const Matrix& X, int stages = -1) {
    const std::size_t T = stages < 0 ? m.size() : std::min(m.size(), static_cast<std::size_t>(stages));
    Matrix votes = Matrix::Zero(X.rows(), m.n_classes);
    for (std::size_t t = 0; t < T; ++t) {
        const Labels p = m.learners[t].predict(X);
        for (Eigen::Index i = 0; i < X.rows(); ++i) votes(i, p[static_cast<std::size_t>(i)]) += m.alphas[t];
    }
    Labels out(static_cast<std::size_t>(X.rows()), 0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::Index arg = 0;
        votes.row(i).maxCoeff(&arg);
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}

/// Predictions after each prefix length in `stages` (ascending), sharing one pass.
inline std::vector<Labels> ada_staged_predict(const AdaModel& m, const Matrix& X, const std::vector<int>& stages) {
    std::vector<Labels> out;
    Matrix votes = Matrix::Zero(X.rows(), m.n_classes);
    std::size_t done = 0;
    auto snapshot = [&] {
        Labels l(static_cast<std::size_t>(X.rows()), 0);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            Eigen::Index arg = 0;
            votes.row(i).maxCoeff(&arg);
            l[static_cast<std::size_t>(i)] = static_cast<int>(arg);
        }
        return l;
    };
    for (int s : stages) {
        const std::size_t target = std::min(m.size(), static_cast<std::size_t>(std::max(s, 0)));
        for (; done < target; ++done) {
            const Labels p = m.learners[done].predict(X);
            for (Eigen::Index i = 0; i < X.rows(); ++i) votes(i, p[static_cast<std::size_t>(i)]) += m.alphas[done];
        }
        out.push_back(snapshot());
    }
    return out;
}

inline nlohmann::json to_json(const AdaModel& m) {
    nlohmann::json learners = nlohmann::json::array();
    for (const auto& t : m.learners) learners.push_back(tree::to_json(t));
    return {{"n_classes", m.n_classes}, {"alphas", m.alphas}, {"learners", learners}};
}

inline AdaModel ada_from_json(const nlohmann::json& j) {
    AdaModel m;
    m.n_classes = j.at("n_classes").get<int>();
    m.alphas = j.at("alphas").get<std::vector<double>>();
    for (const auto& t : j.at("learners")) m.learners.push_back(tree::tree_from_json(t));
    require(m.alphas.size() == m.learners.size(), ErrorCode::ShapeMismatch, "alpha count differs from learner count");
    return m;
}

} // namespace fusepipe::ada
