#pragma once

// Bagged CART forest with per-node feature sampling.

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fusepipe/classifiers/decision_tree.hpp"
#include "fusepipe/classifiers/params.hpp"

namespace fusepipe::forest {

struct RfConfig {
    int n_estimators = 100;
    tree::TreeConfig tree;
    std::string max_features = "sqrt"; // sqrt | auto | log2 | all | integer text
    bool bootstrap = true;
    bool oob_score = false;
    std::optional<std::uint64_t> random_state;
};

inline RfConfig config_from(const ParamMap& p) {
    static const std::set<std::string> keys{"n_estimators",     "max_depth", "min_samples_split", "min_samples_leaf",
                                            "max_features",     "bootstrap", "criterion",         "oob_score",
                                            "random_state"};
    params::check_keys(p, keys, Kind::RandomForest);
    RfConfig c;
    c.n_estimators = static_cast<int>(params::integer(p, "n_estimators", 100));
    if (c.n_estimators < 1) params::bad("n_estimators", "must be >= 1");
    c.tree.max_depth = params::is_null(p, "max_depth") ? -1 : static_cast<int>(params::integer(p, "max_depth", -1));
    if (!params::is_null(p, "max_depth") && c.tree.max_depth < 1) params::bad("max_depth", "must be null or >= 1");
    c.tree.min_samples_split = static_cast<int>(params::integer(p, "min_samples_split", 2));
    if (c.tree.min_samples_split < 2) params::bad("min_samples_split", "must be >= 2");
    c.tree.min_samples_leaf = static_cast<int>(params::integer(p, "min_samples_leaf", 1));
    if (c.tree.min_samples_leaf < 1) params::bad("min_samples_leaf", "must be >= 1");
    c.tree.criterion = params::one_of(p, "criterion", "gini", {"gini", "entropy"}) == "entropy" ? tree::Criterion::Entropy
                                                                                              : tree::Criterion::Gini;
    if (const auto* mf = params::find(p, "max_features"); mf && !mf->is_null()) {
        if (mf->is_number_integer()) {
            if (mf->get<long>() < 1) params::bad("max_features", "must be >= 1");
            c.max_features = std::to_string(mf->get<long>());
        } else {
            c.max_features = params::one_of(p, "max_features", "sqrt", {"sqrt", "auto", "log2"});
        }
    } else if (mf) {
        c.max_features = "all";
    }
    c.bootstrap = params::flag(p, "bootstrap", true);
    c.oob_score = params::flag(p, "oob_score", false);
    if (!params::is_null(p, "random_state")) {
        const long rs = params::integer(p, "random_state", 0);
        if (rs < 0) params::bad("random_state", "must be >= 0");
        c.random_state = static_cast<std::uint64_t>(rs);
    }
    return c;
}

/// Number of features tried per node for input width `d`.
inline int resolve_max_features(const std::string& rule, int d) {
    int k = d;
    if (rule == "sqrt" || rule == "auto") k = static_cast<int>(std::floor(std::sqrt(static_cast<double>(d))));
    else if (rule == "log2") k = static_cast<int>(std::floor(std::log2(static_cast<double>(std::max(d, 1)))));
    else if (rule != "all") k = std::min(d, std::stoi(rule));
    return std::max(1, k);
}

struct RfModel {
    std::vector<tree::Tree> trees;
    int n_classes = 2;
};

inline std::uint64_t tree_seed(const RfConfig& c, std::uint64_t seed, std::size_t t) {
    return derive_seed(c.random_state.value_or(seed), static_cast<std::uint64_t>(t));
}

/// Multiplicity of each row in tree `t`'s bootstrap draw.
inline std::vector<double> bootstrap_weights(std::size_t n, std::uint64_t tseed) {
    std::vector<double> w(n, 0.0);
    Rng rng(derive_seed(tseed, "bootstrap"));
    for (std::size_t i = 0; i < n; ++i) w[rng.below(n)] += 1.0;
    return w;
}

inline RfModel train_rf(const RfConfig& c, const TrainView& data, std::uint64_t seed) {
    require(data.X.rows() > 0, ErrorCode::Empty, "random forest needs training rows");
    tree::TreeConfig tc = c.tree;
    tc.max_features = resolve_max_features(c.max_features, static_cast<int>(data.X.cols()));
    RfModel m;
    m.n_classes = data.n_classes;
    m.trees.reserve(static_cast<std::size_t>(c.n_estimators));
    const std::size_t n = data.y.size();
    for (int t = 0; t < c.n_estimators; ++t) {
        const std::uint64_t ts = tree_seed(c, seed, static_cast<std::size_t>(t));
        const std::vector<double> w = c.bootstrap ? bootstrap_weights(n, ts) : std::vector<double>(n, 1.0);
        m.trees.push_back(tree::fit_tree(data.X, data.y, data.n_classes, tc, derive_seed(ts, "nodes"), w));
    }
    return m;
}

namespace detail {
inline Labels majority(const Matrix& votes) {
    Labels out(static_cast<std::size_t>(votes.rows()), 0);
    for (Eigen::Index i = 0; i < votes.rows(); ++i) {
        Eigen::Index arg = 0;
        votes.row(i).maxCoeff(&arg); // first maximum: smaller class wins ties
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}
} // namespace detail

/// Majority over the trees, each cut at `depth_cap` (< 0: uncut).
inline Labels rf_predict(const RfModel& m, const Matrix& X, int depth_cap = -1) {
    Matrix votes = Matrix::Zero(X.rows(), m.n_classes);
    for (const auto& t : m.trees) {
        const Labels p = t.predict(X, depth_cap);
        for (Eigen::Index i = 0; i < X.rows(); ++i) votes(i, p[static_cast<std::size_t>(i)]) += 1.0;
    }
    return detail::majority(votes);
}

/// Predictions of the first s trees for each s in ascending `stages`.
inline std::vector<Labels> rf_staged_predict(const RfModel& m, const Matrix& X, const std::vector<int>& stages,
                                             int depth_cap = -1) {
    std::vector<Labels> out;
    Matrix votes = Matrix::Zero(X.rows(), m.n_classes);
    std::size_t done = 0;
    for (int s : stages) {
        const std::size_t target = std::min(m.trees.size(), static_cast<std::size_t>(std::max(s, 0)));
        for (; done < target; ++done) {
            const Labels p = m.trees[done].predict(X, depth_cap);
            for (Eigen::Index i = 0; i < X.rows(); ++i) votes(i, p[static_cast<std::size_t>(i)]) += 1.0;
        }
        out.push_back(detail::majority(votes));
    }
    return out;
}

inline int max_tree_depth(const RfModel& m) {
    int d = 0;
    for (const auto& t : m.trees) d = std::max(d, t.depth);
    return d;
}

inline nlohmann::json to_json(const RfModel& m) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) trees.push_back(tree::to_json(t));
    return {{"n_classes", m.n_classes}, {"trees", trees}};
}

inline RfModel rf_from_json(const nlohmann::json& j) {
    RfModel m;
    m.n_classes = j.at("n_classes").get<int>();
    for (const auto& t : j.at("trees")) m.trees.push_back(tree::tree_from_json(t));
    return m;
}

} // namespace fusepipe::forest
