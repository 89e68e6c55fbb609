#pragma once

// Newton-step gradient boosted regression trees on logistic loss. Binary
// problems fit one score; K > 2 classes fit one-vs-rest scores.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fusepipe/classifiers/params.hpp"
#include "fusepipe/rng.hpp"

namespace fusepipe::gbdt {

struct GbdtConfig {
    int n_estimators = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    double subsample = 1.0;
    double reg_lambda = 1.0;
    double min_child_weight = 1.0;
};

inline GbdtConfig config_from(const ParamMap& p) {
    static const std::set<std::string> keys{"n_estimators", "max_depth", "learning_rate", "subsample"};
    params::check_keys(p, keys, Kind::GBDT);
    GbdtConfig c;
    c.n_estimators = static_cast<int>(params::integer(p, "n_estimators", 100));
    if (c.n_estimators < 0) params::bad("n_estimators", "must be >= 0");
    c.max_depth = static_cast<int>(params::integer(p, "max_depth", 3));
    if (c.max_depth < 1) params::bad("max_depth", "must be >= 1");
    c.learning_rate = params::number(p, "learning_rate", 0.1);
    if (!(c.learning_rate > 0.0)) params::bad("learning_rate", "must be > 0");
    c.subsample = params::number(p, "subsample", 1.0);
    if (!(c.subsample > 0.0 && c.subsample <= 1.0)) params::bad("subsample", "must lie in (0,1]");
    return c;
}

struct RegNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0; // leaf weight
};

struct RegTree {
    std::vector<RegNode> nodes;

    double predict(const double* x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const RegNode& n = nodes[static_cast<std::size_t>(i)];
            i = x[n.feature] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

inline double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

inline double logistic_loss(double score, double y) {
    // log(1 + e^s) - y s, evaluated stably
    return std::max(score, 0.0) + std::log1p(std::exp(-std::abs(score))) - y * score;
}

namespace detail {

class RegBuilder {
public:
    RegBuilder(const Matrix& X, const std::vector<double>& g, const std::vector<double>& h, const GbdtConfig& c)
        : X_(X), g_(g), h_(h), c_(c) {}

    int build(const std::vector<std::size_t>& rows, int depth, RegTree& t) {
        double G = 0.0, H = 0.0;
        for (std::size_t r : rows) {
            G += g_[r];
            H += h_[r];
        }
        const int id = static_cast<int>(t.nodes.size());
        t.nodes.push_back({});
        t.nodes.back().value = -G / (H + c_.reg_lambda);
        if (depth >= c_.max_depth || rows.size() < 2) return id;

        const double parent = G * G / (H + c_.reg_lambda);
        int best_f = -1;
        double best_thr = 0.0, best_gain = 0.0;
        std::vector<std::size_t> order(rows);
        for (Eigen::Index f = 0; f < X_.cols(); ++f) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = X_(static_cast<Eigen::Index>(a), f), vb = X_(static_cast<Eigen::Index>(b), f);
                return va < vb || (va == vb && a < b);
            });
            double GL = 0.0, HL = 0.0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                GL += g_[order[i]];
                HL += h_[order[i]];
                const double v = X_(static_cast<Eigen::Index>(order[i]), f);
                const double next = X_(static_cast<Eigen::Index>(order[i + 1]), f);
                const double HR = H - HL;
                if (!(next > v) || HL < c_.min_child_weight || HR < c_.min_child_weight) continue;
                const double GR = G - GL;
                const double gain =
                    0.5 * (GL * GL / (HL + c_.reg_lambda) + GR * GR / (HR + c_.reg_lambda) - parent);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = static_cast<int>(f);
                    best_thr = v + (next - v) / 2.0;
                    if (!(best_thr < next)) best_thr = v;
                }
            }
        }
        if (best_f < 0) return id;
        std::vector<std::size_t> left, right;
        for (std::size_t r : rows) (X_(static_cast<Eigen::Index>(r), best_f) <= best_thr ? left : right).push_back(r);
        t.nodes[static_cast<std::size_t>(id)].feature = best_f;
        t.nodes[static_cast<std::size_t>(id)].threshold = best_thr;
        const int l = build(left, depth + 1, t);
        t.nodes[static_cast<std::size_t>(id)].left = l;
        const int r = build(right, depth + 1, t);
        t.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }

private:
    const Matrix& X_;
    const std::vector<double>& g_;
    const std::vector<double>& h_;
    const GbdtConfig& c_;
};

} // namespace detail

struct GbdtModel {
    int n_classes = 2;
    double learning_rate = 0.1;
    std::vector<double> base;                // per score column
    std::vector<std::vector<RegTree>> trees; // per score column, in boosting order
    std::vector<std::vector<double>> train_loss; // mean training loss after each stage, per column

    std::size_t columns() const noexcept { return base.size(); }
    std::size_t stages() const noexcept { return trees.empty() ? 0 : trees.front().size(); }
};

inline GbdtModel train_gbdt(const GbdtConfig& c, const TrainView& data, std::uint64_t seed) {
    const std::size_t n = data.y.size();
    require(n > 0, ErrorCode::Empty, "GBDT needs training rows");
    GbdtModel m;
    m.n_classes = data.n_classes;
    m.learning_rate = c.learning_rate;
    const int columns = data.n_classes <= 2 ? 1 : data.n_classes;
    for (int col = 0; col < columns; ++col) {
        const int positive = columns == 1 ? 1 : col;
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = data.y[i] == positive ? 1.0 : 0.0;
        const double prior = std::clamp(std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n), 1e-12,
                                        1.0 - 1e-12);
        const double base = std::log(prior / (1.0 - prior));
        std::vector<double> score(n, base), g(n), h(n);
        std::vector<RegTree> trees;
        std::vector<double> losses;
        Rng rng(derive_seed(seed, "gbdt/" + std::to_string(col)));
        for (int round = 0; round < c.n_estimators; ++round) {
            std::vector<std::size_t> rows;
            for (std::size_t i = 0; i < n; ++i) {
                const double p = sigmoid(score[i]);
                g[i] = p - y[i];
                h[i] = p * (1.0 - p);
                if (c.subsample >= 1.0 || rng.uniform() < c.subsample) rows.push_back(i);
            }
            RegTree t;
            detail::RegBuilder(data.X, g, h, c).build(rows, 0, t);
            double loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                score[i] += c.learning_rate * t.predict(data.X.row(static_cast<Eigen::Index>(i)).data());
                loss += logistic_loss(score[i], y[i]);
            }
            losses.push_back(loss / static_cast<double>(n));
            trees.push_back(std::move(t));
        }
        m.base.push_back(base);
        m.trees.push_back(std::move(trees));
        m.train_loss.push_back(std::move(losses));
    }
    return m;
}

/// Raw scores after the first `stages` trees (all when negative); rows are samples.
inline Matrix decision_function(const GbdtModel& m, const Matrix& X, int stages = -1) {
    const std::size_t T = stages < 0 ? m.stages() : std::min(m.stages(), static_cast<std::size_t>(stages));
    Matrix s(X.rows(), static_cast<Eigen::Index>(m.columns()));
    for (std::size_t col = 0; col < m.columns(); ++col)
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t t = 0; t < T; ++t) acc += m.trees[col][t].predict(X.row(i).data());
            s(i, static_cast<Eigen::Index>(col)) = m.base[col] + m.learning_rate * acc;
        }
    return s;
}

inline Labels labels_from_scores(const Matrix& s) {
    Labels out(static_cast<std::size_t>(s.rows()));
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        if (s.cols() == 1) {
            out[static_cast<std::size_t>(i)] = s(i, 0) > 0.0 ? 1 : 0;
        } else {
            Eigen::Index arg = 0;
            s.row(i).maxCoeff(&arg);
            out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
        }
    }
    return out;
}

/// Class probabilities; binary uses the logistic link, one-vs-rest columns are renormalised.
inline Matrix predict_proba(const GbdtModel& m, const Matrix& X, int stages = -1) {
    const Matrix s = decision_function(m, X, stages);
    Matrix p(X.rows(), m.columns() == 1 ? 2 : static_cast<Eigen::Index>(m.columns()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (m.columns() == 1) {
            p(i, 1) = sigmoid(s(i, 0));
            p(i, 0) = 1.0 - p(i, 1);
        } else {
            for (Eigen::Index k = 0; k < s.cols(); ++k) p(i, k) = sigmoid(s(i, k));
            p.row(i) /= p.row(i).sum();
        }
    }
    return p;
}

inline Labels gbdt_predict(const GbdtModel& m, const Matrix& X, int stages = -1) {
    return labels_from_scores(decision_function(m, X, stages));
}

/// Predictions after each prefix length in ascending `stages`, sharing one pass.
inline std::vector<Labels> gbdt_staged_predict(const GbdtModel& m, const Matrix& X, const std::vector<int>& stages) {
    std::vector<Labels> out;
    Matrix acc = Matrix::Zero(X.rows(), static_cast<Eigen::Index>(m.columns()));
    std::size_t done = 0;
    for (int s : stages) {
        const std::size_t target = std::min(m.stages(), static_cast<std::size_t>(std::max(s, 0)));
        for (; done < target; ++done)
            for (std::size_t col = 0; col < m.columns(); ++col)
                for (Eigen::Index i = 0; i < X.rows(); ++i)
                    acc(i, static_cast<Eigen::Index>(col)) += m.trees[col][done].predict(X.row(i).data());
        Matrix scores(acc.rows(), acc.cols());
        for (std::size_t col = 0; col < m.columns(); ++col)
            scores.col(static_cast<Eigen::Index>(col)) =
                (m.base[col] + m.learning_rate * acc.col(static_cast<Eigen::Index>(col)).array()).matrix();
        out.push_back(labels_from_scores(scores));
    }
    return out;
}

inline nlohmann::json to_json(const GbdtModel& m) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& trees : m.trees) {
        nlohmann::json ts = nlohmann::json::array();
        for (const auto& t : trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            ts.push_back(nodes);
        }
        cols.push_back(ts);
    }
    return {{"n_classes", m.n_classes}, {"learning_rate", m.learning_rate}, {"base", m.base}, {"trees", cols}};
}

inline GbdtModel gbdt_from_json(const nlohmann::json& j) {
    GbdtModel m;
    m.n_classes = j.at("n_classes").get<int>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.base = j.at("base").get<std::vector<double>>();
    for (const auto& ts : j.at("trees")) {
        std::vector<RegTree> trees;
        for (const auto& nodes : ts) {
            RegTree t;
            for (const auto& a : nodes)
                t.nodes.push_back({a[0].get<int>(), a[1].get<double>(), a[2].get<int>(), a[3].get<int>(), a[4].get<double>()});
            trees.push_back(std::move(t));
        }
        m.trees.push_back(std::move(trees));
    }
    require(m.trees.size() == m.base.size(), ErrorCode::ShapeMismatch, "GBDT column count mismatch");
    return m;
}

} // namespace fusepipe::gbdt
