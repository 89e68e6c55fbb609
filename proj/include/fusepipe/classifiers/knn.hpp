#pragma once

// k-nearest-neighbour vote over a stored training set.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fusepipe/classifiers/params.hpp"
#include "fusepipe/transforms.hpp"

namespace fusepipe::knn {

enum class Weighting { Uniform, Distance };

struct KnnConfig {
    int n_neighbors = 5;
    Weighting weights = Weighting::Uniform;
    double p = 2.0; // Minkowski order; euclidean is 2, manhattan is 1
};

inline KnnConfig config_from(const ParamMap& prm) {
    static const std::set<std::string> keys{"n_neighbors", "weights", "algorithm", "leaf_size", "p", "metric", "n_jobs"};
    params::check_keys(prm, keys, Kind::KNN);
    KnnConfig c;
    c.n_neighbors = static_cast<int>(params::integer(prm, "n_neighbors", 5));
    if (c.n_neighbors < 1) params::bad("n_neighbors", "must be >= 1");
    c.weights = params::one_of(prm, "weights", "uniform", {"uniform", "distance"}) == "distance" ? Weighting::Distance
                                                                                                 : Weighting::Uniform;
    params::one_of(prm, "algorithm", "auto", {"auto", "ball_tree", "kd_tree", "brute"});
    if (params::integer(prm, "leaf_size", 30) < 1) params::bad("leaf_size", "must be >= 1");
    params::integer(prm, "n_jobs", 1);
    const double p = params::number(prm, "p", 2.0);
    if (!(p >= 1.0)) params::bad("p", "must be >= 1");
    const std::string metric = params::one_of(prm, "metric", "minkowski", {"euclidean", "manhattan", "minkowski"});
    c.p = metric == "euclidean" ? 2.0 : metric == "manhattan" ? 1.0 : p;
    return c;
}

/// Distance before the final root, monotone in the true distance.
inline double reduced_distance(const double* a, const double* b, Eigen::Index d, double p) {
    double acc = 0.0;
    if (p == 1.0)
        for (Eigen::Index j = 0; j < d; ++j) acc += std::abs(a[j] - b[j]);
    else if (p == 2.0)
        for (Eigen::Index j = 0; j < d; ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
    else
        for (Eigen::Index j = 0; j < d; ++j) acc += std::pow(std::abs(a[j] - b[j]), p);
    return acc;
}

inline double true_distance(double reduced, double p) {
    if (p == 1.0) return reduced;
    if (p == 2.0) return std::sqrt(reduced);
    return std::pow(reduced, 1.0 / p);
}

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
};

/// The `k` nearest training rows for every query row, nearest first, ties to
/// the lower training index.
inline std::vector<std::vector<Neighbor>> neighbor_table(const Matrix& train, const Matrix& queries, double p,
                                                         std::size_t k) {
    require(train.cols() == queries.cols(), ErrorCode::ShapeMismatch, "KNN query width differs from training");
    const std::size_t n = static_cast<std::size_t>(train.rows());
    k = std::min(k, n);
    std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(queries.rows()));
    std::vector<double> dist(n);
    std::vector<std::size_t> order(n);
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        for (std::size_t i = 0; i < n; ++i)
            dist[i] = reduced_distance(queries.row(q).data(), train.row(static_cast<Eigen::Index>(i)).data(),
                                       train.cols(), p);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
        auto& row = out[static_cast<std::size_t>(q)];
        row.reserve(k);
        for (std::size_t i = 0; i < k; ++i) row.push_back({order[i], true_distance(dist[order[i]], p)});
    }
    return out;
}

/// Vote among the first `k` entries of an ordered neighbour list.
inline int vote(const std::vector<Neighbor>& neighbors, std::size_t k, const Labels& labels, int n_classes,
                Weighting weighting) {
    k = std::min(k, neighbors.size());
    std::vector<double> score(static_cast<std::size_t>(n_classes), 0.0);
    bool exact = false;
    if (weighting == Weighting::Distance)
        for (std::size_t i = 0; i < k; ++i) exact = exact || neighbors[i].distance == 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const auto cls = static_cast<std::size_t>(labels[neighbors[i].index]);
        if (weighting == Weighting::Uniform) score[cls] += 1.0;
        else if (exact) score[cls] += neighbors[i].distance == 0.0 ? 1.0 : 0.0;
        else score[cls] += 1.0 / neighbors[i].distance;
    }
    const double best = *std::max_element(score.begin(), score.end());
    for (std::size_t i = 0; i < k; ++i) {
        const int cls = labels[neighbors[i].index];
        if (score[static_cast<std::size_t>(cls)] == best) return cls;
    }
    return static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
}

struct KnnModel {
    Matrix X;
    Labels y;
    int n_classes = 2;
    KnnConfig config;
};

inline KnnModel train_knn(const KnnConfig& c, const TrainView& data) {
    require(static_cast<Eigen::Index>(c.n_neighbors) <= data.X.rows(), ErrorCode::ParamOutOfRange,
            "n_neighbors=" + std::to_string(c.n_neighbors) + " exceeds " + std::to_string(data.X.rows()) +
                " training rows");
    return {data.X, data.y, data.n_classes, c};
}

inline Labels knn_predict(const KnnModel& m, const Matrix& X) {
    const auto table = neighbor_table(m.X, X, m.config.p, static_cast<std::size_t>(m.config.n_neighbors));
    Labels out(static_cast<std::size_t>(X.rows()));
    for (std::size_t q = 0; q < table.size(); ++q)
        out[q] = vote(table[q], static_cast<std::size_t>(m.config.n_neighbors), m.y, m.n_classes, m.config.weights);
    return out;
}

inline nlohmann::json to_json(const KnnModel& m) {
    return {{"X", transforms::matrix_json(m.X)},
            {"y", m.y},
            {"n_classes", m.n_classes},
            {"n_neighbors", m.config.n_neighbors},
            {"weights", m.config.weights == Weighting::Distance ? "distance" : "uniform"},
            {"p", m.config.p}};
}

inline KnnModel knn_from_json(const nlohmann::json& j) {
    KnnModel m;
    m.X = transforms::json_matrix(j.at("X"));
    m.y = j.at("y").get<Labels>();
    m.n_classes = j.at("n_classes").get<int>();
    m.config.n_neighbors = j.at("n_neighbors").get<int>();
    m.config.weights = j.at("weights").get<std::string>() == "distance" ? Weighting::Distance : Weighting::Uniform;
    m.config.p = j.at("p").get<double>();
    return m;
}

} // namespace fusepipe::knn
