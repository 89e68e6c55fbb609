#pragma once

// Weighted CART classification tree. Shared by AdaBoost (stumps) and the
// random forest.
//
// Every node draws its feature subset from its own generator, seeded from the
// parent's seed and the branch taken, so a depth-capped tree is exactly the
// uncapped tree cut at that depth.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "fusepipe/classifiers/params.hpp"
#include "fusepipe/rng.hpp"

namespace fusepipe::tree {

enum class Criterion { Gini, Entropy };

struct TreeConfig {
    Criterion criterion = Criterion::Gini;
    int max_depth = -1; // < 0: unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    int max_features = 0; // <= 0 or >= d: all features
};

struct Node {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int depth = 0;
    int label = 0; // weighted majority of the rows reaching the node
    double weight = 0.0;
};

struct Tree {
    std::vector<Node> nodes; // preorder, root first
    int n_features = 0;
    int n_classes = 0;
    int depth = 0; // deepest node

    /// Prediction with the tree cut at `depth_cap` (< 0: no cut).
    int predict(const double* x, int depth_cap = -1) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0 &&
               (depth_cap < 0 || nodes[static_cast<std::size_t>(i)].depth < depth_cap)) {
            const Node& n = nodes[static_cast<std::size_t>(i)];
            i = x[n.feature] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].label;
    }

    Labels predict(const Matrix& X, int depth_cap = -1) const {
        require(X.cols() == n_features, ErrorCode::ShapeMismatch, "tree input width differs from training");
        Labels out(static_cast<std::size_t>(X.rows()));
        for (Eigen::Index r = 0; r < X.rows(); ++r) out[static_cast<std::size_t>(r)] = predict(X.row(r).data(), depth_cap);
        return out;
    }
};

inline double impurity(const std::vector<double>& counts, double total, Criterion c) {
    if (total <= 0.0) return 0.0;
    double acc = 0.0;
    if (c == Criterion::Gini) {
        for (double v : counts) acc += (v / total) * (v / total);
        return 1.0 - acc;
    }
    for (double v : counts)
        if (v > 0.0) acc -= (v / total) * std::log2(v / total);
    return acc;
}

inline int majority(const std::vector<double>& counts) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(counts.size()); ++k)
        if (counts[static_cast<std::size_t>(k)] > counts[static_cast<std::size_t>(best)]) best = k;
    return best;
}

namespace detail {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();
};

class Builder {
public:
    Builder(const Matrix& X, const Labels& y, const std::vector<double>& w, int K, const TreeConfig& c)
        : X_(X), y_(y), w_(w), K_(K), c_(c) {}

    int build(std::vector<std::size_t>& rows, int depth, std::uint64_t seed, Tree& t) {
        std::vector<double> counts(static_cast<std::size_t>(K_), 0.0);
        double total = 0.0;
        for (std::size_t r : rows) {
            counts[static_cast<std::size_t>(y_[r])] += w_[r];
            total += w_[r];
        }
        const int id = static_cast<int>(t.nodes.size());
        Node node;
        node.depth = depth;
        node.label = majority(counts);
        node.weight = total;
        t.nodes.push_back(node);
        t.depth = std::max(t.depth, depth);

        const int n = static_cast<int>(rows.size());
        const bool pure = std::count_if(counts.begin(), counts.end(), [](double v) { return v > 0.0; }) <= 1;
        if (pure || (c_.max_depth >= 0 && depth >= c_.max_depth) || n < c_.min_samples_split ||
            n < 2 * c_.min_samples_leaf)
            return id;

        const Split s = best_split(rows, total, seed);
        if (s.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (std::size_t r : rows) (X_(static_cast<Eigen::Index>(r), s.feature) <= s.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        t.nodes[static_cast<std::size_t>(id)].feature = s.feature;
        t.nodes[static_cast<std::size_t>(id)].threshold = s.threshold;
        const int l = build(left, depth + 1, derive_seed(seed, std::uint64_t{0}), t);
        t.nodes[static_cast<std::size_t>(id)].left = l;
        const int r = build(right, depth + 1, derive_seed(seed, std::uint64_t{1}), t);
        t.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }

private:
    Split best_split(const std::vector<std::size_t>& rows, double total, std::uint64_t seed) const {
        const int d = static_cast<int>(X_.cols());
        std::vector<int> features;
        if (c_.max_features <= 0 || c_.max_features >= d) {
            features.resize(static_cast<std::size_t>(d));
            std::iota(features.begin(), features.end(), 0);
        } else {
            Rng rng(seed);
            for (std::size_t f : rng.sample_without_replacement(static_cast<std::size_t>(d),
                                                                static_cast<std::size_t>(c_.max_features)))
                features.push_back(static_cast<int>(f));
            std::sort(features.begin(), features.end());
        }

        Split best;
        std::vector<std::size_t> order(rows);
        std::vector<double> left(static_cast<std::size_t>(K_)), right(static_cast<std::size_t>(K_));
        const std::size_t n = rows.size();
        const auto min_leaf = static_cast<std::size_t>(c_.min_samples_leaf);
        for (int f : features) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = X_(static_cast<Eigen::Index>(a), f), vb = X_(static_cast<Eigen::Index>(b), f);
                return va < vb || (va == vb && a < b);
            });
            std::fill(left.begin(), left.end(), 0.0);
            std::fill(right.begin(), right.end(), 0.0);
            for (std::size_t r : order) right[static_cast<std::size_t>(y_[r])] += w_[r];
            double wl = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const std::size_t r = order[i];
                left[static_cast<std::size_t>(y_[r])] += w_[r];
                right[static_cast<std::size_t>(y_[r])] -= w_[r];
                wl += w_[r];
                const double v = X_(static_cast<Eigen::Index>(r), f);
                const double next = X_(static_cast<Eigen::Index>(order[i + 1]), f);
                if (!(next > v) || i + 1 < min_leaf || n - i - 1 < min_leaf) continue;
                const double wr = total - wl;
                const double score = (wl * impurity(left, wl, c_.criterion) + wr * impurity(right, wr, c_.criterion)) / total;
                if (score < best.score) {
                    double thr = v + (next - v) / 2.0;
                    if (!(thr < next)) thr = v;
                    best = {f, thr, score};
                }
            }
        }
        return best;
    }

    const Matrix& X_;
    const Labels& y_;
    const std::vector<double>& w_;
    int K_;
    const TreeConfig& c_;
};

} // namespace detail

/// Fits on rows with non-zero weight. `weights` empty means unit weights.
inline Tree fit_tree(const Matrix& X, const Labels& y, int n_classes, const TreeConfig& c, std::uint64_t seed,
                     const std::vector<double>& weights = {}) {
    require(static_cast<Eigen::Index>(y.size()) == X.rows(), ErrorCode::LengthMismatch, "labels and rows differ in count");
    require(weights.empty() || weights.size() == y.size(), ErrorCode::LengthMismatch, "weights and rows differ in count");
    const std::vector<double> unit = weights.empty() ? std::vector<double>(y.size(), 1.0) : std::vector<double>{};
    const std::vector<double>& w = weights.empty() ? unit : weights;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (w[i] > 0.0) rows.push_back(i);
    require(!rows.empty(), ErrorCode::DegenerateWeights, "no training row carries positive weight");

    Tree t;
    t.n_features = static_cast<int>(X.cols());
    t.n_classes = n_classes;
    detail::Builder b(X, y, w, n_classes, c);
    b.build(rows, 0, seed, t);
    return t;
}

inline nlohmann::json to_json(const Tree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const Node& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.depth, n.label, n.weight});
    return {{"n_features", t.n_features}, {"n_classes", t.n_classes}, {"depth", t.depth}, {"nodes", nodes}};
}

inline Tree tree_from_json(const nlohmann::json& j) {
    Tree t;
    t.n_features = j.at("n_features").get<int>();
    t.n_classes = j.at("n_classes").get<int>();
    t.depth = j.at("depth").get<int>();
    for (const auto& a : j.at("nodes"))
        t.nodes.push_back({a[0].get<int>(), a[1].get<double>(), a[2].get<int>(), a[3].get<int>(), a[4].get<int>(),
                           a[5].get<int>(), a[6].get<double>()});
    require(!t.nodes.empty(), ErrorCode::ShapeMismatch, "tree has no nodes");
    return t;
}

} // namespace fusepipe::tree
