#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fusepipe/featureio.hpp"
#include "fusepipe/rng.hpp"

namespace fptest {

using fusepipe::LabeledDataset;
using fusepipe::Matrix;

inline std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "s") {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
    return ids;
}

inline LabeledDataset dataset(const Matrix& X, const std::vector<int>& y, int n_classes) {
    LabeledDataset ds;
    ds.features.values = X;
    ds.features.model_tag = "t";
    ds.features.sample_ids = make_ids(static_cast<std::size_t>(X.rows()));
    ds.labels = y;
    for (int c = 0; c < n_classes; ++c) ds.class_names.push_back(std::to_string(c));
    return ds;
}

/// Gaussian blobs: class c is centred at c * gap on every axis.
inline LabeledDataset blobs(std::size_t n, std::size_t d, int k, double gap, std::uint64_t seed) {
    fusepipe::Rng rng(seed);
    Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % static_cast<std::size_t>(k));
        for (std::size_t j = 0; j < d; ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y[i] * gap + rng.normal();
    }
    return dataset(X, y, k);
}

/// Uniform values on a small integer lattice so that ties occur.
inline Matrix lattice(std::size_t n, std::size_t d, int levels, fusepipe::Rng& rng) {
    Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels)));
    return X;
}

inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("fusepipe_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace fptest
