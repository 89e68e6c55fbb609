#pragma once

// Two-class Gaussian fixture: several feature "views" of the same labelled
// samples, standing in for embeddings from different extractors.

#include <string>
#include <vector>

#include "fusepipe/featureio.hpp"
#include "fusepipe/rng.hpp"

namespace fusepipe::synthetic {

struct SyntheticSpec {
    int n = 400;
    int d = 16;
    double separation = 4.0; // distance between class means per feature, in noise std units
    int views = 3;
    std::uint64_t seed = 7;
};

struct SyntheticData {
    std::vector<FeatureMatrix> views;
    std::vector<std::string> labels; // raw label per sample, shared by every view
};

/// Class c in {0,1} has mean (c - 1/2) * separation on every feature, unit noise.
inline SyntheticData make(const SyntheticSpec& s) {
    require(s.n >= 2 && s.d >= 1 && s.views >= 1, ErrorCode::ParamOutOfRange, "synthetic dataset shape is degenerate");
    SyntheticData out;
    std::vector<int> y(static_cast<std::size_t>(s.n));
    for (int i = 0; i < s.n; ++i) y[static_cast<std::size_t>(i)] = i < s.n / 2 ? 0 : 1;
    Rng order(derive_seed(s.seed, "labels"));
    order.shuffle(y);
    std::vector<std::string> ids;
    char buf[32];
    for (int i = 0; i < s.n; ++i) {
        std::snprintf(buf, sizeof buf, "s%04d", i);
        ids.emplace_back(buf);
        out.labels.push_back(std::to_string(y[static_cast<std::size_t>(i)]));
    }
    for (int v = 0; v < s.views; ++v) {
        FeatureMatrix fm;
        fm.model_tag = "view_" + std::string(1, static_cast<char>('a' + v));
        fm.sample_ids = ids;
        fm.values.resize(s.n, s.d);
        Rng rng(derive_seed(s.seed, "view/" + std::to_string(v)));
        for (int i = 0; i < s.n; ++i) {
            const double mu = (y[static_cast<std::size_t>(i)] - 0.5) * s.separation;
            for (int j = 0; j < s.d; ++j) fm.values(i, j) = mu + rng.normal();
        }
        out.views.push_back(std::move(fm));
    }
    return out;
}

} // namespace fusepipe::synthetic
