#pragma once

// Feature-level fusion and classifier-level majority voting.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fusepipe/evalreport.hpp"
#include "fusepipe/featureio.hpp"

namespace fusepipe::ensemble {

struct RankedSet {
    std::string tag;
    double mean = 0.0;
    double stddev = 0.0;
    int rank = 0; // 1 is best
};

using ModelRanking = std::vector<RankedSet>;

/// Rows of a complete report ordered by mean accuracy desc, std asc, name asc.
inline ModelRanking rank_feature_sets(const RunReport& report) {
    report.require_complete();
    ModelRanking out;
    for (const auto& row : report.rows) {
        const double m = report.row_mean(row);
        double ss = 0.0;
        for (const auto& c : report.columns) ss += (report.at(row, c) - m) * (report.at(row, c) - m);
        out.push_back({row, m, std::sqrt(ss / static_cast<double>(report.columns.size())), 0});
    }
    std::sort(out.begin(), out.end(), [](const RankedSet& a, const RankedSet& b) {
        if (a.mean != b.mean) return a.mean > b.mean;
        if (a.stddev != b.stddev) return a.stddev < b.stddev;
        return a.tag < b.tag;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
    return out;
}

inline std::vector<std::string> top_tags(const ModelRanking& r, std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, r.size()); ++i) out.push_back(r[i].tag);
    return out;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep = "+") {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

/// Column-wise concatenation in source order.
inline FeatureMatrix fuse_features(const std::vector<const FeatureMatrix*>& sources) {
    require(!sources.empty(), ErrorCode::Empty, "no sources to fuse");
    const FeatureMatrix& first = *sources.front();
    Eigen::Index d = 0;
    std::vector<std::string> tags;
    for (const FeatureMatrix* s : sources) {
        require(s->sample_ids == first.sample_ids, ErrorCode::RowMisalignment,
                "feature set '" + s->model_tag + "' does not share the sample order of '" + first.model_tag + "'");
        d += s->values.cols();
        tags.push_back(s->model_tag);
    }
    FeatureMatrix out;
    out.sample_ids = first.sample_ids;
    out.model_tag = join(tags);
    out.values.resize(first.values.rows(), d);
    Eigen::Index at = 0;
    for (const FeatureMatrix* s : sources) {
        out.values.middleCols(at, s->values.cols()) = s->values;
        at += s->values.cols();
    }
    return out;
}

inline FeatureMatrix fuse_features(const std::vector<FeatureMatrix>& sources) {
    std::vector<const FeatureMatrix*> ptrs;
    for (const auto& s : sources) ptrs.push_back(&s);
    return fuse_features(ptrs);
}

/// Pairs then the triple: [A+B, A+C, B+C, A+B+C].
inline std::vector<std::vector<std::string>> enumerate_fusions(const std::vector<std::string>& top3) {
    require(top3.size() == 3, ErrorCode::LengthMismatch, "fusion enumeration needs exactly three tags");
    return {{top3[0], top3[1]}, {top3[0], top3[2]}, {top3[1], top3[2]}, {top3[0], top3[1], top3[2]}};
}

/// Report columns ordered by mean accuracy over the given rows (ties keep
/// column order); the first `k` are returned.
inline std::vector<std::string> rank_classifiers(const RunReport& report, std::size_t k,
                                                 const std::vector<std::string>& over_rows) {
    require(k >= 1 && k <= report.columns.size(), ErrorCode::ParamOutOfRange,
            "cannot pick " + std::to_string(k) + " of " + std::to_string(report.columns.size()) + " classifiers");
    require(!over_rows.empty(), ErrorCode::IncompleteReport, "no feature sets to rank classifiers over");
    std::vector<std::pair<double, std::size_t>> score;
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
        double s = 0.0;
        for (const auto& r : over_rows) s += report.at(r, report.columns[c]);
        score.emplace_back(s / static_cast<double>(over_rows.size()), c);
    }
    std::stable_sort(score.begin(), score.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(report.columns[score[i].second]);
    return out;
}

/// Top-N feature sets of the report, then its top-k classifiers over them.
inline std::vector<std::string> rank_classifiers(const RunReport& report, std::size_t k, std::size_t top_sets = 5) {
    return rank_classifiers(report, k, top_tags(rank_feature_sets(report), top_sets));
}

enum class VotePolicy { SimpleMajority, Weighted };

/// Per-sample modal label. `ranks[m]` is member m's rank (1 best); a tie goes
/// to the label of the best-ranked member among the tied labels.
inline Labels majority_vote(const std::vector<Labels>& predictions, const std::vector<int>& ranks,
                            VotePolicy policy = VotePolicy::SimpleMajority, const std::vector<double>& weights = {}) {
    require(!predictions.empty(), ErrorCode::Empty, "no voters");
    require(ranks.size() == predictions.size(), ErrorCode::LengthMismatch, "one rank per voter is required");
    if (policy == VotePolicy::Weighted) {
        require(weights.size() == predictions.size(), ErrorCode::LengthMismatch, "one weight per voter is required");
        for (double w : weights) require(w > 0.0, ErrorCode::ParamOutOfRange, "vote weights must be positive");
    }
    const std::size_t n = predictions.front().size();
    for (const auto& p : predictions)
        require(p.size() == n, ErrorCode::LengthMismatch, "voters predicted different sample counts");
    std::vector<std::size_t> by_rank(predictions.size());
    std::iota(by_rank.begin(), by_rank.end(), std::size_t{0});
    std::stable_sort(by_rank.begin(), by_rank.end(), [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });

    Labels out(n);
    std::map<int, double> tally;
    for (std::size_t i = 0; i < n; ++i) {
        tally.clear();
        for (std::size_t m = 0; m < predictions.size(); ++m)
            tally[predictions[m][i]] += policy == VotePolicy::Weighted ? weights[m] : 1.0;
        double best = 0.0;
        for (const auto& [label, v] : tally) best = std::max(best, v);
        for (std::size_t m : by_rank)
            if (tally[predictions[m][i]] == best) {
                out[i] = predictions[m][i];
                break;
            }
    }
    return out;
}

struct VotingEnsemble {
    std::vector<std::string> members; // classifier names, best rank first
    std::vector<int> ranks;
    VotePolicy policy = VotePolicy::SimpleMajority;
    std::vector<double> weights;

    std::string name() const { return join(members); }
};

/// The three pairs and the triple of the top-3 classifiers.
inline std::vector<VotingEnsemble> vote_combinations(const std::vector<std::string>& top3) {
    std::vector<VotingEnsemble> out;
    const std::vector<int> rank{1, 2, 3};
    for (const auto& combo : enumerate_fusions(top3)) {
        VotingEnsemble e;
        e.members = combo;
        for (const auto& m : combo) e.ranks.push_back(rank[static_cast<std::size_t>(std::find(top3.begin(), top3.end(), m) - top3.begin())]);
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace fusepipe::ensemble
