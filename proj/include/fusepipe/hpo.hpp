#pragma once

// Exhaustive grid search with stratified k-fold cross-validation.
//
// Configurations whose effective parameters coincide are trained once.
// Configurations that differ only in a knob with prefix structure (ensemble
// size, depth cap, SMO stopping rule, neighbour count) share one training run
// per fold; every shared result is bit-identical to training that
// configuration on its own.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fusepipe/classifiers/classifier.hpp"
#include "fusepipe/featureio.hpp"
#include "fusepipe/grids.hpp"

namespace fusepipe::hpo {

struct HyperGrid {
    Kind kind = Kind::KNN;
    std::map<std::string, std::vector<nlohmann::json>> values; // sorted keys, candidates in listed order

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& [k, v] : values) n *= v.size();
        return n;
    }

    void validate() const {
        ParamMap probe;
        for (const auto& [k, v] : values) {
            require(!v.empty(), ErrorCode::EmptyList, "grid list '" + k + "' for " + std::string(to_string(kind)) + " is empty");
            probe[k] = v.front();
        }
        validate_spec({kind, probe, 0});
    }
};

inline HyperGrid grid_from_json(Kind kind, const nlohmann::json& j) {
    require(j.is_object(), ErrorCode::ConfigInvalid, "grid for " + std::string(to_string(kind)) + " must be an object");
    HyperGrid g{kind, {}};
    for (const auto& [k, v] : j.items()) {
        require(v.is_array(), ErrorCode::ConfigInvalid, "grid entry '" + k + "' must be a list");
        g.values[k] = std::vector<nlohmann::json>(v.begin(), v.end());
    }
    g.validate();
    return g;
}

inline HyperGrid builtin_grid(Kind kind, const std::string& set = "table4") {
    return grid_from_json(kind, grids::by_name(set).at(std::string(to_string(kind))));
}

/// Cartesian product, keys in sorted order, the last key varying fastest.
inline std::vector<ClassifierSpec> expand_grid(const HyperGrid& grid, std::uint64_t seed = 42) {
    for (const auto& [k, v] : grid.values)
        require(!v.empty(), ErrorCode::EmptyList, "grid list '" + k + "' is empty");
    std::vector<const std::string*> keys;
    std::vector<const std::vector<nlohmann::json>*> lists;
    for (const auto& [k, v] : grid.values) {
        keys.push_back(&k);
        lists.push_back(&v);
    }
    std::vector<ClassifierSpec> out;
    out.reserve(grid.size());
    std::vector<std::size_t> digit(keys.size(), 0);
    while (true) {
        ClassifierSpec s{grid.kind, {}, seed};
        for (std::size_t i = 0; i < keys.size(); ++i) s.params[*keys[i]] = (*lists[i])[digit[i]];
        out.push_back(std::move(s));
        std::size_t pos = keys.size();
        while (pos > 0) {
            --pos;
            if (++digit[pos] < lists[pos]->size()) break;
            digit[pos] = 0;
            if (pos == 0) return out;
        }
        if (keys.empty()) return out;
    }
}

struct CvConfig {
    int folds = 5;
    bool stratified = true;
    std::uint64_t seed = 42;
};

/// Validation index sets. Augmented copies stay with their source image.
inline std::vector<std::vector<std::size_t>> make_folds(const LabeledDataset& ds, const CvConfig& cv) {
    require(cv.folds >= 2, ErrorCode::UnsatisfiableFolds, "at least 2 folds are required");
    std::map<std::string, std::size_t, std::less<>> group_index;
    std::vector<std::vector<std::size_t>> groups;
    std::vector<int> group_label;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        const auto key = source_group(ds.features.sample_ids[i]);
        auto it = group_index.find(key);
        if (it == group_index.end()) {
            it = group_index.emplace(std::string(key), groups.size()).first;
            groups.emplace_back();
            group_label.push_back(ds.labels[i]);
        }
        groups[it->second].push_back(i);
    }
    const auto k = static_cast<std::size_t>(cv.folds);
    std::vector<std::vector<std::size_t>> strata;
    std::vector<std::string> stratum_tag;
    if (cv.stratified) {
        strata.resize(static_cast<std::size_t>(ds.num_classes()));
        for (std::size_t g = 0; g < groups.size(); ++g) strata[static_cast<std::size_t>(group_label[g])].push_back(g);
        for (int c = 0; c < ds.num_classes(); ++c) {
            const auto& s = strata[static_cast<std::size_t>(c)];
            require(s.empty() || s.size() >= k, ErrorCode::UnsatisfiableFolds,
                    "class '" + ds.class_names[static_cast<std::size_t>(c)] + "' has " + std::to_string(s.size()) +
                        " samples, fewer than " + std::to_string(k) + " folds");
            stratum_tag.push_back("fold/" + ds.class_names[static_cast<std::size_t>(c)]);
        }
    } else {
        require(groups.size() >= k, ErrorCode::UnsatisfiableFolds, "fewer samples than folds");
        strata.emplace_back(groups.size());
        std::iota(strata[0].begin(), strata[0].end(), std::size_t{0});
        stratum_tag.push_back("fold/all");
    }
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < strata.size(); ++s) {
        Rng rng(derive_seed(cv.seed, stratum_tag[s]));
        rng.shuffle(strata[s]);
        for (std::size_t pos = 0; pos < strata[s].size(); ++pos)
            for (std::size_t row : groups[strata[s][pos]]) folds[(offset + pos) % k].push_back(row);
        offset = (offset + strata[s].size()) % k;
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

struct LedgerEntry {
    std::size_t index = 0;
    ClassifierSpec spec;
    std::vector<double> fold_scores;
    double mean = 0.0;
    double stddev = 0.0;
    std::optional<ErrorCode> error;
    std::string message;
    double seconds = 0.0; // share of the shared training time
    bool ok() const noexcept { return !error.has_value(); }
};

struct SearchResult {
    Kind kind = Kind::KNN;
    ClassifierSpec best_spec;
    double best_score = 0.0;
    std::size_t best_index = 0;
    std::vector<LedgerEntry> ledger;
    std::optional<TrainedModel> model;
};

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double std_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

inline double accuracy_of(const Labels& truth, const Labels& pred) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
    return truth.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(truth.size());
}

struct Fold {
    Matrix X_train;
    Labels y_train;
    Matrix X_val;
    Labels y_val;
};

inline std::vector<Fold> materialize_folds(const LabeledDataset& ds, const std::vector<std::vector<std::size_t>>& val) {
    std::vector<Fold> out;
    for (const auto& v : val) {
        std::vector<bool> in_val(ds.rows(), false);
        for (std::size_t i : v) in_val[i] = true;
        std::vector<std::size_t> tr;
        for (std::size_t i = 0; i < ds.rows(); ++i)
            if (!in_val[i]) tr.push_back(i);
        Fold f;
        f.X_train.resize(static_cast<Eigen::Index>(tr.size()), static_cast<Eigen::Index>(ds.cols()));
        f.X_val.resize(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(ds.cols()));
        for (std::size_t r = 0; r < tr.size(); ++r) {
            f.X_train.row(static_cast<Eigen::Index>(r)) = ds.X().row(static_cast<Eigen::Index>(tr[r]));
            f.y_train.push_back(ds.labels[tr[r]]);
        }
        for (std::size_t r = 0; r < v.size(); ++r) {
            f.X_val.row(static_cast<Eigen::Index>(r)) = ds.X().row(static_cast<Eigen::Index>(v[r]));
            f.y_val.push_back(ds.labels[v[r]]);
        }
        out.push_back(std::move(f));
    }
    return out;
}

namespace detail {

// One configuration with distinct effective parameters.
struct Unique {
    ClassifierSpec spec;
    nlohmann::json effective;
    std::vector<double> scores;
    std::optional<ErrorCode> error;
    std::string message;
    double seconds = 0.0;

    void fail_with(const Error& e) {
        if (!error) {
            error = e.code();
            message = e.what();
        }
    }
};

// Knobs that a family evaluates along a shared training run.
inline std::vector<std::string> shared_knobs(Kind kind) {
    switch (kind) {
    case Kind::RandomForest: return {"n_estimators", "max_depth"};
    case Kind::AdaBoost:
    case Kind::GBDT: return {"n_estimators"};
    case Kind::KNN: return {"n_neighbors", "weights"};
    case Kind::SvmLinear:
    case Kind::SvmSigmoid:
    case Kind::SvmRbf: return {"C", "balanced", "tol", "max_iter"};
    default: return {};
    }
}

inline std::vector<int> sorted_distinct(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline void eval_single(std::vector<Unique*>& members, const std::vector<Fold>& folds, int K) {
    for (const Fold& f : folds) {
        for (Unique* u : members) {
            if (u->error) continue;
            try {
                const FittedModel m = fit_raw(u->spec, {f.X_train, f.y_train, K});
                u->scores.push_back(accuracy_of(f.y_val, predict_raw(m, f.X_val)));
            } catch (const Error& e) {
                u->fail_with(e);
            }
        }
    }
}

template <class Cfg, class TrainFn, class StagedFn>
void eval_staged(std::vector<Unique*>& members, const std::vector<Fold>& folds, int K, TrainFn train, StagedFn staged) {
    std::vector<int> sizes;
    for (Unique* u : members) sizes.push_back(u->effective.at("n_estimators").get<int>());
    const std::vector<int> stages = sorted_distinct(sizes);
    ClassifierSpec base = members.front()->spec;
    base.params["n_estimators"] = stages.back();
    const Cfg cfg = std::get<Cfg>(parse_config(base));
    for (const Fold& f : folds) {
        try {
            const auto model = train(cfg, TrainView{f.X_train, f.y_train, K}, base.seed);
            const std::vector<Labels> preds = staged(model, f.X_val, stages);
            for (std::size_t m = 0; m < members.size(); ++m) {
                const auto at = std::lower_bound(stages.begin(), stages.end(), sizes[m]) - stages.begin();
                members[m]->scores.push_back(accuracy_of(f.y_val, preds[static_cast<std::size_t>(at)]));
            }
        } catch (const Error& e) {
            for (Unique* u : members) u->fail_with(e);
            return;
        }
    }
}

inline void eval_forest(std::vector<Unique*>& members, const std::vector<Fold>& folds, int K) {
    std::vector<int> sizes, caps;
    for (Unique* u : members) {
        sizes.push_back(u->effective.at("n_estimators").get<int>());
        caps.push_back(u->effective.at("max_depth").get<int>());
    }
    const std::vector<int> stages = sorted_distinct(sizes);
    const std::vector<int> distinct_caps = sorted_distinct(caps);
    ClassifierSpec base = members.front()->spec;
    base.params["n_estimators"] = stages.back();
    base.params["max_depth"] = nullptr;
    const auto cfg = std::get<forest::RfConfig>(parse_config(base));
    for (const Fold& f : folds) {
        try {
            const forest::RfModel model = forest::train_rf(cfg, {f.X_train, f.y_train, K}, base.seed);
            for (int cap : distinct_caps) {
                const auto preds = forest::rf_staged_predict(model, f.X_val, stages, cap);
                for (std::size_t m = 0; m < members.size(); ++m) {
                    if (caps[m] != cap) continue;
                    const auto at = std::lower_bound(stages.begin(), stages.end(), sizes[m]) - stages.begin();
                    members[m]->scores.push_back(accuracy_of(f.y_val, preds[static_cast<std::size_t>(at)]));
                }
            }
        } catch (const Error& e) {
            for (Unique* u : members) u->fail_with(e);
            return;
        }
    }
}

inline void eval_knn(std::vector<Unique*>& members, const std::vector<Fold>& folds, int K) {
    std::vector<knn::KnnConfig> cfgs;
    std::size_t kmax = 1;
    for (Unique* u : members) {
        cfgs.push_back(std::get<knn::KnnConfig>(parse_config(u->spec)));
        kmax = std::max(kmax, static_cast<std::size_t>(cfgs.back().n_neighbors));
    }
    for (const Fold& f : folds) {
        const auto table = knn::neighbor_table(f.X_train, f.X_val, cfgs.front().p, kmax);
        for (std::size_t m = 0; m < members.size(); ++m) {
            if (members[m]->error) continue;
            try {
                (void)knn::train_knn(cfgs[m], {f.X_train, f.y_train, K}); // range check only
                Labels pred(table.size());
                for (std::size_t q = 0; q < table.size(); ++q)
                    pred[q] = knn::vote(table[q], static_cast<std::size_t>(cfgs[m].n_neighbors), f.y_train, K,
                                        cfgs[m].weights);
                members[m]->scores.push_back(accuracy_of(f.y_val, pred));
            } catch (const Error& e) {
                members[m]->fail_with(e);
            }
        }
    }
}

inline void eval_svm(std::vector<Unique*>& members, const std::vector<Fold>& folds, int K) {
    std::vector<svm::SvmConfig> cfgs;
    for (Unique* u : members) cfgs.push_back(std::get<svm::SvmConfig>(parse_config(u->spec)));
    // Members sharing (C, balanced) see the same SMO iterates.
    std::map<std::pair<double, bool>, std::vector<std::size_t>> solves;
    for (std::size_t m = 0; m < cfgs.size(); ++m) solves[{cfgs[m].C, cfgs[m].balanced}].push_back(m);
    for (const Fold& f : folds) {
        svm::KernelParams kp;
        Eigen::MatrixXd gram;
        std::vector<std::vector<double>> targets;
        try {
            kp = svm::resolve_kernel(cfgs.front(), f.X_train);
            gram = svm::kernel_matrix(f.X_train, kp);
            targets = svm::machine_targets(f.y_train, K);
            for (const auto& y : targets)
                require(std::count(y.begin(), y.end(), 1.0) > 0 && std::count(y.begin(), y.end(), -1.0) > 0,
                        ErrorCode::SingleClass, "SVM machine needs both signs present");
        } catch (const Error& e) {
            for (Unique* u : members) u->fail_with(e);
            return;
        }
        for (const auto& [key, idx] : solves) {
            std::vector<svm::StopRule> rules;
            for (std::size_t m : idx) rules.push_back({cfgs[m].tol, cfgs[m].max_iter});
            std::vector<svm::SvmModel> models(idx.size());
            for (auto& model : models) {
                model.kernel = kp;
                model.n_classes = K;
            }
            std::vector<std::optional<Error>> errors(idx.size());
            for (const auto& y : targets) {
                const auto results = smo_solve(gram, y, svm::box_bounds(y, key.first, key.second), rules);
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    if (results[r].exhausted && !errors[r])
                        errors[r] = Error(ErrorCode::NoConvergence,
                                          "SMO stopped after " + std::to_string(results[r].iterations) +
                                              " iterations with KKT violation " + std::to_string(results[r].violation));
                    models[r].machines.push_back(svm::make_machine(f.X_train, y, results[r]));
                }
            }
            for (std::size_t r = 0; r < idx.size(); ++r) {
                Unique* u = members[idx[r]];
                if (errors[r]) u->fail_with(*errors[r]);
                if (u->error) continue;
                u->scores.push_back(accuracy_of(f.y_val, svm::svm_predict(models[r], f.X_val)));
            }
        }
    }
}

inline void eval_family(Kind kind, std::vector<Unique*>& members, const std::vector<Fold>& folds, int K) {
    switch (kind) {
    case Kind::RandomForest: eval_forest(members, folds, K); break;
    case Kind::AdaBoost:
        eval_staged<ada::AdaConfig>(
            members, folds, K, [](const auto& c, const TrainView& d, std::uint64_t s) { return ada::train_ada(c, d, s); },
            [](const auto& m, const Matrix& X, const std::vector<int>& st) { return ada::ada_staged_predict(m, X, st); });
        break;
    case Kind::GBDT:
        eval_staged<gbdt::GbdtConfig>(
            members, folds, K, [](const auto& c, const TrainView& d, std::uint64_t s) { return gbdt::train_gbdt(c, d, s); },
            [](const auto& m, const Matrix& X, const std::vector<int>& st) { return gbdt::gbdt_staged_predict(m, X, st); });
        break;
    case Kind::KNN: eval_knn(members, folds, K); break;
    case Kind::SvmLinear:
    case Kind::SvmSigmoid:
    case Kind::SvmRbf: eval_svm(members, folds, K); break;
    default: eval_single(members, folds, K); break;
    }
}

} // namespace detail

/// Worker count: FUSEPIPE_THREADS when set, else the hardware concurrency.
inline unsigned default_threads() {
    if (const char* env = std::getenv("FUSEPIPE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `task(i)` for i in [0, n) on up to `threads` workers.
template <class Task>
void parallel_for(std::size_t n, unsigned threads, Task task) {
    threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first) first = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first) std::rethrow_exception(first);
}

struct SearchOptions {
    unsigned threads = 0; // 0: default_threads()
    bool refit = true;
};

/// Cross-validated accuracy of each configuration in `specs`, in order.
inline std::vector<LedgerEntry> evaluate_configs(const std::vector<ClassifierSpec>& specs, const LabeledDataset& train,
                                                 const CvConfig& cv, unsigned threads) {
    const std::vector<Fold> folds = materialize_folds(train, make_folds(train, cv));
    const int K = train.num_classes();
    const int d = static_cast<int>(train.cols());

    std::vector<LedgerEntry> ledger(specs.size());
    std::vector<detail::Unique> uniques;
    std::vector<std::size_t> unique_of(specs.size(), SIZE_MAX);
    std::map<std::string, std::size_t> by_key;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        ledger[i].index = i;
        ledger[i].spec = specs[i];
        try {
            nlohmann::json eff = effective_params(specs[i], d);
            eff["spec_seed"] = specs[i].seed;
            const std::string key = eff.dump();
            auto [it, inserted] = by_key.emplace(key, uniques.size());
            if (inserted) uniques.push_back({specs[i], std::move(eff), {}, {}, {}, 0.0});
            unique_of[i] = it->second;
        } catch (const Error& e) {
            ledger[i].error = e.code();
            ledger[i].message = e.what();
        }
    }

    std::map<std::string, std::vector<std::size_t>> families;
    for (std::size_t u = 0; u < uniques.size(); ++u) {
        nlohmann::json fam = uniques[u].effective;
        for (const auto& knob : detail::shared_knobs(uniques[u].spec.kind)) fam.erase(knob);
        if (detail::shared_knobs(uniques[u].spec.kind).empty()) fam["_unique"] = u;
        families[fam.dump()].push_back(u);
    }
    std::vector<std::vector<std::size_t>> tasks;
    for (auto& [key, members] : families) tasks.push_back(std::move(members));
    std::sort(tasks.begin(), tasks.end());

    parallel_for(tasks.size(), threads == 0 ? default_threads() : threads, [&](std::size_t t) {
        std::vector<detail::Unique*> members;
        for (std::size_t u : tasks[t]) members.push_back(&uniques[u]);
        const auto start = std::chrono::steady_clock::now();
        try {
            detail::eval_family(members.front()->spec.kind, members, folds, K);
        } catch (const Error& e) {
            for (auto* m : members) m->fail_with(e);
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (auto* m : members) m->seconds = secs / static_cast<double>(members.size());
    });

    std::vector<std::size_t> sharing(uniques.size(), 0);
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (unique_of[i] != SIZE_MAX) ++sharing[unique_of[i]];
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (unique_of[i] == SIZE_MAX) continue;
        const detail::Unique& u = uniques[unique_of[i]];
        ledger[i].seconds = u.seconds / static_cast<double>(sharing[unique_of[i]]);
        if (u.error) {
            ledger[i].error = u.error;
            ledger[i].message = u.message;
            continue;
        }
        ledger[i].fold_scores = u.scores;
        ledger[i].mean = mean_of(u.scores);
        ledger[i].stddev = std_of(u.scores);
    }
    return ledger;
}

/// λ* = argmax mean accuracy; ties to lower fold std, then enumeration order.
inline std::size_t select_best(const std::vector<LedgerEntry>& ledger) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < ledger.size(); ++i) {
        if (!ledger[i].ok()) continue;
        if (!best || ledger[i].mean > ledger[*best].mean ||
            (ledger[i].mean == ledger[*best].mean && ledger[i].stddev < ledger[*best].stddev))
            best = i;
    }
    if (!best) {
        for (const auto& e : ledger)
            if (e.error) fail(*e.error, "every grid configuration failed; first failure: " + e.message);
        fail(ErrorCode::EmptyList, "grid has no configurations");
    }
    return *best;
}

inline SearchResult grid_search(Kind kind, const HyperGrid& grid, const LabeledDataset& train, const CvConfig& cv,
                                const SearchOptions& opt = {}, std::uint64_t spec_seed = 42) {
    require(grid.kind == kind, ErrorCode::ConfigInvalid, "grid kind differs from requested kind");
    grid.validate();
    train.validate(false);
    SearchResult r;
    r.kind = kind;
    r.ledger = evaluate_configs(expand_grid(grid, spec_seed), train, cv, opt.threads);
    r.best_index = select_best(r.ledger);
    r.best_spec = r.ledger[r.best_index].spec;
    r.best_score = r.ledger[r.best_index].mean;
    if (opt.refit) r.model = fit(r.best_spec, train);
    return r;
}

inline std::string params_json(const ClassifierSpec& s) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : s.params) j[k] = v;
    return j.dump();
}

inline std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Audit ledger; deterministic (no timings).
inline std::string ledger_csv(const SearchResult& r) {
    std::string out = "index,status,mean,std";
    std::size_t k = 0;
    for (const auto& e : r.ledger) k = std::max(k, e.fold_scores.size());
    for (std::size_t f = 0; f < k; ++f) out += ",fold" + std::to_string(f + 1);
    out += ",selected,params\n";
    for (const auto& e : r.ledger) {
        out += std::to_string(e.index) + "," + (e.ok() ? std::string("ok") : std::string(to_string(*e.error)));
        out += "," + (e.ok() ? fusepipe::detail::format_double(e.mean) : std::string()) + "," +
               (e.ok() ? fusepipe::detail::format_double(e.stddev) : std::string());
        for (std::size_t f = 0; f < k; ++f)
            out += "," + (f < e.fold_scores.size() ? fusepipe::detail::format_double(e.fold_scores[f]) : std::string());
        out += std::string(",") + (e.index == r.best_index ? "1" : "0") + "," + csv_quote(params_json(e.spec)) + "\n";
    }
    return out;
}

inline std::string timing_csv(const SearchResult& r) {
    std::string out = "index,seconds\n";
    char buf[64];
    for (const auto& e : r.ledger) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", e.index, e.seconds);
        out += buf;
    }
    return out;
}

} // namespace fusepipe::hpo
