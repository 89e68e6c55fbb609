#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fusepipe/error.hpp"
#include "fusepipe/featureio.hpp"

namespace fusepipe {

enum class Kind { GBDT, MLP, GaussianNB, AdaBoost, KNN, RandomForest, SvmLinear, SvmSigmoid, SvmRbf };

/// Column order used by every accuracy table.
inline constexpr Kind kAllKinds[] = {Kind::GBDT,         Kind::MLP,       Kind::GaussianNB,
                                     Kind::AdaBoost,     Kind::KNN,       Kind::RandomForest,
                                     Kind::SvmLinear,    Kind::SvmSigmoid, Kind::SvmRbf};

constexpr std::string_view to_string(Kind kind) noexcept {
    switch (kind) {
    case Kind::GBDT: return "XGBoost";
    case Kind::MLP: return "MLP";
    case Kind::GaussianNB: return "GaussianNB";
    case Kind::AdaBoost: return "Adaboost";
    case Kind::KNN: return "KNN";
    case Kind::RandomForest: return "RFClassifier";
    case Kind::SvmLinear: return "SVM_linear";
    case Kind::SvmSigmoid: return "SVM_sigmoid";
    case Kind::SvmRbf: return "SVM_RBF";
    }
    return "?";
}

inline Kind parse_kind(std::string_view name) {
    static const std::map<std::string, Kind, std::less<>> aliases{
        {"XGBoost", Kind::GBDT},          {"GBDT", Kind::GBDT},
        {"MLP", Kind::MLP},               {"GaussianNB", Kind::GaussianNB},
        {"Adaboost", Kind::AdaBoost},     {"AdaBoost", Kind::AdaBoost},
        {"KNN", Kind::KNN},               {"RFClassifier", Kind::RandomForest},
        {"RandomForest", Kind::RandomForest}, {"RF", Kind::RandomForest},
        {"SVM_linear", Kind::SvmLinear},  {"SVM-linear", Kind::SvmLinear},
        {"SVM_sigmoid", Kind::SvmSigmoid}, {"SVM-sigmoid", Kind::SvmSigmoid},
        {"SVM_RBF", Kind::SvmRbf},        {"SVM-RBF", Kind::SvmRbf},
    };
    const auto it = aliases.find(name);
    if (it == aliases.end()) fail(ErrorCode::UnknownKind, "unknown classifier kind '" + std::string(name) + "'");
    return it->second;
}

using ParamMap = std::map<std::string, nlohmann::json>;

struct ClassifierSpec {
    Kind kind = Kind::KNN;
    ParamMap params;
    std::uint64_t seed = 42;

    friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

/// Plain view of a training set handed to the kind-specific trainers.
struct TrainView {
    const Matrix& X;
    const Labels& y;
    int n_classes;
};

namespace params {

inline const nlohmann::json* find(const ParamMap& p, const std::string& key) {
    const auto it = p.find(key);
    return it == p.end() ? nullptr : &it->second;
}

[[noreturn]] inline void bad(const std::string& key, const std::string& why) {
    fail(ErrorCode::ParamOutOfRange, "parameter '" + key + "' " + why);
}

inline double number(const ParamMap& p, const std::string& key, double fallback) {
    const auto* v = find(p, key);
    if (!v || v->is_null()) return fallback;
    if (!v->is_number()) bad(key, "must be numeric");
    return v->get<double>();
}

inline long integer(const ParamMap& p, const std::string& key, long fallback) {
    const auto* v = find(p, key);
    if (!v || v->is_null()) return fallback;
    if (v->is_number_integer()) return v->get<long>();
    if (v->is_number_float()) {
        const double d = v->get<double>();
        if (d == static_cast<double>(static_cast<long>(d))) return static_cast<long>(d);
    }
    bad(key, "must be an integer");
}

inline std::string text(const ParamMap& p, const std::string& key, const std::string& fallback) {
    const auto* v = find(p, key);
    if (!v || v->is_null()) return fallback;
    if (!v->is_string()) bad(key, "must be a string");
    return v->get<std::string>();
}

inline bool flag(const ParamMap& p, const std::string& key, bool fallback) {
    const auto* v = find(p, key);
    if (!v || v->is_null()) return fallback;
    if (!v->is_boolean()) bad(key, "must be a boolean");
    return v->get<bool>();
}

inline bool is_null(const ParamMap& p, const std::string& key) {
    const auto* v = find(p, key);
    return !v || v->is_null();
}

inline std::string one_of(const ParamMap& p, const std::string& key, const std::string& fallback,
                          std::initializer_list<std::string_view> allowed) {
    const std::string value = text(p, key, fallback);
    for (auto a : allowed)
        if (value == a) return value;
    bad(key, "has unsupported value '" + value + "'");
}

inline void check_keys(const ParamMap& p, const std::set<std::string>& allowed, Kind kind) {
    for (const auto& [key, value] : p)
        if (!allowed.count(key))
            fail(ErrorCode::ParamOutOfRange,
                 "parameter '" + key + "' is not part of the " + std::string(to_string(kind)) + " vocabulary");
}

} // namespace params
} // namespace fusepipe
