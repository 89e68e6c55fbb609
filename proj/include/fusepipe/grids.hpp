#pragma once

// Built-in search spaces. "table4" is the tabulated search space; "prose"
// narrows the lists that the classifier descriptions state differently.

#include <nlohmann/json.hpp>

#include <string>

#include "fusepipe/error.hpp"

namespace fusepipe::grids {

inline nlohmann::json table4() {
    using nlohmann::json;
    json g = json::object();
    g["XGBoost"] = {{"max_depth", {3, 5, 7}},
                    {"learning_rate", {0.1, 0.01, 0.001}},
                    {"subsample", {0.5, 0.7, 1.0}},
                    {"n_estimators", {100, 200, 300}}};
    g["MLP"] = {{"hidden_layer_sizes", json::array({json::array({50}), json::array({100, 22}), json::array({100, 100, 50}),
                                                    json::array({100, 50, 36, 30}),
                                                    json::array({100, 100, 200, 150, 100})})},
                {"activation", {"relu", "tanh", "logistic"}},
                {"solver", {"adam", "sgd", "lbfgs"}},
                {"max_iter", {1000}},
                {"momentum", {0.9, 0.95, 0.99}}};
    g["GaussianNB"] = {{"var_smoothing", {1e-9, 1e-8, 1e-7, 1e-6, 1e-5}},
                       {"priors", json::array({nullptr, json::array({0.3, 0.7}), json::array({0.4, 0.6}),
                                               json::array({0.5, 0.5})})}};
    g["Adaboost"] = {{"n_estimators", {50, 70, 90, 120, 180, 200}}, {"learning_rate", {0.001, 0.01, 0.1, 1.0, 10.0}}};
    json k = json::array();
    for (int i = 1; i <= 30; ++i) k.push_back(i);
    json leaf = json::array();
    for (int i = 10; i <= 50; i += 5) leaf.push_back(i);
    g["KNN"] = {{"n_neighbors", k},
                {"weights", {"uniform", "distance"}},
                {"algorithm", {"auto", "ball_tree", "kd_tree", "brute"}},
                {"leaf_size", leaf},
                {"p", {1, 2}},
                {"metric", {"euclidean", "manhattan", "minkowski"}},
                {"n_jobs", {-1}}};
    g["RFClassifier"] = {{"n_estimators", {100, 200, 300, 400, 500}},
                         {"max_depth", json::array({nullptr, 10, 20, 30, 40, 50})},
                         {"min_samples_split", {2, 5, 10}},
                         {"min_samples_leaf", {1, 2, 4}},
                         {"max_features", {"auto", "sqrt", "log2"}},
                         {"bootstrap", {true, false}},
                         {"criterion", {"gini", "entropy"}},
                         {"oob_score", {true, false}},
                         {"random_state", {42}}};
    g["SVM_linear"] = {{"C", {0.1, 1.0, 10.0, 100.0, 1000.0}},
                       {"kernel", {"linear"}},
                       {"tol", {1e-3, 1e-4, 1e-5}},
                       {"class_weight", json::array({nullptr, "balanced"})},
                       {"random_state", {42}}};
    g["SVM_sigmoid"] = {{"kernel", {"sigmoid"}},
                        {"C", {0.1, 1.0, 10.0, 100.0}},
                        {"gamma", {"scale", "auto"}},
                        {"coef0", {0.0, 0.1, 0.5, 1.0}},
                        {"tol", {1e-3, 1e-4, 1e-5}},
                        {"class_weight", json::array({nullptr, "balanced"})},
                        {"shrinking", {true, false}},
                        {"probability", {true, false}},
                        {"cache_size", {200.0, 500.0, 100.0}},
                        {"random_state", {42}}};
    g["SVM_RBF"] = {{"C", {0.1, 1.0, 10.0, 100.0}},
                    {"gamma", json::array({"scale", "auto", 0.1, 1.0, 10.0})},
                    {"kernel", {"rbf"}},
                    {"class_weight", json::array({nullptr, "balanced"})},
                    {"shrinking", {true, false}},
                    {"probability", {true, false}},
                    {"tol", {1e-3, 1e-4}},
                    {"cache_size", {200, 500, 1000}},
                    {"max_iter", {-1, 1000, 5000}}};
    return g;
}

inline nlohmann::json prose() {
    nlohmann::json g = table4();
    g["KNN"]["n_neighbors"] = {1, 2, 3, 4};
    nlohmann::json trees = nlohmann::json::array();
    for (int i = 1; i <= 150; ++i) trees.push_back(i);
    g["RFClassifier"]["n_estimators"] = trees;
    g["RFClassifier"]["max_features"] = {"sqrt"};
    g["Adaboost"]["n_estimators"] = {100};
    g["MLP"]["solver"] = {"adam"};
    g["MLP"]["activation"] = {"relu"};
    return g;
}

inline nlohmann::json by_name(const std::string& name) {
    if (name == "table4") return table4();
    if (name == "prose") return prose();
    fail(ErrorCode::ConfigInvalid, "unknown grid set '" + name + "' (expected table4 or prose)");
}

} // namespace fusepipe::grids
