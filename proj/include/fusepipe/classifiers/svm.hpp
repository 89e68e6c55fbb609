#pragma once

// Soft-margin kernel SVM trained by SMO with second-order working set
// selection. Binary problems train one machine; K > 2 classes train
// one-vs-rest machines and take the largest margin.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fusepipe/classifiers/params.hpp"
#include "fusepipe/transforms.hpp"

namespace fusepipe::svm {

enum class KernelKind { Linear, Sigmoid, Rbf };

struct KernelParams {
    KernelKind kind = KernelKind::Rbf;
    double gamma = 1.0;
    double coef0 = 0.0;
};

inline double kernel_eval(const KernelParams& k, const double* x, const double* z, Eigen::Index d) {
    if (k.kind == KernelKind::Rbf) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) s += (x[j] - z[j]) * (x[j] - z[j]);
        return std::exp(-k.gamma * s);
    }
    double dot = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) dot += x[j] * z[j];
    return k.kind == KernelKind::Linear ? dot : std::tanh(k.gamma * dot + k.coef0);
}

inline double kernel_eval(const KernelParams& k, const Vector& x, const Vector& z) {
    require(x.size() == z.size(), ErrorCode::ShapeMismatch, "kernel arguments differ in dimension");
    return kernel_eval(k, x.data(), z.data(), x.size());
}

/// Full Gram matrix over the rows of X.
inline Eigen::MatrixXd kernel_matrix(const Matrix& X, const KernelParams& k) {
    const auto n = X.rows();
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) G(i, j) = G(j, i) = kernel_eval(k, X.row(i).data(), X.row(j).data(), X.cols());
    return G;
}

struct SvmConfig {
    KernelKind kernel = KernelKind::Rbf;
    double C = 1.0;
    std::string gamma = "scale"; // scale | auto | numeric text
    double gamma_value = 0.0;
    double coef0 = 0.0;
    double tol = 1e-3;
    bool balanced = false;
    long max_iter = -1;
};

inline KernelKind kernel_of(Kind kind) {
    switch (kind) {
    case Kind::SvmLinear: return KernelKind::Linear;
    case Kind::SvmSigmoid: return KernelKind::Sigmoid;
    default: return KernelKind::Rbf;
    }
}

inline SvmConfig config_from(Kind kind, const ParamMap& p) {
    static const std::set<std::string> keys{"C",        "kernel",       "gamma",      "coef0",       "tol",
                                            "class_weight", "shrinking", "probability", "cache_size", "max_iter",
                                            "random_state"};
    params::check_keys(p, keys, kind);
    SvmConfig c;
    c.kernel = kernel_of(kind);
    static constexpr const char* names[] = {"linear", "sigmoid", "rbf"};
    const std::string expected = names[static_cast<int>(c.kernel)];
    if (params::text(p, "kernel", expected) != expected) params::bad("kernel", "must be '" + expected + "' for this kind");
    c.C = params::number(p, "C", 1.0);
    if (!(c.C > 0.0)) params::bad("C", "must be > 0");
    if (const auto* g = params::find(p, "gamma"); g && !g->is_null()) {
        if (g->is_number()) {
            c.gamma_value = g->get<double>();
            if (!(c.gamma_value > 0.0)) params::bad("gamma", "must be > 0");
            c.gamma = "value";
        } else {
            c.gamma = params::one_of(p, "gamma", "scale", {"scale", "auto"});
        }
    }
    c.coef0 = params::number(p, "coef0", 0.0);
    c.tol = params::number(p, "tol", 1e-3);
    if (!(c.tol > 0.0)) params::bad("tol", "must be > 0");
    if (const auto* cw = params::find(p, "class_weight"); cw && !cw->is_null()) {
        if (!cw->is_string() || cw->get<std::string>() != "balanced") params::bad("class_weight", "must be null or 'balanced'");
        c.balanced = true;
    }
    params::flag(p, "shrinking", true);
    params::flag(p, "probability", false);
    if (!(params::number(p, "cache_size", 200.0) > 0.0)) params::bad("cache_size", "must be > 0");
    c.max_iter = params::integer(p, "max_iter", -1);
    if (c.max_iter == 0 || c.max_iter < -1) params::bad("max_iter", "must be -1 or >= 1");
    if (!params::is_null(p, "random_state")) params::integer(p, "random_state", 0);
    return c;
}

/// Resolves 'scale' (1 / (d * Var(X))) and 'auto' (1 / d).
inline KernelParams resolve_kernel(const SvmConfig& c, const Matrix& X) {
    KernelParams k{c.kernel, 1.0, c.coef0};
    const double d = static_cast<double>(X.cols());
    if (c.gamma == "value") k.gamma = c.gamma_value;
    else if (c.gamma == "auto") k.gamma = 1.0 / d;
    else {
        const double n = static_cast<double>(X.size());
        const double mean = X.sum() / n;
        const double var = (X.array() - mean).square().sum() / n;
        k.gamma = var > 0.0 ? 1.0 / (d * var) : 1.0;
    }
    return k;
}

/// Condition under which one solve is reported: KKT violation below `eps`, or
/// `cap` iterations done (cap < 0: internal cap, reported as non-convergence).
struct StopRule {
    double eps = 1e-3;
    long cap = -1;
};

struct SmoResult {
    std::vector<double> alpha;
    double b = 0.0;
    long iterations = 0;
    double violation = 0.0;
    bool converged = false;
    bool exhausted = false; // internal cap reached without convergence
};

inline long internal_cap(std::size_t n) { return std::max<long>(10'000'000L, 100L * static_cast<long>(n)); }

namespace detail {

inline double bias_of(const std::vector<double>& alpha, const std::vector<double>& G, const std::vector<double>& y,
                      const std::vector<double>& C) {
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum = 0.0;
    int free = 0;
    for (std::size_t t = 0; t < alpha.size(); ++t) {
        const double yG = y[t] * G[t];
        if (alpha[t] >= C[t]) {
            if (y[t] < 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else if (alpha[t] <= 0.0) {
            if (y[t] > 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else {
            ++free;
            sum += yG;
        }
    }
    const double rho = free > 0 ? sum / free : (ub + lb) / 2.0;
    return -rho;
}

} // namespace detail

/// Dual solve of min ½αᵀQα − eᵀα, 0 ≤ α ≤ C, yᵀα = 0 with Q = y yᵀ ∘ K.
/// The iterate sequence does not depend on the stop rules, so one pass yields
/// the result for every rule.
inline std::vector<SmoResult> smo_solve(const Eigen::MatrixXd& K, const std::vector<double>& y,
                                        const std::vector<double>& C, const std::vector<StopRule>& rules) {
    constexpr double tau = 1e-12;
    const std::size_t n = y.size();
    require(static_cast<std::size_t>(K.rows()) == n && C.size() == n, ErrorCode::ShapeMismatch, "SMO inputs disagree in size");
    std::vector<double> alpha(n, 0.0), G(n, -1.0);
    std::vector<SmoResult> out(rules.size());
    std::vector<bool> done(rules.size(), false);
    std::size_t remaining = rules.size();
    const long hard_cap = internal_cap(n);
    auto record = [&](std::size_t r, long iter, double viol, bool converged, bool exhausted) {
        out[r] = {alpha, detail::bias_of(alpha, G, y, C), iter, viol, converged, exhausted};
        done[r] = true;
        --remaining;
    };
    for (long iter = 0;; ++iter) {
        double Gmax = -std::numeric_limits<double>::infinity(), Gmax2 = -std::numeric_limits<double>::infinity();
        long i = -1;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] > 0) {
                if (alpha[t] < C[t] && -G[t] >= Gmax) { Gmax = -G[t]; i = static_cast<long>(t); }
            } else if (alpha[t] > 0.0 && G[t] >= Gmax) { Gmax = G[t]; i = static_cast<long>(t); }
        }
        long j = -1;
        double obj_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; i >= 0 && t < n; ++t) {
            double grad_diff;
            if (y[t] > 0) {
                if (alpha[t] <= 0.0) continue;
                grad_diff = Gmax + G[t];
                Gmax2 = std::max(Gmax2, G[t]);
            } else {
                if (alpha[t] >= C[t]) continue;
                grad_diff = Gmax - G[t];
                Gmax2 = std::max(Gmax2, -G[t]);
            }
            if (grad_diff > 0.0) {
                double quad = K(i, i) + K(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t)) - 2.0 * K(i, static_cast<Eigen::Index>(t));
                if (quad <= 0.0) quad = tau;
                const double obj = -(grad_diff * grad_diff) / quad;
                if (obj <= obj_min) { obj_min = obj; j = static_cast<long>(t); }
            }
        }
        const double violation = (i < 0 || j < 0) ? 0.0 : Gmax + Gmax2;
        for (std::size_t r = 0; r < rules.size(); ++r) {
            if (done[r]) continue;
            if (i < 0 || j < 0 || violation < rules[r].eps) record(r, iter, violation, true, false);
            else if (rules[r].cap >= 0 && iter >= rules[r].cap) record(r, iter, violation, false, false);
            else if (rules[r].cap < 0 && iter >= hard_cap) record(r, iter, violation, false, true);
        }
        if (remaining == 0) break;

        const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
        const double Ci = C[static_cast<std::size_t>(i)], Cj = C[static_cast<std::size_t>(j)];
        double& ai = alpha[static_cast<std::size_t>(i)];
        double& aj = alpha[static_cast<std::size_t>(j)];
        const double old_ai = ai, old_aj = aj;
        const double yi = y[static_cast<std::size_t>(i)], yj = y[static_cast<std::size_t>(j)];
        const double Gi = G[static_cast<std::size_t>(i)], Gj = G[static_cast<std::size_t>(j)];
        const double Qij = yi * yj * K(I, J);
        if (yi != yj) {
            double quad = K(I, I) + K(J, J) + 2.0 * Qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (-Gi - Gj) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) { aj = 0.0; ai = diff; }
            } else if (ai < 0.0) { ai = 0.0; aj = -diff; }
            if (diff > Ci - Cj) {
                if (ai > Ci) { ai = Ci; aj = Ci - diff; }
            } else if (aj > Cj) { aj = Cj; ai = Cj + diff; }
        } else {
            double quad = K(I, I) + K(J, J) - 2.0 * Qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (Gi - Gj) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > Ci) {
                if (ai > Ci) { ai = Ci; aj = sum - Ci; }
            } else if (aj < 0.0) { aj = 0.0; ai = sum; }
            if (sum > Cj) {
                if (aj > Cj) { aj = Cj; ai = sum - Cj; }
            } else if (ai < 0.0) { ai = 0.0; aj = sum; }
        }
        const double dai = ai - old_ai, daj = aj - old_aj;
        for (std::size_t t = 0; t < n; ++t) {
            const auto T = static_cast<Eigen::Index>(t);
            G[t] += y[t] * (yi * K(T, I) * dai + yj * K(T, J) * daj);
        }
    }
    return out;
}

struct Machine {
    Matrix support;            // support vectors, one per row
    std::vector<double> coef;  // α_n y_n
    std::vector<double> alpha; // α_n
    std::vector<double> label; // y_n in {-1, +1}
    double b = 0.0;
    long iterations = 0;
    bool converged = true;

    double decision(const KernelParams& k, const double* x, Eigen::Index d) const {
        double f = b;
        for (Eigen::Index s = 0; s < support.rows(); ++s) f += coef[static_cast<std::size_t>(s)] * kernel_eval(k, support.row(s).data(), x, d);
        return f;
    }
};

struct SvmModel {
    KernelParams kernel;
    int n_classes = 2;
    std::vector<Machine> machines; // one for binary, one per class otherwise
};

/// Per-sample box bounds; balanced weights are n / (2 n_±) on the ±1 problem.
inline std::vector<double> box_bounds(const std::vector<double>& y, double C, bool balanced) {
    std::vector<double> out(y.size(), C);
    if (!balanced) return out;
    const double n = static_cast<double>(y.size());
    const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1.0));
    const double neg = n - pos;
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = C * (y[i] > 0 ? n / (2.0 * pos) : n / (2.0 * neg));
    return out;
}

/// ±1 targets of each machine: class 1 for binary, class k vs rest otherwise.
inline std::vector<std::vector<double>> machine_targets(const Labels& y, int n_classes) {
    std::vector<std::vector<double>> out;
    const int machines = n_classes <= 2 ? 1 : n_classes;
    for (int m = 0; m < machines; ++m) {
        const int positive = machines == 1 ? 1 : m;
        std::vector<double> t(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] == positive ? 1.0 : -1.0;
        out.push_back(std::move(t));
    }
    return out;
}

inline Machine make_machine(const Matrix& X, const std::vector<double>& y, const SmoResult& r) {
    Machine m;
    std::vector<Eigen::Index> sv;
    for (std::size_t i = 0; i < r.alpha.size(); ++i)
        if (r.alpha[i] > 0.0) sv.push_back(static_cast<Eigen::Index>(i));
    m.support.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
    for (std::size_t s = 0; s < sv.size(); ++s) {
        m.support.row(static_cast<Eigen::Index>(s)) = X.row(sv[s]);
        const auto i = static_cast<std::size_t>(sv[s]);
        m.alpha.push_back(r.alpha[i]);
        m.label.push_back(y[i]);
        m.coef.push_back(r.alpha[i] * y[i]);
    }
    m.b = r.b;
    m.iterations = r.iterations;
    m.converged = r.converged;
    return m;
}

inline void raise_exhausted(const SmoResult& r) {
    if (r.exhausted)
        fail(ErrorCode::NoConvergence, "SMO stopped after " + std::to_string(r.iterations) +
                                           " iterations with KKT violation " + std::to_string(r.violation));
}

inline SvmModel train_svm(const SvmConfig& c, const TrainView& data) {
    require(data.X.rows() > 0, ErrorCode::Empty, "SVM needs training rows");
    SvmModel m;
    m.kernel = resolve_kernel(c, data.X);
    m.n_classes = data.n_classes;
    const Eigen::MatrixXd K = kernel_matrix(data.X, m.kernel);
    for (const auto& y : machine_targets(data.y, data.n_classes)) {
        require(std::count(y.begin(), y.end(), 1.0) > 0 && std::count(y.begin(), y.end(), -1.0) > 0,
                ErrorCode::SingleClass, "SVM machine needs both signs present");
        const auto res = smo_solve(K, y, box_bounds(y, c.C, c.balanced), {{c.tol, c.max_iter}});
        raise_exhausted(res.front());
        m.machines.push_back(make_machine(data.X, y, res.front()));
    }
    return m;
}

/// Signed margins, one column per machine.
inline Matrix svm_decision(const SvmModel& m, const Matrix& X) {
    Matrix out(X.rows(), static_cast<Eigen::Index>(m.machines.size()));
    for (std::size_t k = 0; k < m.machines.size(); ++k) {
        require(m.machines[k].support.rows() == 0 || m.machines[k].support.cols() == X.cols(), ErrorCode::ShapeMismatch,
                "SVM input width differs from training");
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            out(i, static_cast<Eigen::Index>(k)) = m.machines[k].decision(m.kernel, X.row(i).data(), X.cols());
    }
    return out;
}

inline Labels labels_from_margins(const Matrix& f) {
    Labels out(static_cast<std::size_t>(f.rows()));
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        if (f.cols() == 1) {
            out[static_cast<std::size_t>(i)] = f(i, 0) > 0.0 ? 1 : 0;
        } else {
            Eigen::Index arg = 0;
            f.row(i).maxCoeff(&arg);
            out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
        }
    }
    return out;
}

inline Labels svm_predict(const SvmModel& m, const Matrix& X) { return labels_from_margins(svm_decision(m, X)); }

inline nlohmann::json to_json(const SvmModel& m) {
    nlohmann::json machines = nlohmann::json::array();
    for (const auto& mc : m.machines)
        machines.push_back({{"support", transforms::matrix_json(mc.support)},
                            {"alpha", mc.alpha},
                            {"label", mc.label},
                            {"b", mc.b},
                            {"iterations", mc.iterations},
                            {"converged", mc.converged}});
    return {{"kernel", static_cast<int>(m.kernel.kind)},
            {"gamma", m.kernel.gamma},
            {"coef0", m.kernel.coef0},
            {"n_classes", m.n_classes},
            {"machines", machines}};
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
    SvmModel m;
    m.kernel = {static_cast<KernelKind>(j.at("kernel").get<int>()), j.at("gamma").get<double>(), j.at("coef0").get<double>()};
    m.n_classes = j.at("n_classes").get<int>();
    for (const auto& a : j.at("machines")) {
        Machine mc;
        mc.alpha = a.at("alpha").get<std::vector<double>>();
        mc.label = a.at("label").get<std::vector<double>>();
        mc.support = transforms::json_matrix(a.at("support"));
        mc.b = a.at("b").get<double>();
        mc.iterations = a.at("iterations").get<long>();
        mc.converged = a.at("converged").get<bool>();
        for (std::size_t s = 0; s < mc.alpha.size(); ++s) mc.coef.push_back(mc.alpha[s] * mc.label[s]);
        m.machines.push_back(std::move(mc));
    }
    return m;
}

} // namespace fusepipe::svm
