#pragma once

// Fully connected network: y = W h + b per layer, hidden activations, linear
// output layer scored through softmax by the loss. Trained with Adam (the
// default), momentum SGD or full-batch L-BFGS.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fusepipe/classifiers/params.hpp"
#include "fusepipe/rng.hpp"

namespace fusepipe::mlp {

enum class Activation { Relu, Tanh, Logistic };
enum class Solver { Adam, Sgd, Lbfgs };
enum class LossKind { CrossEntropy, MeanSquared };

inline Vector relu(const Vector& x) { return x.cwiseMax(0.0); }

struct AdamHyper {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> m; // first moment
    std::vector<double> v; // second moment
    long t = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of `theta` in place.
inline void adam_step(AdamState& state, std::span<double> theta, std::span<const double> grad, const AdamHyper& h) {
    require(theta.size() == grad.size() && state.m.size() == theta.size(), ErrorCode::ShapeMismatch,
            "adam_step buffers disagree in length");
    state.t += 1;
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
        state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        theta[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
}

struct MlpConfig {
    std::vector<int> hidden{100};
    Activation activation = Activation::Relu;
    Solver solver = Solver::Adam;
    int max_iter = 200;
    double momentum = 0.9;
    double learning_rate = 0.001;
    int batch_size = 32;
    LossKind loss = LossKind::CrossEntropy;
    double tol = 1e-4;
    int n_iter_no_change = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline const std::set<std::string>& vocabulary() {
    static const std::set<std::string> keys{"hidden_layer_sizes", "activation", "solver",  "max_iter",
                                            "momentum",           "learning_rate_init", "batch_size", "loss",
                                            "tol",                "n_iter_no_change",   "beta_1",     "beta_2",
                                            "epsilon"};
    return keys;
}

inline MlpConfig config_from(const ParamMap& p) {
    params::check_keys(p, vocabulary(), Kind::MLP);
    MlpConfig c;
    if (const auto* h = params::find(p, "hidden_layer_sizes"); h && !h->is_null()) {
        c.hidden.clear();
        if (h->is_number_integer()) c.hidden.push_back(h->get<int>());
        else if (h->is_array())
            for (const auto& v : *h) {
                if (!v.is_number_integer() || v.get<int>() < 1) params::bad("hidden_layer_sizes", "entries must be integers >= 1");
                c.hidden.push_back(v.get<int>());
            }
        else params::bad("hidden_layer_sizes", "must be an integer list");
    }
    const auto act = params::one_of(p, "activation", "relu", {"relu", "tanh", "logistic"});
    c.activation = act == "relu" ? Activation::Relu : act == "tanh" ? Activation::Tanh : Activation::Logistic;
    const auto solver = params::one_of(p, "solver", "adam", {"adam", "sgd", "lbfgs"});
    c.solver = solver == "adam" ? Solver::Adam : solver == "sgd" ? Solver::Sgd : Solver::Lbfgs;
    c.max_iter = static_cast<int>(params::integer(p, "max_iter", 200));
    if (c.max_iter < 1) params::bad("max_iter", "must be >= 1");
    c.momentum = params::number(p, "momentum", 0.9);
    if (c.momentum < 0.0 || c.momentum >= 1.0) params::bad("momentum", "must lie in [0,1)");
    c.learning_rate = params::number(p, "learning_rate_init", 0.001);
    if (c.learning_rate <= 0.0) params::bad("learning_rate_init", "must be > 0");
    c.batch_size = static_cast<int>(params::integer(p, "batch_size", 32));
    if (c.batch_size < 1) params::bad("batch_size", "must be >= 1");
    c.loss = params::one_of(p, "loss", "cross_entropy", {"cross_entropy", "mse"}) == "mse" ? LossKind::MeanSquared
                                                                                          : LossKind::CrossEntropy;
    c.tol = params::number(p, "tol", 1e-4);
    c.n_iter_no_change = static_cast<int>(params::integer(p, "n_iter_no_change", 10));
    c.beta1 = params::number(p, "beta_1", 0.9);
    c.beta2 = params::number(p, "beta_2", 0.999);
    c.epsilon = params::number(p, "epsilon", 1e-8);
    if (c.beta1 < 0.0 || c.beta1 >= 1.0 || c.beta2 < 0.0 || c.beta2 >= 1.0) params::bad("beta_1/beta_2", "must lie in [0,1)");
    if (c.epsilon <= 0.0) params::bad("epsilon", "must be > 0");
    return c;
}

// Aligned storage keeps vectorised kernels over the flat buffers independent
// of where the allocator placed them.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

struct MlpModel {
    std::vector<int> sizes; // input, hidden..., outputs
    Activation activation = Activation::Relu;
    LossKind loss = LossKind::CrossEntropy;
    ParamVector params; // per layer: W (out x in, column-major) then b
    int n_iter = 0;
    std::vector<double> loss_curve;

    std::size_t layers() const noexcept { return sizes.size() - 1; }

    std::size_t weight_offset(std::size_t l) const {
        std::size_t off = 0;
        for (std::size_t i = 0; i < l; ++i)
            off += static_cast<std::size_t>(sizes[i + 1]) * (static_cast<std::size_t>(sizes[i]) + 1);
        return off;
    }
    std::size_t bias_offset(std::size_t l) const {
        return weight_offset(l) + static_cast<std::size_t>(sizes[l + 1]) * static_cast<std::size_t>(sizes[l]);
    }
    std::size_t parameter_count() const { return weight_offset(layers()); }

    Eigen::Map<const Eigen::MatrixXd> W(std::size_t l) const {
        return {params.data() + weight_offset(l), sizes[l + 1], sizes[l]};
    }
    Eigen::Map<const Eigen::VectorXd> b(std::size_t l) const { return {params.data() + bias_offset(l), sizes[l + 1]}; }
};

namespace detail {

inline void activate(Eigen::MatrixXd& z, Activation a) {
    switch (a) {
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
    case Activation::Logistic: z = (1.0 / (1.0 + (-z.array()).exp())).matrix(); break;
    }
}

// Derivative expressed through the activation output h.
inline void apply_derivative(Eigen::MatrixXd& delta, const Eigen::MatrixXd& h, Activation a) {
    switch (a) {
    case Activation::Relu: delta = (h.array() > 0.0).select(delta, 0.0); break;
    case Activation::Tanh: delta.array() *= 1.0 - h.array().square(); break;
    case Activation::Logistic: delta.array() *= h.array() * (1.0 - h.array()); break;
    }
}

inline void softmax_columns(Eigen::MatrixXd& s) {
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
        const double mx = s.col(c).maxCoeff();
        s.col(c) = (s.col(c).array() - mx).exp().matrix();
        s.col(c) /= s.col(c).sum();
    }
}

} // namespace detail

/// Class scores for one sample (the pre-softmax output layer).
inline Vector mlp_forward(const MlpModel& model, const Eigen::Ref<const Vector>& x) {
    require(x.size() == model.sizes.front(), ErrorCode::ShapeMismatch,
            "input has " + std::to_string(x.size()) + " features, network expects " + std::to_string(model.sizes.front()));
    Eigen::MatrixXd h = x;
    for (std::size_t l = 0; l < model.layers(); ++l) {
        Eigen::MatrixXd z = model.W(l) * h;
        z.colwise() += model.b(l);
        if (l + 1 < model.layers()) detail::activate(z, model.activation);
        h = std::move(z);
    }
    return h.col(0);
}

/// Scores for a batch; rows of the result are samples.
inline Matrix mlp_scores(const MlpModel& model, const Matrix& X) {
    require(X.cols() == model.sizes.front(), ErrorCode::ShapeMismatch, "input width differs from network input");
    Eigen::MatrixXd h = X.transpose();
    for (std::size_t l = 0; l < model.layers(); ++l) {
        Eigen::MatrixXd z = model.W(l) * h;
        z.colwise() += model.b(l);
        if (l + 1 < model.layers()) detail::activate(z, model.activation);
        h = std::move(z);
    }
    return h.transpose();
}

/// Mean loss over the batch and, when `grad` is non-null, its gradient in the
/// flat parameter layout.
inline double loss_and_gradient(const MlpModel& model, const Matrix& X, std::span<const int> y,
                                ParamVector* grad) {
    const std::size_t L = model.layers();
    const auto B = X.rows();
    std::vector<Eigen::MatrixXd> acts(L + 1);
    acts[0] = X.transpose();
    for (std::size_t l = 0; l < L; ++l) {
        acts[l + 1] = model.W(l) * acts[l];
        acts[l + 1].colwise() += model.b(l);
        if (l + 1 < L) detail::activate(acts[l + 1], model.activation);
    }
    Eigen::MatrixXd& scores = acts[L];
    const auto K = scores.rows();
    double loss = 0.0;
    Eigen::MatrixXd delta(K, B);
    if (model.loss == LossKind::CrossEntropy) {
        for (Eigen::Index c = 0; c < B; ++c) {
            const double mx = scores.col(c).maxCoeff();
            const double lse = mx + std::log((scores.col(c).array() - mx).exp().sum());
            loss += lse - scores(y[static_cast<std::size_t>(c)], c);
        }
        delta = scores;
        detail::softmax_columns(delta);
        for (Eigen::Index c = 0; c < B; ++c) delta(y[static_cast<std::size_t>(c)], c) -= 1.0;
        delta /= static_cast<double>(B);
    } else {
        Eigen::MatrixXd p = scores;
        detail::softmax_columns(p);
        for (Eigen::Index c = 0; c < B; ++c) {
            Eigen::VectorXd g = p.col(c);
            g(y[static_cast<std::size_t>(c)]) -= 1.0;
            loss += g.squaredNorm();
            g *= 2.0 / static_cast<double>(B);
            const double dot = p.col(c).dot(g);
            delta.col(c) = (p.col(c).array() * (g.array() - dot)).matrix();
        }
    }
    loss /= static_cast<double>(B);
    if (!grad) return loss;

    grad->assign(model.parameter_count(), 0.0);
    for (std::size_t l = L; l-- > 0;) {
        Eigen::Map<Eigen::MatrixXd> dW(grad->data() + model.weight_offset(l), model.sizes[l + 1], model.sizes[l]);
        Eigen::Map<Eigen::VectorXd> db(grad->data() + model.bias_offset(l), model.sizes[l + 1]);
        dW.noalias() = delta * acts[l].transpose();
        db = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd prev = model.W(l).transpose() * delta;
            detail::apply_derivative(prev, acts[l], model.activation);
            delta = std::move(prev);
        }
    }
    return loss;
}

/// Glorot-uniform initialisation, +-sqrt(6 / (fan_in + fan_out)), biases included.
inline MlpModel init_model(int n_inputs, const std::vector<int>& hidden, int n_outputs, Activation activation,
                           LossKind loss, std::uint64_t seed) {
    MlpModel m;
    m.sizes.push_back(n_inputs);
    m.sizes.insert(m.sizes.end(), hidden.begin(), hidden.end());
    m.sizes.push_back(n_outputs);
    m.activation = activation;
    m.loss = loss;
    m.params.resize(m.parameter_count());
    Rng rng(derive_seed(seed, "mlp/init"));
    for (std::size_t l = 0; l < m.layers(); ++l) {
        const double bound = std::sqrt(6.0 / (m.sizes[l] + m.sizes[l + 1]));
        const std::size_t begin = m.weight_offset(l);
        const std::size_t end = m.weight_offset(l + 1);
        for (std::size_t i = begin; i < end; ++i) m.params[i] = (2.0 * rng.uniform() - 1.0) * bound;
    }
    return m;
}

namespace detail {

class StopRule {
public:
    StopRule(double tol, int patience) : tol_(tol), patience_(patience) {}

    /// True once the loss failed to improve on the best by `tol` for more
    /// than `patience` consecutive epochs.
    bool update(double loss) {
        if (loss > best_ - tol_) ++stalled_;
        else stalled_ = 0;
        best_ = std::min(best_, loss);
        return stalled_ > patience_;
    }

private:
    double tol_;
    int patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int stalled_ = 0;
};

inline void train_minibatch(MlpModel& m, const TrainView& data, const MlpConfig& c, std::uint64_t seed) {
    const std::size_t n = static_cast<std::size_t>(data.X.rows());
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(c.batch_size), n);
    Rng rng(derive_seed(seed, "mlp/shuffle"));
    AdamState adam(m.params.size());
    const AdamHyper hyper{c.learning_rate, c.beta1, c.beta2, c.epsilon};
    std::vector<double> velocity(m.params.size(), 0.0);
    ParamVector grad;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    StopRule stop(c.tol, c.n_iter_no_change);
    Matrix xb;
    std::vector<int> yb;
    for (int epoch = 0; epoch < c.max_iter; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t len = std::min(batch, n - start);
            xb.resize(static_cast<Eigen::Index>(len), data.X.cols());
            yb.resize(len);
            for (std::size_t r = 0; r < len; ++r) {
                xb.row(static_cast<Eigen::Index>(r)) = data.X.row(static_cast<Eigen::Index>(order[start + r]));
                yb[r] = data.y[order[start + r]];
            }
            total += loss_and_gradient(m, xb, yb, &grad) * static_cast<double>(len);
            if (c.solver == Solver::Adam) {
                adam_step(adam, m.params, grad, hyper);
            } else {
                for (std::size_t i = 0; i < m.params.size(); ++i) {
                    velocity[i] = c.momentum * velocity[i] - c.learning_rate * grad[i];
                    m.params[i] += velocity[i];
                }
            }
        }
        const double epoch_loss = total / static_cast<double>(n);
        m.loss_curve.push_back(epoch_loss);
        m.n_iter = epoch + 1;
        if (!std::isfinite(epoch_loss) || stop.update(epoch_loss)) break;
    }
}

inline void train_lbfgs(MlpModel& m, const TrainView& data, const MlpConfig& c) {
    constexpr std::size_t memory = 10;
    const std::size_t P = m.params.size();
    const std::span<const int> y(data.y.data(), data.y.size());
    ParamVector g;
    double f = loss_and_gradient(m, data.X, y, &g);
    std::vector<std::vector<double>> S, Y;
    std::vector<double> rho;
    StopRule stop(c.tol, c.n_iter_no_change);
    auto dot = [](const auto& a, const auto& b) {
        return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    };
    for (int iter = 0; iter < c.max_iter; ++iter) {
        double gmax = 0.0;
        for (double gi : g) gmax = std::max(gmax, std::abs(gi));
        if (gmax < 1e-10) break;

        std::vector<double> q(g.begin(), g.end());
        std::vector<double> alpha(S.size());
        for (std::size_t k = S.size(); k-- > 0;) {
            alpha[k] = rho[k] * dot(S[k], q);
            for (std::size_t i = 0; i < P; ++i) q[i] -= alpha[k] * Y[k][i];
        }
        double gamma = 1.0;
        if (!S.empty()) gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
        else gamma = 1.0 / std::max(1.0, std::sqrt(dot(g, g)));
        for (double& qi : q) qi *= gamma;
        for (std::size_t k = 0; k < S.size(); ++k) {
            const double beta = rho[k] * dot(Y[k], q);
            for (std::size_t i = 0; i < P; ++i) q[i] += S[k][i] * (alpha[k] - beta);
        }
        std::vector<double> dir(P);
        for (std::size_t i = 0; i < P; ++i) dir[i] = -q[i];
        double slope = dot(g, dir);
        if (slope >= 0.0) {
            for (std::size_t i = 0; i < P; ++i) dir[i] = -g[i];
            slope = -dot(g, g);
            S.clear();
            Y.clear();
            rho.clear();
        }

        const ParamVector start = m.params;
        double step = 1.0;
        double f_new = f;
        ParamVector g_new;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t i = 0; i < P; ++i) m.params[i] = start[i] + step * dir[i];
            f_new = loss_and_gradient(m, data.X, y, &g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            m.params = start;
            break;
        }
        std::vector<double> s(P), yv(P);
        for (std::size_t i = 0; i < P; ++i) {
            s[i] = m.params[i] - start[i];
            yv[i] = g_new[i] - g[i];
        }
        const double sy = dot(s, yv);
        if (sy > 1e-10) {
            if (S.size() == memory) {
                S.erase(S.begin());
                Y.erase(Y.begin());
                rho.erase(rho.begin());
            }
            S.push_back(std::move(s));
            Y.push_back(std::move(yv));
            rho.push_back(1.0 / sy);
        }
        f = f_new;
        g = std::move(g_new);
        m.loss_curve.push_back(f);
        m.n_iter = iter + 1;
        if (stop.update(f)) break;
    }
}

} // namespace detail

inline MlpModel train_mlp(const MlpConfig& c, const TrainView& data, std::uint64_t seed) {
    std::vector<bool> present(static_cast<std::size_t>(data.n_classes), false);
    for (int l : data.y) present[static_cast<std::size_t>(l)] = true;
    require(std::count(present.begin(), present.end(), true) >= 2, ErrorCode::SingleClass,
            "MLP training needs at least two classes present");
    MlpModel m = init_model(static_cast<int>(data.X.cols()), c.hidden, data.n_classes, c.activation, c.loss, seed);
    if (c.solver == Solver::Lbfgs) detail::train_lbfgs(m, data, c);
    else detail::train_minibatch(m, data, c, seed);
    return m;
}

inline Labels mlp_predict(const MlpModel& m, const Matrix& X) {
    Labels out(static_cast<std::size_t>(X.rows()));
    if (X.rows() == 0) return out;
    const Matrix scores = mlp_scores(m, X);
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index arg = 0;
        scores.row(i).maxCoeff(&arg);
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}

inline nlohmann::json to_json(const MlpModel& m) {
    return {{"sizes", m.sizes},
            {"activation", static_cast<int>(m.activation)},
            {"loss", static_cast<int>(m.loss)},
            {"n_iter", m.n_iter},
            {"params", m.params}};
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
    MlpModel m;
    m.sizes = j.at("sizes").get<std::vector<int>>();
    m.activation = static_cast<Activation>(j.at("activation").get<int>());
    m.loss = static_cast<LossKind>(j.at("loss").get<int>());
    m.n_iter = j.at("n_iter").get<int>();
    const auto flat = j.at("params").get<std::vector<double>>();
    m.params.assign(flat.begin(), flat.end());
    require(m.sizes.size() >= 2 && m.params.size() == m.parameter_count(), ErrorCode::ShapeMismatch,
            "MLP parameter vector does not match layer sizes");
    return m;
}

} // namespace fusepipe::mlp
