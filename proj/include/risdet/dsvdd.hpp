#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "risdet/config.hpp"
#include "risdet/features.hpp"
#include "risdet/rng.hpp"

namespace risdet {

/// Bias-free MLP with leaky-ReLU activations. Batches are column-per-sample.
template <typename T>
struct Mlp {
    using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

    std::vector<Matrix> weights; // layer l maps width[l] -> width[l+1]; shape out x in
    T leaky_slope = T(0.01);
    bool activate_last = true;

    int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
    int output_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }

    bool activated(std::size_t layer) const { return activate_last || layer + 1 < weights.size(); }

    void check_chain() const {
        for (std::size_t l = 1; l < weights.size(); ++l)
            if (weights[l].cols() != weights[l - 1].rows())
                throw ContractError("Mlp: layer " + std::to_string(l) + " input width mismatch");
    }

    void activate(Matrix& z) const {
        const T a = leaky_slope;
        z = z.unaryExpr([a](T x) { return x >= T(0) ? x : a * x; });
    }

    Matrix forward(const Matrix& batch) const {
        if (weights.empty()) throw ContractError("Mlp: no layers");
        if (batch.rows() != weights.front().cols())
            throw ContractError("Mlp: input has " + std::to_string(batch.rows()) + " rows, expected " +
                                std::to_string(weights.front().cols()));
        Matrix a = batch;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            Matrix z = weights[l] * a;
            if (activated(l)) activate(z);
            a = std::move(z);
        }
        return a;
    }

    Vector forward_one(const Vector& v) const { return forward(Matrix(v)).col(0); }

    T weight_norm_sq() const {
        T s = T(0);
        for (const auto& w : weights) s += w.squaredNorm();
        return s;
    }
};

/// Network, frozen center and trainable radius.
template <typename T>
struct SvddCore {
    using Matrix = typename Mlp<T>::Matrix;
    using Vector = typename Mlp<T>::Vector;

    Mlp<T> net;
    Vector center;
    T radius = T(0);

    /// ||g(v) - c||^2 for every column.
    Vector scores(const Matrix& batch) const {
        const Matrix lat = net.forward(batch);
        return (lat.colwise() - center).colwise().squaredNorm().transpose();
    }
};

template <typename T>
struct SvddGradients {
    std::vector<typename Mlp<T>::Matrix> weights;
    T radius = T(0);
    T loss = T(0);
};

/// Mean latent over the columns of `data`.
template <typename T>
typename Mlp<T>::Vector compute_center(const Mlp<T>& net, const typename Mlp<T>::Matrix& data,
                                       Eigen::Index chunk = 4096) {
    using Matrix = typename Mlp<T>::Matrix;
    if (data.cols() == 0) throw ConfigError("compute_center: empty data set");
    typename Mlp<T>::Vector sum = Mlp<T>::Vector::Zero(net.output_dim());
    for (Eigen::Index start = 0; start < data.cols(); start += chunk) {
        const Eigen::Index n = std::min(chunk, data.cols() - start);
        sum += net.forward(Matrix(data.middleCols(start, n))).rowwise().sum();
    }
    return sum / static_cast<T>(data.cols());
}

/// R^2 + (1 / (lambda1 B)) sum max(0, s - R^2) + lambda2 ||W||^2 over a batch of B columns.
template <typename T>
T svdd_loss(const SvddCore<T>& core, const typename Mlp<T>::Matrix& batch, T lambda1, T lambda2) {
    if (batch.cols() == 0) throw ContractError("svdd_loss: empty batch");
    const auto s = core.scores(batch);
    const T r2 = core.radius * core.radius;
    T hinge = T(0);
    for (Eigen::Index i = 0; i < s.size(); ++i) hinge += std::max(T(0), s[i] - r2);
    return r2 + hinge / (lambda1 * static_cast<T>(batch.cols())) + lambda2 * core.net.weight_norm_sq();
}

/// Reverse-mode gradient of svdd_loss. Hinge subgradient is 0 at the kink,
/// leaky-ReLU derivative is 1 at 0.
template <typename T>
SvddGradients<T> loss_gradient(const SvddCore<T>& core, const typename Mlp<T>::Matrix& batch,
                               T lambda1, T lambda2) {
    using Matrix = typename Mlp<T>::Matrix;
    const auto& net = core.net;
    if (batch.cols() == 0) throw ContractError("loss_gradient: empty batch");
    if (batch.rows() != net.input_dim()) throw ContractError("loss_gradient: input width mismatch");
    const std::size_t n_layers = net.weights.size();

    std::vector<Matrix> inputs(n_layers); // activation feeding layer l
    std::vector<Matrix> pre(n_layers);
    Matrix a = batch;
    for (std::size_t l = 0; l < n_layers; ++l) {
        inputs[l] = a;
        pre[l] = net.weights[l] * a;
        a = pre[l];
        if (net.activated(l)) net.activate(a);
    }

    const T inv = T(1) / (lambda1 * static_cast<T>(batch.cols()));
    const T r2 = core.radius * core.radius;
    const Matrix diff = a.colwise() - core.center;
    Matrix grad = Matrix::Zero(a.rows(), a.cols());
    T hinge = T(0);
    Eigen::Index active = 0;
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        const T s = diff.col(i).squaredNorm();
        if (s > r2) {
            hinge += s - r2;
            ++active;
            grad.col(i) = T(2) * inv * diff.col(i);
        }
    }

    SvddGradients<T> out;
    out.loss = r2 + inv * hinge + lambda2 * net.weight_norm_sq();
    out.radius = T(2) * core.radius - T(2) * core.radius * inv * static_cast<T>(active);
    out.weights.resize(n_layers);
    const T slope = net.leaky_slope;
    for (std::size_t l = n_layers; l-- > 0;) {
        if (net.activated(l))
            grad.array() *= pre[l].array().unaryExpr([slope](T x) { return x >= T(0) ? T(1) : slope; });
        out.weights[l] = grad * inputs[l].transpose() + T(2) * lambda2 * net.weights[l];
        if (l > 0) grad = net.weights[l].transpose() * grad;
    }
    return out;
}

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Standard Adam recurrences with bias correction on one parameter block.
/// `step` is the 1-based step count after incrementing.
template <typename Derived, typename GradDerived, typename MomDerived>
void adam_update(Eigen::MatrixBase<Derived>& param, const Eigen::MatrixBase<GradDerived>& grad,
                 Eigen::MatrixBase<MomDerived>& m, Eigen::MatrixBase<MomDerived>& v, long step,
                 const AdamHyper& h) {
    using T = typename Derived::Scalar;
    m.derived() = T(h.beta1) * m.derived() + T(1 - h.beta1) * grad.derived();
    v.derived() = T(h.beta2) * v.derived() + T(1 - h.beta2) * grad.derived().cwiseAbs2();
    const T c1 = T(1) / T(1 - std::pow(h.beta1, static_cast<double>(step)));
    const T c2 = T(1) / T(1 - std::pow(h.beta2, static_cast<double>(step)));
    const T lr = T(h.learning_rate);
    const T eps = T(h.eps);
    param.derived().array() -=
        lr * (m.derived().array() * c1) / ((v.derived().array() * c2).sqrt() + eps);
}

template <typename T>
struct AdamState {
    std::vector<typename Mlp<T>::Matrix> m;
    std::vector<typename Mlp<T>::Matrix> v;
    typename Mlp<T>::Matrix m_radius = Mlp<T>::Matrix::Zero(1, 1);
    typename Mlp<T>::Matrix v_radius = Mlp<T>::Matrix::Zero(1, 1);
    long step = 0;

    explicit AdamState(const Mlp<T>& net) {
        for (const auto& w : net.weights) {
            m.push_back(Mlp<T>::Matrix::Zero(w.rows(), w.cols()));
            v.push_back(Mlp<T>::Matrix::Zero(w.rows(), w.cols()));
        }
    }
};

/// One Adam step over (W, R) treated as a single parameter vector. R is kept >= 0.
template <typename T>
void adam_step(AdamState<T>& state, SvddCore<T>& core, const SvddGradients<T>& grads,
               const AdamHyper& hyper) {
    using Matrix = typename Mlp<T>::Matrix;
    if (state.m.size() != core.net.weights.size() || grads.weights.size() != core.net.weights.size())
        throw ContractError("adam_step: optimizer state does not match network");
    ++state.step;
    for (std::size_t l = 0; l < core.net.weights.size(); ++l)
        adam_update(core.net.weights[l], grads.weights[l], state.m[l], state.v[l], state.step, hyper);
    Matrix r(1, 1);
    r(0, 0) = core.radius;
    Matrix g(1, 1);
    g(0, 0) = grads.radius;
    adam_update(r, g, state.m_radius, state.v_radius, state.step, hyper);
    core.radius = std::abs(r(0, 0));
}

/// Trained scorer: standardization, network, center and radius in 32-bit floats.
struct DsvddModel {
    SvddCore<float> core;
    Eigen::VectorXf input_mean;
    Eigen::VectorXf input_scale;
    TrainConfig hyper;

    int input_dim() const { return core.net.input_dim(); }
    int latent_dim() const { return core.net.output_dim(); }

    Eigen::MatrixXf standardize(const Eigen::MatrixXf& batch) const;

    /// Anomaly score ||g(v) - c||^2 of one observation vector.
    double anomaly_score(const FeatureVector& v) const;

    /// Scores for each column of a raw (unstandardized) batch.
    Eigen::VectorXf anomaly_scores(const Eigen::MatrixXf& batch) const;

    void validate() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights for the configured widths.
Mlp<float> init_network(int input_dim, const TrainConfig& hyper, Rng& rng);

struct TrainResult {
    DsvddModel model;
    std::vector<double> batch_losses; // in optimization order
    std::vector<double> epoch_losses; // mean batch loss per epoch
    int batches_per_epoch = 0;
};

/// Fits standardization, initializes and freezes the center, then runs Adam
/// on (W, R) with shuffled mini-batches. Throws NumericalError on a non-finite loss.
TrainResult train_dsvdd(const TrainingSet& data, const TrainConfig& hyper, Rng& rng);

} // namespace risdet
