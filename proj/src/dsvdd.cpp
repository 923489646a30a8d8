#include "risdet/dsvdd.hpp"

#include <algorithm>
#include <numeric>

namespace risdet {

Eigen::MatrixXf DsvddModel::standardize(const Eigen::MatrixXf& batch) const {
    if (batch.rows() != input_mean.size())
        throw ContractError("DsvddModel: input has " + std::to_string(batch.rows()) +
                            " rows, expected " + std::to_string(input_mean.size()));
    return (batch.colwise() - input_mean).array().colwise() / input_scale.array();
}

Eigen::VectorXf DsvddModel::anomaly_scores(const Eigen::MatrixXf& batch) const {
    return core.scores(standardize(batch));
}

double DsvddModel::anomaly_score(const FeatureVector& v) const {
    const Eigen::MatrixXf col = v.cast<float>();
    return static_cast<double>(anomaly_scores(col)[0]);
}

void DsvddModel::validate() const {
    core.net.check_chain();
    if (core.net.weights.empty()) throw ContractError("DsvddModel: no layers");
    if (core.center.size() != latent_dim()) throw ContractError("DsvddModel: center size mismatch");
    if (input_mean.size() != input_dim() || input_scale.size() != input_dim())
        throw ContractError("DsvddModel: standardization size mismatch");
    if (!(core.radius >= 0.0f)) throw ContractError("DsvddModel: radius must be >= 0");
    if (!core.center.allFinite()) throw ContractError("DsvddModel: center must be finite");
}

Mlp<float> init_network(int input_dim, const TrainConfig& hyper, Rng& rng) {
    Mlp<float> net;
    net.leaky_slope = static_cast<float>(hyper.leaky_slope);
    net.activate_last = hyper.activate_last;
    std::vector<int> widths{input_dim};
    widths.insert(widths.end(), hyper.hidden_widths.begin(), hyper.hidden_widths.end());
    widths.push_back(hyper.latent_dim);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Eigen::MatrixXf w(widths[l + 1], fan_in);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                w(i, j) = static_cast<float>(rng.uniform(-bound, bound));
        net.weights.push_back(std::move(w));
    }
    return net;
}

namespace {

void fit_standardization(const Eigen::MatrixXf& x, Eigen::VectorXf& mean, Eigen::VectorXf& scale) {
    const Eigen::VectorXd mu = x.cast<double>().rowwise().mean();
    Eigen::VectorXd var = Eigen::VectorXd::Zero(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        var += (x.col(j).cast<double>() - mu).cwiseAbs2();
    var /= static_cast<double>(x.cols());
    const double max_sd = var.size() ? std::sqrt(var.maxCoeff()) : 0.0;
    mean = mu.cast<float>();
    scale.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double sd = std::sqrt(var[i]);
        scale[i] = (sd > 1e-12 * max_sd && sd > 0.0) ? static_cast<float>(sd) : 1.0f;
    }
}

float nearest_rank(std::vector<float> v, double q) {
    std::sort(v.begin(), v.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    rank = std::clamp<std::size_t>(rank, 1, v.size());
    return v[rank - 1];
}

} // namespace

TrainResult train_dsvdd(const TrainingSet& data, const TrainConfig& hyper, Rng& rng) {
    hyper.validate();
    if (data.size() == 0) throw ConfigError("train_dsvdd: empty training set");
    if (!data.samples.allFinite()) throw ConfigError("train_dsvdd: training set has non-finite entries");

    TrainResult result;
    DsvddModel& model = result.model;
    model.hyper = hyper;
    fit_standardization(data.samples, model.input_mean, model.input_scale);
    const Eigen::MatrixXf x = model.standardize(data.samples);

    model.core.net = init_network(data.dim(), hyper, rng);
    model.core.center = compute_center(model.core.net, x);
    {
        model.core.radius = 0.0f;
        const Eigen::VectorXf s = model.core.scores(x);
        model.core.radius = std::sqrt(nearest_rank({s.data(), s.data() + s.size()}, hyper.init_radius_quantile));
    }

    const auto lambda1 = static_cast<float>(hyper.lambda1);
    const auto lambda2 = static_cast<float>(hyper.lambda2);
    AdamHyper adam;
    adam.learning_rate = hyper.learning_rate;
    AdamState<float> state(model.core.net);

    const int n = data.size();
    const int bs = std::min(hyper.batch_size, n);
    result.batches_per_epoch = (n + bs - 1) / bs;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Eigen::MatrixXf batch(x.rows(), bs);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
        double epoch_sum = 0.0;
        for (int start = 0; start < n; start += bs) {
            const int m = std::min(bs, n - start);
            batch.resize(x.rows(), m);
            for (int j = 0; j < m; ++j) batch.col(j) = x.col(order[static_cast<std::size_t>(start + j)]);
            const auto grads = loss_gradient(model.core, batch, lambda1, lambda2);
            if (!std::isfinite(grads.loss))
                throw NumericalError("train_dsvdd: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", batch starting at " + std::to_string(start));
            adam_step(state, model.core, grads, adam);
            result.batch_losses.push_back(grads.loss);
            epoch_sum += grads.loss;
        }
        result.epoch_losses.push_back(epoch_sum / result.batches_per_epoch);
    }
    return result;
}

} // namespace risdet
