#include "risdet/detector.hpp"

namespace risdet {

HotellingReference HotellingReference::estimate(std::span<const Eigen::VectorXd> reference,
                                                double shrinkage) {
    if (reference.size() < 2) throw ConfigError("HotellingReference: need at least two reference vectors");
    const auto dim = reference.front().size();
    HotellingReference out;
    out.mean_ = Eigen::VectorXd::Zero(dim);
    for (const auto& v : reference) {
        if (v.size() != dim) throw ContractError("HotellingReference: dimension mismatch");
        out.mean_ += v;
    }
    out.mean_ /= static_cast<double>(reference.size());

    Eigen::MatrixXd centered(dim, static_cast<Eigen::Index>(reference.size()));
    for (std::size_t i = 0; i < reference.size(); ++i)
        centered.col(static_cast<Eigen::Index>(i)) = reference[i] - out.mean_;
    out.covariance_ = centered * centered.transpose() / static_cast<double>(reference.size() - 1);
    const double trace = out.covariance_.trace();
    if (!(trace > 0.0) || !std::isfinite(trace))
        throw NumericalError("HotellingReference: reference covariance has zero or non-finite trace");
    out.covariance_.diagonal().array() += shrinkage * trace / static_cast<double>(dim);
    out.chol_.compute(out.covariance_);
    if (out.chol_.info() != Eigen::Success)
        throw NumericalError("HotellingReference: regularized covariance is not positive definite");
    return out;
}

double HotellingReference::t_squared(const Eigen::VectorXd& window_mean, int window) const {
    if (window_mean.size() != mean_.size()) throw ContractError("Hotelling: dimension mismatch");
    const Eigen::VectorXd d = window_mean - mean_;
    return static_cast<double>(window) * d.dot(chol_.solve(d));
}

HotellingDetector::HotellingDetector(HotellingReference reference, int window, double threshold)
    : reference_(std::move(reference)), window_len_(window), threshold_(threshold) {
    if (window < 1) throw ConfigError("HotellingDetector: window must be >= 1");
}

StepResult HotellingDetector::step(Eigen::VectorXd v) {
    if (v.size() != reference_.dim()) throw ContractError("Hotelling: dimension mismatch");
    const auto w = static_cast<std::size_t>(window_len_);
    if (window_.size() == w) window_.erase(window_.begin());
    window_.push_back(std::move(v));
    if (window_.size() == w) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(reference_.dim());
        for (const auto& x : window_) mean += x;
        mean /= static_cast<double>(w);
        last_ = reference_.t_squared(mean, window_len_);
        if (*last_ >= threshold_) alarmed_ = true;
    }
    return {last_, alarmed_};
}

} // namespace risdet
