#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "risdet/config.hpp"

namespace risdet {

/// k(x, y) = <x, y>.
struct LinearKernel {
    double operator()(double x, double y) const { return x * y; }
    double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
        if (x.size() != y.size()) throw ContractError("LinearKernel: dimension mismatch");
        return x.dot(y);
    }
};

/// k(x, y) = exp(-||x - y||^2 / (2 h^2)).
struct RbfKernel {
    double bandwidth = 1.0;

    double operator()(double x, double y) const {
        const double d = x - y;
        return std::exp(-d * d / (2.0 * bandwidth * bandwidth));
    }
    double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
        if (x.size() != y.size()) throw ContractError("RbfKernel: dimension mismatch");
        return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth * bandwidth));
    }
};

/// Runtime-selected kernel for configured detectors.
struct ConfiguredKernel {
    KernelKind kind = KernelKind::linear;
    double bandwidth = 1.0;

    template <typename Obs>
    double operator()(const Obs& x, const Obs& y) const {
        return kind == KernelKind::linear ? LinearKernel{}(x, y) : RbfKernel{bandwidth}(x, y);
    }
};

/// k(xi, xj) + k(yi, yj) - k(xi, yj) - k(xj, yi).
template <typename Obs, typename Kernel>
double h_fn(const Obs& xi, const Obs& xj, const Obs& yi, const Obs& yj, const Kernel& k) {
    return k(xi, xj) + k(yi, yj) - k(xi, yj) - k(xj, yi);
}

/// Unbiased block MMD: 1/(W(W-1)) * sum over ordered pairs i != j of h(a_i, a_j, b_i, b_j).
/// Adds the number of kernel calls to `kernel_evals` when given.
template <typename Obs, typename Kernel>
double mmd_unbiased(std::span<const Obs> a, std::span<const Obs> b, const Kernel& k,
                    std::uint64_t* kernel_evals = nullptr) {
    if (a.size() != b.size()) throw ContractError("mmd_unbiased: blocks differ in length");
    const std::size_t w = a.size();
    if (w < 2) throw ConfigError("mmd_unbiased: window length must be >= 2");
    double sum = 0.0;
    for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < w; ++j)
            if (i != j) sum += h_fn(a[i], a[j], b[i], b[j], k);
    if (kernel_evals) *kernel_evals += 4 * w * (w - 1);
    return sum / static_cast<double>(w * (w - 1));
}

/// Contiguous, non-overlapping reference blocks in stream order.
template <typename Obs>
class ReferenceBank {
public:
    static ReferenceBank build(std::span<const Obs> observations, int window) {
        if (window < 2) throw ConfigError("build_reference: window must be >= 2");
        const auto w = static_cast<std::size_t>(window);
        if (observations.empty() || observations.size() % w != 0)
            throw ConfigError("build_reference: reference length " + std::to_string(observations.size()) +
                              " is not a positive multiple of window " + std::to_string(window));
        ReferenceBank bank;
        bank.window_ = window;
        for (std::size_t start = 0; start < observations.size(); start += w)
            bank.blocks_.emplace_back(observations.begin() + static_cast<std::ptrdiff_t>(start),
                                      observations.begin() + static_cast<std::ptrdiff_t>(start + w));
        return bank;
    }

    int window() const { return window_; }
    int n_blocks() const { return static_cast<int>(blocks_.size()); }
    std::span<const Obs> block(int n) const { return blocks_.at(static_cast<std::size_t>(n)); }

private:
    int window_ = 0;
    std::vector<std::vector<Obs>> blocks_;
};

struct StepResult {
    std::optional<double> statistic; // empty until the live window is full
    bool alarm = false;
};

/// Scan-B statistic z_m = mean over reference blocks of MMD(block, live window).
/// The alarm latches at the first z_m >= threshold.
template <typename Obs, typename Kernel>
class ScanB {
public:
    ScanB(ReferenceBank<Obs> reference, Kernel kernel,
          double threshold = std::numeric_limits<double>::infinity())
        : reference_(std::move(reference)), kernel_(std::move(kernel)), threshold_(threshold) {
        window_.reserve(static_cast<std::size_t>(reference_.window()));
    }

    StepResult step(Obs obs) {
        const auto w = static_cast<std::size_t>(reference_.window());
        if (window_.size() == w) window_.erase(window_.begin());
        window_.push_back(std::move(obs));
        ++index_;
        StepResult out;
        if (window_.size() == w) {
            const std::span<const Obs> live(window_);
            double sum = 0.0;
            for (int n = 0; n < reference_.n_blocks(); ++n)
                sum += mmd_unbiased(reference_.block(n), live, kernel_, &kernel_evals_);
            last_ = sum / reference_.n_blocks();
            if (*last_ >= threshold_) alarmed_ = true;
        }
        out.statistic = last_;
        out.alarm = alarmed_;
        return out;
    }

    void set_threshold(double threshold) { threshold_ = threshold; }
    double threshold() const { return threshold_; }
    bool alarmed() const { return alarmed_; }
    long steps() const { return index_; }
    std::optional<double> last_statistic() const { return last_; }
    std::uint64_t kernel_evaluations() const { return kernel_evals_; }
    const ReferenceBank<Obs>& reference() const { return reference_; }
    std::span<const Obs> live_window() const { return window_; }

private:
    ReferenceBank<Obs> reference_;
    Kernel kernel_;
    double threshold_;
    std::vector<Obs> window_;
    std::optional<double> last_;
    bool alarmed_ = false;
    long index_ = 0;
    std::uint64_t kernel_evals_ = 0;
};

/// Reference mean and shrunk covariance Sigma + eps (tr(Sigma)/dim) I, Cholesky-factored.
class HotellingReference {
public:
    static HotellingReference estimate(std::span<const Eigen::VectorXd> reference, double shrinkage);

    int dim() const { return static_cast<int>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return covariance_; }

    /// W * (xbar - mu)^T Sigma^{-1} (xbar - mu).
    double t_squared(const Eigen::VectorXd& window_mean, int window) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd covariance_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
};

/// Sliding-window Hotelling T^2 with a latched alarm.
class HotellingDetector {
public:
    HotellingDetector(HotellingReference reference, int window,
                      double threshold = std::numeric_limits<double>::infinity());

    StepResult step(Eigen::VectorXd v);

    void set_threshold(double threshold) { threshold_ = threshold; }
    bool alarmed() const { return alarmed_; }
    const HotellingReference& reference() const { return reference_; }

private:
    HotellingReference reference_;
    int window_len_;
    double threshold_;
    std::vector<Eigen::VectorXd> window_;
    std::optional<double> last_;
    bool alarmed_ = false;
};

} // namespace risdet
