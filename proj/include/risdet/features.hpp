#pragma once

#include <Eigen/Dense>

#include "risdet/channel.hpp"

namespace risdet {

using FeatureVector = Eigen::VectorXd;

/// Column-major flattening of an N_bs x K frame: all real parts, then all imaginary parts.
FeatureVector flatten_observation(const ObservationFrame& frame);

/// Inverse of flatten_observation.
ObservationFrame unflatten_observation(const FeatureVector& v, int n_bs, int n_subcarriers);

/// Ordered pre-change feature vectors stored as a dim x count float matrix.
struct TrainingSet {
    Eigen::MatrixXf samples;

    int dim() const { return static_cast<int>(samples.rows()); }
    int size() const { return static_cast<int>(samples.cols()); }
};

} // namespace risdet
