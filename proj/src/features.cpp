#include "risdet/features.hpp"

namespace risdet {

FeatureVector flatten_observation(const ObservationFrame& frame) {
    const auto n = frame.size();
    FeatureVector v(2 * n);
    const cplx* data = frame.data(); // Eigen storage is column-major
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = data[i].real();
        v[n + i] = data[i].imag();
    }
    return v;
}

ObservationFrame unflatten_observation(const FeatureVector& v, int n_bs, int n_subcarriers) {
    const Eigen::Index n = static_cast<Eigen::Index>(n_bs) * n_subcarriers;
    if (v.size() != 2 * n) throw ContractError("unflatten_observation: length must be 2*N_bs*K");
    ObservationFrame frame(n_bs, n_subcarriers);
    cplx* data = frame.data();
    for (Eigen::Index i = 0; i < n; ++i) data[i] = cplx(v[i], v[n + i]);
    return frame;
}

} // namespace risdet
