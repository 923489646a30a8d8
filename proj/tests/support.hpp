#pragma once

#include <complex>
#include <vector>

#include "risdet/channel.hpp"
#include "risdet/config.hpp"
#include "risdet/rng.hpp"

namespace risdet::test {

/// Small scenario that keeps channel synthesis cheap.
inline SystemConfig small_config() {
    SystemConfig c;
    c.n_ue = 2;
    c.bs_rows = 2;
    c.bs_cols = 2;
    c.n_subcarriers = 32;
    c.cyclic_prefix = 16;
    c.surface_rows = 4;
    c.surface_cols = 4;
    c.ris_elements = 16;
    return c;
}

inline double rel_fro(const CMatrix& a, const CMatrix& b) {
    const double denom = std::max(a.norm(), b.norm());
    return denom == 0.0 ? 0.0 : (a - b).norm() / denom;
}

inline double rel_fro(const ChannelTensor& a, const ChannelTensor& b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]).squaredNorm();
        den += std::max(a[i].squaredNorm(), b[i].squaredNorm());
    }
    return den == 0.0 ? 0.0 : std::sqrt(num / den);
}

inline ChannelTensor random_tensor(int rows, int cols, int depth, Rng& rng) {
    ChannelTensor t;
    for (int d = 0; d < depth; ++d) {
        CMatrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.complex_normal();
        t.push_back(m);
    }
    return t;
}

/// Textbook DFT: out[k] = sum_d taps[d] exp(-j 2 pi k d / K), evaluated directly.
inline ChannelTensor naive_dft(const ChannelTensor& taps, int K) {
    const double pi = 3.14159265358979323846;
    ChannelTensor out;
    for (int k = 0; k < K; ++k) {
        CMatrix acc = CMatrix::Zero(taps.front().rows(), taps.front().cols());
        for (std::size_t d = 0; d < taps.size(); ++d) {
            const double ang = -2.0 * pi * static_cast<double>(k) * static_cast<double>(d) / K;
            acc += std::polar(1.0, ang) * taps[d];
        }
        out.push_back(acc);
    }
    return out;
}

/// Brute-force unbiased MMD written straight from the block definition.
template <typename Obs, typename Kernel>
double brute_mmd(const std::vector<Obs>& a, const std::vector<Obs>& b, Kernel k) {
    const std::size_t w = a.size();
    double s = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            if (i == j) continue;
            s += k(a[i], a[j]) + k(b[i], b[j]) - k(a[i], b[j]) - k(a[j], b[i]);
        }
    }
    return s / static_cast<double>(w * (w - 1));
}

} // namespace risdet::test
