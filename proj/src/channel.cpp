#include "risdet/channel.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace risdet {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

cplx unit_phasor(double phase) { return {std::cos(phase), std::sin(phase)}; }

/// exp(-j 2 pi k d / K) with the product reduced modulo K first.
cplx dft_twiddle(long long k, long long d, long long n) {
    const long long r = (k * d) % n;
    return unit_phasor(-kTwoPi * static_cast<double>(r) / static_cast<double>(n));
}

CVector bs_steering(const SystemConfig& cfg, double elev, double azim) {
    return steering_vector(Ura{cfg.bs_rows, cfg.bs_cols}, elev, azim);
}

CVector ue_steering(const SystemConfig& cfg, double elev) {
    return steering_vector(Ula{cfg.n_ue}, elev);
}

void check_tap(const SystemConfig& cfg, int tap) {
    if (tap < 0 || tap >= cfg.cyclic_prefix)
        throw ContractError("tap index " + std::to_string(tap) + " outside [0, D)");
}

} // namespace

CVector steering_vector(const ArrayGeometry& geometry, double elevation, double azimuth) {
    if (const auto* ula = std::get_if<Ula>(&geometry)) {
        if (ula->n < 1) throw ConfigError("steering_vector: ULA element count must be >= 1");
        CVector a(ula->n);
        const double s = std::sin(elevation);
        for (int i = 0; i < ula->n; ++i) a[i] = unit_phasor(-kPi * i * s);
        return a;
    }
    const auto& ura = std::get<Ura>(geometry);
    if (ura.rows < 1 || ura.cols < 1)
        throw ConfigError("steering_vector: URA dimensions must be >= 1");
    CVector a(ura.rows * ura.cols);
    const double s = std::sin(elevation);
    const double u = s * std::cos(azimuth);
    const double v = s * std::sin(azimuth);
    for (int r = 0; r < ura.rows; ++r)
        for (int c = 0; c < ura.cols; ++c) a[r * ura.cols + c] = unit_phasor(-kPi * (r * u + c * v));
    return a;
}

double pulse(double t, double sample_period, double rolloff) {
    const double x = t / sample_period;
    const double bx = 2.0 * rolloff * x;
    const double denom = 1.0 - bx * bx;
    // Removable singularity at |2 beta t / Ts| = 1.
    if (rolloff > 0.0 && std::abs(denom) < 1e-10) return kPi / 4.0 * sinc(1.0 / (2.0 * rolloff));
    return sinc(x) * std::cos(kPi * rolloff * x) / denom;
}

double free_space_path_loss(double distance, double wavelength) {
    const double g = wavelength / (4.0 * kPi * distance);
    return g * g;
}

DirectPaths draw_direct_params(const SystemConfig& cfg, Rng& rng) {
    DirectPaths out;
    out.path_loss = free_space_path_loss(cfg.d_bs_ue, cfg.wavelength());
    const double max_delay = cfg.cyclic_prefix * cfg.sample_period;
    out.paths.reserve(static_cast<std::size_t>(cfg.paths_direct));
    for (int l = 0; l < cfg.paths_direct; ++l) {
        DirectPath p;
        p.bs_elevation = rng.uniform(0.0, kTwoPi);
        p.bs_azimuth = rng.uniform(0.0, kTwoPi);
        p.ue_elevation = rng.uniform(0.0, kTwoPi);
        p.gain = rng.complex_normal();
        p.delay = rng.uniform(0.0, max_delay);
        out.paths.push_back(p);
    }
    return out;
}

ReflectorPaths draw_cascaded_params(const SystemConfig& cfg, const SurfaceSpec& surface, Rng& rng) {
    ReflectorPaths out;
    out.surface_rows = surface.rows;
    out.surface_cols = surface.cols;
    const double lambda = cfg.wavelength();
    out.path_loss_bs = free_space_path_loss(cfg.d_bs_r, lambda);
    out.path_loss_ue = free_space_path_loss(cfg.d_r_ue, lambda);
    const double half_span = 0.5 * cfg.cyclic_prefix * cfg.sample_period;
    for (int q = 0; q < cfg.paths_bs_r; ++q) {
        BsSidePath p;
        p.bs_elevation = rng.uniform(0.0, kTwoPi);
        p.bs_azimuth = rng.uniform(0.0, kTwoPi);
        p.surface_elevation = rng.uniform(0.0, kTwoPi);
        p.surface_azimuth = rng.uniform(0.0, kTwoPi);
        p.gain = rng.complex_normal();
        p.delay = rng.uniform(0.0, half_span);
        out.bs_side.push_back(p);
    }
    for (int n = 0; n < cfg.paths_r_ue; ++n) {
        UeSidePath p;
        p.surface_elevation = rng.uniform(0.0, kTwoPi);
        p.surface_azimuth = rng.uniform(0.0, kTwoPi);
        p.ue_elevation = rng.uniform(0.0, kTwoPi);
        p.gain = rng.complex_normal();
        p.delay = rng.uniform(0.0, half_span);
        out.ue_side.push_back(p);
    }
    return out;
}

std::vector<double> draw_ris_phases(int count, Rng& rng) {
    if (count < 0) throw ConfigError("draw_ris_phases: count must be >= 0");
    std::vector<double> phases(static_cast<std::size_t>(count));
    for (auto& p : phases) p = rng.coin() ? kPi : 0.0;
    return phases;
}

SurfaceState surface_matrix(const SurfaceSpec& spec, std::optional<std::span<const double>> phases) {
    const int n = spec.n_elements();
    if (spec.ris_count < 0 || spec.ris_count > n)
        throw ConfigError("surface_matrix: ris_count must lie in [0, n_elements]");
    const auto n_static = static_cast<std::size_t>(n - spec.ris_count);
    if (!spec.static_coeffs.empty() && spec.static_coeffs.size() != n_static)
        throw ConfigError("surface_matrix: static_coeffs length must equal n_elements - ris_count");
    if (phases && phases->size() != static_cast<std::size_t>(spec.ris_count))
        throw ConfigError("surface_matrix: expected " + std::to_string(spec.ris_count) +
                          " RIS phases, got " + std::to_string(phases->size()));

    SurfaceState state;
    state.diagonal.resize(n);
    state.ris_active = phases.has_value() && spec.ris_count > 0;
    for (int i = 0; i < spec.ris_count; ++i)
        state.diagonal[i] = phases ? unit_phasor((*phases)[static_cast<std::size_t>(i)])
                                   : cplx(spec.host_coeff, 0.0);
    for (std::size_t i = 0; i < n_static; ++i) {
        const cplx g = spec.static_coeffs.empty() ? cplx(spec.host_coeff, 0.0) : spec.static_coeffs[i];
        if (std::abs(g) > 1.0 + 1e-12) throw ConfigError("surface_matrix: |gamma| must be <= 1");
        state.diagonal[spec.ris_count + static_cast<Eigen::Index>(i)] = g;
    }
    return state;
}

CMatrix direct_delay_channel(const DirectPaths& params, const SystemConfig& cfg, int tap) {
    check_tap(cfg, tap);
    CMatrix h = CMatrix::Zero(cfg.n_bs(), cfg.n_ue);
    if (params.paths.empty()) return h;
    const double scale = std::sqrt(params.path_loss / static_cast<double>(params.paths.size()));
    const double t = tap * cfg.sample_period;
    for (const auto& p : params.paths) {
        const cplx w = scale * p.gain * pulse(t - p.delay, cfg.sample_period, cfg.rolloff);
        h.noalias() += w * bs_steering(cfg, p.bs_elevation, p.bs_azimuth) *
                       ue_steering(cfg, p.ue_elevation).adjoint();
    }
    return h;
}

CMatrix cascaded_delay_channel(std::span<const ReflectorPaths> params,
                               std::span<const SurfaceState> states, const SystemConfig& cfg,
                               int tap) {
    check_tap(cfg, tap);
    if (params.size() != states.size())
        throw ContractError("cascaded_delay_channel: one SurfaceState per reflector required");
    CMatrix h = CMatrix::Zero(cfg.n_bs(), cfg.n_ue);
    const double t = tap * cfg.sample_period;
    for (std::size_t r = 0; r < params.size(); ++r) {
        const auto& refl = params[r];
        const auto& diag = states[r].diagonal;
        const Ura surf{refl.surface_rows, refl.surface_cols};
        if (diag.size() != surf.rows * surf.cols)
            throw ContractError("cascaded_delay_channel: surface state size mismatch");
        const double scale =
            std::sqrt(refl.path_loss_bs * refl.path_loss_ue /
                      static_cast<double>(refl.bs_side.size() * refl.ue_side.size()));
        for (const auto& q : refl.bs_side) {
            const CVector a_bs = bs_steering(cfg, q.bs_elevation, q.bs_azimuth);
            const CVector a_dep = steering_vector(surf, q.surface_elevation, q.surface_azimuth);
            for (const auto& n : refl.ue_side) {
                const CVector a_arr = steering_vector(surf, n.surface_elevation, n.surface_azimuth);
                const cplx alpha = a_dep.dot(diag.cwiseProduct(a_arr));
                const double p = pulse(t - q.delay - n.delay, cfg.sample_period, cfg.rolloff);
                const cplx w = scale * q.gain * n.gain * alpha * p;
                h.noalias() += w * a_bs * ue_steering(cfg, n.ue_elevation).adjoint();
            }
        }
    }
    return h;
}

AugmentedPaths collapse_single_path(const DirectPaths& direct,
                                    std::span<const ReflectorPaths> reflectors,
                                    std::span<const SurfaceState> states) {
    if (reflectors.size() != states.size())
        throw ContractError("collapse_single_path: one SurfaceState per reflector required");
    AugmentedPaths out;
    out.direct = direct;
    for (std::size_t r = 0; r < reflectors.size(); ++r) {
        const auto& refl = reflectors[r];
        if (refl.bs_side.size() != 1 || refl.ue_side.size() != 1)
            throw ContractError("collapse_single_path: reflector " + std::to_string(r) +
                                " is not single-path");
        if (states[r].ris_active)
            throw ContractError("collapse_single_path: reflector " + std::to_string(r) +
                                " is time-varying");
        const auto& q = refl.bs_side.front();
        const auto& n = refl.ue_side.front();
        const Ura surf{refl.surface_rows, refl.surface_cols};
        const CVector a_dep = steering_vector(surf, q.surface_elevation, q.surface_azimuth);
        const CVector a_arr = steering_vector(surf, n.surface_elevation, n.surface_azimuth);
        const cplx alpha = a_dep.dot(states[r].diagonal.cwiseProduct(a_arr));
        WeightedPath p;
        p.weight = std::sqrt(refl.path_loss_bs * refl.path_loss_ue) * q.gain * n.gain * alpha;
        p.bs_elevation = q.bs_elevation;
        p.bs_azimuth = q.bs_azimuth;
        p.ue_elevation = n.ue_elevation;
        p.delay = q.delay + n.delay;
        out.extra.push_back(p);
    }
    return out;
}

CMatrix augmented_delay_channel(const AugmentedPaths& paths, const SystemConfig& cfg, int tap) {
    CMatrix h = direct_delay_channel(paths.direct, cfg, tap);
    const double t = tap * cfg.sample_period;
    for (const auto& p : paths.extra) {
        const cplx w = p.weight * pulse(t - p.delay, cfg.sample_period, cfg.rolloff);
        h.noalias() += w * bs_steering(cfg, p.bs_elevation, p.bs_azimuth) *
                       ue_steering(cfg, p.ue_elevation).adjoint();
    }
    return h;
}

ChannelTensor delay_tensor(const DirectPaths& direct, std::span<const ReflectorPaths> reflectors,
                           std::span<const SurfaceState> states, const SystemConfig& cfg) {
    ChannelTensor taps;
    taps.reserve(static_cast<std::size_t>(cfg.cyclic_prefix));
    for (int d = 0; d < cfg.cyclic_prefix; ++d)
        taps.push_back(direct_delay_channel(direct, cfg, d) +
                       cascaded_delay_channel(reflectors, states, cfg, d));
    return taps;
}

ChannelTensor freq_response(const ChannelTensor& taps, int n_subcarriers) {
    if (n_subcarriers < 1) throw ConfigError("freq_response: K must be >= 1");
    if (taps.empty()) throw ContractError("freq_response: empty delay tensor");
    const auto rows = taps.front().rows();
    const auto cols = taps.front().cols();
    ChannelTensor out(static_cast<std::size_t>(n_subcarriers), CMatrix::Zero(rows, cols));
    const long long D = static_cast<long long>(taps.size());
    for (long long k = 0; k < n_subcarriers; ++k) {
        auto& hk = out[static_cast<std::size_t>(k)];
        for (long long d = 0; d < D; ++d)
            hk.noalias() += dft_twiddle(k, d, n_subcarriers) * taps[static_cast<std::size_t>(d)];
    }
    return out;
}

ObservationFrame simulate_symbol(const ChannelTensor& freq, const CMatrix& transmit, double noise_var,
                                 Rng& rng) {
    if (freq.empty()) throw ContractError("simulate_symbol: empty frequency response");
    const auto K = static_cast<Eigen::Index>(freq.size());
    const auto n_bs = freq.front().rows();
    if (transmit.rows() != freq.front().cols() || transmit.cols() != K)
        throw ContractError("simulate_symbol: transmit block must be N_ue x K");
    ObservationFrame y(n_bs, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        y.col(k).noalias() = freq[static_cast<std::size_t>(k)] * transmit.col(k);
    }
    if (noise_var > 0.0) {
        for (Eigen::Index k = 0; k < K; ++k)
            for (Eigen::Index b = 0; b < n_bs; ++b) y(b, k) += rng.complex_normal(noise_var);
    }
    return y;
}

ObservationFrame simulate_symbol(const ChannelTensor& freq, const SystemConfig& cfg, Rng& rng) {
    if (freq.empty()) throw ContractError("simulate_symbol: empty frequency response");
    const auto K = static_cast<Eigen::Index>(freq.size());
    CMatrix x(freq.front().cols(), K);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index u = 0; u < x.rows(); ++u) x(u, k) = rng.complex_normal();
    return simulate_symbol(freq, x, cfg.noise_var(), rng);
}

ChannelRealization realize_channel(const SystemConfig& cfg, Rng& rng, bool with_tensors) {
    ChannelRealization out;
    out.direct = draw_direct_params(cfg, rng);
    out.surfaces = make_surfaces(cfg);
    std::vector<SurfaceState> states;
    for (auto& s : out.surfaces) {
        s.host_coeff = rng.uniform(cfg.reflection_coeff_min, cfg.reflection_coeff_max);
        out.reflectors.push_back(draw_cascaded_params(cfg, s, rng));
        states.push_back(surface_matrix(s));
    }
    if (!with_tensors) return out;
    out.delay = delay_tensor(out.direct, out.reflectors, states, cfg);
    out.freq = freq_response(out.delay, cfg.n_subcarriers);
    return out;
}

WidebandChannel::WidebandChannel(const DirectPaths& direct, std::vector<ReflectorPaths> reflectors,
                                 const SystemConfig& cfg)
    : reflectors_(std::move(reflectors)), n_subcarriers_(cfg.n_subcarriers) {
    const int D = cfg.cyclic_prefix;
    const int K = cfg.n_subcarriers;

    ChannelTensor direct_taps;
    direct_taps.reserve(static_cast<std::size_t>(D));
    for (int d = 0; d < D; ++d) direct_taps.push_back(direct_delay_channel(direct, cfg, d));
    direct_ = freq_response(direct_taps, K);

    for (const auto& refl : reflectors_) {
        const Ura surf{refl.surface_rows, refl.surface_cols};
        const int n_surf = surf.rows * surf.cols;
        const auto Lq = static_cast<int>(refl.bs_side.size());
        const auto Ln = static_cast<int>(refl.ue_side.size());
        Reflector term;
        term.surface_departure.resize(n_surf, Lq);
        term.surface_arrival.resize(n_surf, Ln);
        for (int q = 0; q < Lq; ++q) {
            const auto& p = refl.bs_side[static_cast<std::size_t>(q)];
            term.surface_departure.col(q) =
                steering_vector(surf, p.surface_elevation, p.surface_azimuth).conjugate();
        }
        for (int n = 0; n < Ln; ++n) {
            const auto& p = refl.ue_side[static_cast<std::size_t>(n)];
            term.surface_arrival.col(n) = steering_vector(surf, p.surface_elevation, p.surface_azimuth);
        }
        const double scale =
            std::sqrt(refl.path_loss_bs * refl.path_loss_ue / static_cast<double>(Lq * Ln));
        for (int q = 0; q < Lq; ++q) {
            const auto& qp = refl.bs_side[static_cast<std::size_t>(q)];
            const CVector a_bs = bs_steering(cfg, qp.bs_elevation, qp.bs_azimuth);
            for (int n = 0; n < Ln; ++n) {
                const auto& np = refl.ue_side[static_cast<std::size_t>(n)];
                const CMatrix outer = (scale * qp.gain * np.gain) * a_bs *
                                      ue_steering(cfg, np.ue_elevation).adjoint();
                std::vector<double> taps(static_cast<std::size_t>(D));
                for (int d = 0; d < D; ++d)
                    taps[static_cast<std::size_t>(d)] =
                        pulse(d * cfg.sample_period - qp.delay - np.delay, cfg.sample_period, cfg.rolloff);
                PairTerm pt{q, n, {}};
                pt.spectrum.reserve(static_cast<std::size_t>(K));
                for (int k = 0; k < K; ++k) {
                    cplx s = 0.0;
                    for (int d = 0; d < D; ++d) s += taps[static_cast<std::size_t>(d)] * dft_twiddle(k, d, K);
                    pt.spectrum.push_back(s * outer);
                }
                term.pairs.push_back(std::move(pt));
            }
        }
        terms_.push_back(std::move(term));
    }
}

void WidebandChannel::accumulate_reflector(int r, const SurfaceState& state, ChannelTensor& out) const {
    const auto& term = terms_.at(static_cast<std::size_t>(r));
    if (state.diagonal.size() != term.surface_departure.rows())
        throw ContractError("WidebandChannel: surface state size mismatch");
    if (out.size() != static_cast<std::size_t>(n_subcarriers_))
        throw ContractError("WidebandChannel: output tensor must have K entries");
    // alpha(q, n) = a_dep(q)^H diag(s) a_arr(n)
    const Eigen::MatrixXcd alpha =
        term.surface_departure.transpose() * state.diagonal.asDiagonal() * term.surface_arrival;
    for (const auto& pt : term.pairs) {
        const cplx a = alpha(pt.q, pt.n);
        for (std::size_t k = 0; k < out.size(); ++k) out[k].noalias() += a * pt.spectrum[k];
    }
}

ChannelTensor WidebandChannel::response(std::span<const SurfaceState> states) const {
    if (states.size() != terms_.size())
        throw ContractError("WidebandChannel: one SurfaceState per reflector required");
    ChannelTensor out = direct_;
    for (std::size_t r = 0; r < terms_.size(); ++r) accumulate_reflector(static_cast<int>(r), states[r], out);
    return out;
}

} // namespace risdet
