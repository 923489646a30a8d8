#pragma once

#include <complex>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "risdet/config.hpp"
#include "risdet/rng.hpp"

namespace risdet {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Sequence of N_bs x N_ue matrices, indexed by delay tap or by subcarrier.
using ChannelTensor = std::vector<CMatrix>;

/// One received OFDM symbol, N_bs x K.
using ObservationFrame = CMatrix;

struct Ula {
    int n;
};
struct Ura {
    int rows;
    int cols;
};
using ArrayGeometry = std::variant<Ula, Ura>;

/// Half-wavelength array response, entry phase -pi * (position . direction).
/// ULA: exp(-j pi n sin(elev)); URA element (r, c) at index r*cols + c:
/// exp(-j pi sin(elev) (r cos(azim) + c sin(azim))). Azimuth is ignored for a ULA.
CVector steering_vector(const ArrayGeometry& geometry, double elevation, double azimuth = 0.0);

/// Raised-cosine pulse for Ts-spaced signalling.
double pulse(double t, double sample_period, double rolloff);

/// Friis free-space power gain (lambda / (4 pi d))^2.
double free_space_path_loss(double distance, double wavelength);

struct DirectPath {
    cplx gain;
    double bs_elevation;
    double bs_azimuth;
    double ue_elevation;
    double delay;
};

struct DirectPaths {
    std::vector<DirectPath> paths;
    double path_loss = 1.0;
};

/// Reflector -> BS leg (index q).
struct BsSidePath {
    cplx gain;
    double bs_elevation;
    double bs_azimuth;
    double surface_elevation;
    double surface_azimuth;
    double delay;
};

/// UE -> reflector leg (index n).
struct UeSidePath {
    cplx gain;
    double surface_elevation;
    double surface_azimuth;
    double ue_elevation;
    double delay;
};

struct ReflectorPaths {
    int surface_rows = 1;
    int surface_cols = 1;
    std::vector<BsSidePath> bs_side;
    std::vector<UeSidePath> ue_side;
    double path_loss_bs = 1.0;
    double path_loss_ue = 1.0;
};

/// Diagonal of S_r plus whether the RIS segment is currently reconfiguring.
struct SurfaceState {
    CVector diagonal;
    bool ris_active = false;
};

DirectPaths draw_direct_params(const SystemConfig& cfg, Rng& rng);

/// Both legs' delays are uniform on [0, D Ts / 2] so every q/n sum stays in [0, D Ts].
ReflectorPaths draw_cascaded_params(const SystemConfig& cfg, const SurfaceSpec& surface, Rng& rng);

/// 1-bit phases, each uniform on {0, pi}.
std::vector<double> draw_ris_phases(int count, Rng& rng);

/// Builds diag(S_r). RIS segment first, static gamma after. Without phases the
/// RIS segment takes the host coefficient (surface behaves fully static).
SurfaceState surface_matrix(const SurfaceSpec& spec,
                            std::optional<std::span<const double>> phases = std::nullopt);

CMatrix direct_delay_channel(const DirectPaths& params, const SystemConfig& cfg, int tap);

CMatrix cascaded_delay_channel(std::span<const ReflectorPaths> params,
                               std::span<const SurfaceState> states,
                               const SystemConfig& cfg, int tap);

/// A direct-form path with an explicit complex weight (no 1/L renormalization).
struct WeightedPath {
    cplx weight;
    double bs_elevation;
    double bs_azimuth;
    double ue_elevation;
    double delay;
};

struct AugmentedPaths {
    DirectPaths direct;
    std::vector<WeightedPath> extra;
};

/// Folds single-path, time-invariant reflectors into extra direct paths.
/// Throws ContractError for multi-path reflectors or active RIS states.
AugmentedPaths collapse_single_path(const DirectPaths& direct,
                                    std::span<const ReflectorPaths> reflectors,
                                    std::span<const SurfaceState> states);

CMatrix augmented_delay_channel(const AugmentedPaths& paths, const SystemConfig& cfg, int tap);

/// H_e2e[d] for d = 0..D-1.
ChannelTensor delay_tensor(const DirectPaths& direct, std::span<const ReflectorPaths> reflectors,
                           std::span<const SurfaceState> states, const SystemConfig& cfg);

/// Per-entry DFT over taps: out[k] = sum_d taps[d] exp(-j 2 pi k d / K).
ChannelTensor freq_response(const ChannelTensor& taps, int n_subcarriers);

/// y[k] = H[k] x[k] + n[k] with x ~ CN(0, I) and n ~ CN(0, sigma^2 I).
ObservationFrame simulate_symbol(const ChannelTensor& freq, const SystemConfig& cfg, Rng& rng);

/// Same as simulate_symbol with caller-supplied transmit symbols (N_ue x K).
ObservationFrame simulate_symbol(const ChannelTensor& freq, const CMatrix& transmit,
                                 double noise_var, Rng& rng);

struct ChannelRealization {
    DirectPaths direct;
    std::vector<SurfaceSpec> surfaces;
    std::vector<ReflectorPaths> reflectors;
    ChannelTensor delay;
    ChannelTensor freq;
};

/// Draws path parameters for one coherence block with every surface static,
/// including a fresh host coefficient per reflector. Tensors are left empty
/// when `with_tensors` is false.
ChannelRealization realize_channel(const SystemConfig& cfg, Rng& rng, bool with_tensors = true);

/// Precomputed frequency-domain channel for fast per-symbol resynthesis when
/// only the surface diagonals change. Each reflector contributes
/// sum_{q,n} alpha_{qn}(S) G_{qn}[k] with alpha_{qn} = a_q^H S a_n.
class WidebandChannel {
public:
    WidebandChannel(const DirectPaths& direct, std::vector<ReflectorPaths> reflectors,
                    const SystemConfig& cfg);

    int n_reflectors() const { return static_cast<int>(reflectors_.size()); }

    /// Full response for the given per-reflector states.
    ChannelTensor response(std::span<const SurfaceState> states) const;

    /// Adds reflector r's contribution under `state` into `out` (size K).
    void accumulate_reflector(int r, const SurfaceState& state, ChannelTensor& out) const;

    const ChannelTensor& direct_response() const { return direct_; }

private:
    struct PairTerm {
        int q;
        int n;
        ChannelTensor spectrum; // per k: scale * beta_q beta_n p_qn[k] a_bs a_ue^H
    };
    struct Reflector {
        Eigen::MatrixXcd surface_departure; // columns conj(a_s(q))
        Eigen::MatrixXcd surface_arrival;   // columns a_s(n)
        std::vector<PairTerm> pairs;
    };

    std::vector<ReflectorPaths> reflectors_;
    std::vector<Reflector> terms_;
    ChannelTensor direct_;
    int n_subcarriers_;
};

} // namespace risdet
