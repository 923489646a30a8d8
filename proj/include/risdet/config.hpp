#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace risdet {

/// Raised when a configuration or argument violates a documented invariant.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a caller breaks an operation's precondition (dimension mismatch etc).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised for numerical breakdowns that callers must handle (singular matrices, NaN losses).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Planar reflector description. The RIS segment occupies the first
/// `ris_count` diagonal positions; the remainder is static material.
struct SurfaceSpec {
    int rows = 20;
    int cols = 20;
    int ris_count = 0;
    /// Static reflection coefficient of the host material (delta).
    double host_coeff = 1.0;
    /// Static segment gamma (length n_elements - ris_count). Empty means host_coeff * 1.
    std::vector<std::complex<double>> static_coeffs;

    int n_elements() const { return rows * cols; }
};

/// Scenario constants for one simulated uplink.
struct SystemConfig {
    int n_ue = 10;
    int bs_rows = 4;
    int bs_cols = 5;
    int n_subcarriers = 64;
    int cyclic_prefix = 128;
    double sample_period = 1e-8;
    double carrier_freq = 3.5e9;
    int paths_direct = 4;
    int paths_bs_r = 4;
    int paths_r_ue = 4;
    double noise_var_db = -120.0;
    double rolloff = 0.5;
    double d_bs_ue = 10.0;
    double d_bs_r = 3.0;
    double d_r_ue = 3.0;
    int frame_len = 500;
    int change_time = 150;
    int ref_len = 100;
    std::uint64_t rng_seed = 1;

    // Reflector layout. `ris_reflector` is the 1-based index of the surface
    // that becomes RIS-coated at the change time.
    int n_reflectors = 2;
    int surface_rows = 20;
    int surface_cols = 20;
    int ris_reflector = 2;
    int ris_elements = 400;
    double reflection_coeff_min = 1.0;
    double reflection_coeff_max = 1.0;

    int n_bs() const { return bs_rows * bs_cols; }
    int n_surface() const { return surface_rows * surface_cols; }
    double noise_var() const;
    double wavelength() const;
    int feature_dim() const { return 2 * n_bs() * n_subcarriers; }

    /// Throws ConfigError naming the first violated field.
    void validate() const;
};

enum class KernelKind { linear, rbf };

struct DetectorConfig {
    int window = 5;
    KernelKind kernel = KernelKind::linear;     // score-stream scan-B
    KernelKind raw_kernel = KernelKind::linear; // raw-vector scan-B benchmark
    double rbf_bandwidth = 1.0;
    double hotelling_shrinkage = 1e-3;
    double false_alarm_target = 0.25;
    int calibration_episodes = 200;

    void validate(const SystemConfig& sys) const;
};

struct TrainConfig {
    double lambda1 = 0.1;
    double lambda2 = 1e-4;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 30;
    double leaky_slope = 0.01;
    std::vector<int> hidden_widths{1280, 640, 320};
    int latent_dim = 32;
    bool activate_last = true;
    int train_size = 60000;
    double init_radius_quantile = 0.9;

    void validate() const;
};

struct SweepConfig {
    std::vector<int> subcarriers{64, 128, 256, 512};
    std::vector<double> noise_db{-120.0};
};

/// Everything a config file can set.
struct RunConfig {
    SystemConfig system;
    DetectorConfig detector;
    TrainConfig train;
    SweepConfig sweep;

    void validate() const;
};

/// Surfaces implied by the scenario: `n_reflectors` static reflectors, with the
/// designated one carrying an RIS segment of `ris_elements` elements.
std::vector<SurfaceSpec> make_surfaces(const SystemConfig& cfg, double host_coeff = 1.0);

} // namespace risdet
