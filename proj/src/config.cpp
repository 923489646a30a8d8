#include "risdet/config.hpp"

#include <cmath>

namespace risdet {

namespace {

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key + ": " + what);
}

} // namespace

double SystemConfig::noise_var() const { return std::pow(10.0, noise_var_db / 10.0); }

double SystemConfig::wavelength() const { return 299792458.0 / carrier_freq; }

void SystemConfig::validate() const {
    require(n_ue >= 1, "n_ue", "must be >= 1");
    require(bs_rows >= 1, "bs_rows", "must be >= 1");
    require(bs_cols >= 1, "bs_cols", "must be >= 1");
    require(n_subcarriers >= 1, "n_subcarriers", "must be >= 1");
    require(cyclic_prefix >= 1, "cyclic_prefix", "must be >= 1");
    require(sample_period > 0.0, "sample_period", "must be positive");
    require(carrier_freq > 0.0, "carrier_freq", "must be positive");
    require(paths_direct >= 1, "paths_direct", "must be >= 1");
    require(paths_bs_r >= 1, "paths_bs_r", "must be >= 1");
    require(paths_r_ue >= 1, "paths_r_ue", "must be >= 1");
    require(std::isfinite(noise_var_db), "noise_var_db", "must be finite");
    require(rolloff >= 0.0 && rolloff <= 1.0, "rolloff", "must lie in [0, 1]");
    require(d_bs_ue > 0.0, "d_bs_ue", "must be positive");
    require(d_bs_r > 0.0, "d_bs_r", "must be positive");
    require(d_r_ue > 0.0, "d_r_ue", "must be positive");
    require(frame_len >= 1, "frame_len", "must be >= 1");
    require(ref_len >= 0, "ref_len", "must be >= 0");
    require(ref_len < change_time, "change_time", "must exceed ref_len");
    require(change_time <= frame_len, "change_time", "must not exceed frame_len");
    require(n_reflectors >= 0, "n_reflectors", "must be >= 0");
    require(surface_rows >= 1, "surface_rows", "must be >= 1");
    require(surface_cols >= 1, "surface_cols", "must be >= 1");
    require(n_reflectors == 0 || (ris_reflector >= 1 && ris_reflector <= n_reflectors),
            "ris_reflector", "must index an existing reflector");
    require(ris_elements >= 0 && ris_elements <= n_surface(), "ris_elements",
            "must lie in [0, surface_rows*surface_cols]");
    require(reflection_coeff_min >= 0.0 && reflection_coeff_max <= 1.0 &&
                reflection_coeff_min <= reflection_coeff_max,
            "reflection_coeff_min", "need 0 <= min <= max <= 1");
}

void DetectorConfig::validate(const SystemConfig& sys) const {
    require(window >= 2, "window", "must be >= 2");
    require(sys.ref_len % window == 0, "ref_len", "must be divisible by window");
    require(sys.ref_len >= window, "ref_len", "must hold at least one window");
    require(rbf_bandwidth > 0.0, "rbf_bandwidth", "must be positive");
    require(hotelling_shrinkage > 0.0, "hotelling_shrinkage", "must be positive");
    require(false_alarm_target >= 0.0 && false_alarm_target <= 1.0, "false_alarm_target",
            "must lie in [0, 1]");
    require(calibration_episodes >= 20, "calibration_episodes", "must be >= 20");
}

void TrainConfig::validate() const {
    require(lambda1 > 0.0, "lambda1", "must be positive");
    require(lambda2 >= 0.0, "lambda2", "must be >= 0");
    require(learning_rate > 0.0, "learning_rate", "must be positive");
    require(batch_size >= 1, "batch_size", "must be >= 1");
    require(epochs >= 0, "epochs", "must be >= 0");
    require(leaky_slope >= 0.0, "leaky_slope", "must be >= 0");
    for (int w : hidden_widths) require(w >= 1, "hidden_widths", "widths must be >= 1");
    require(latent_dim >= 1, "latent_dim", "must be >= 1");
    require(train_size >= 1, "train_size", "must be >= 1");
    require(init_radius_quantile >= 0.0 && init_radius_quantile <= 1.0, "init_radius_quantile",
            "must lie in [0, 1]");
}

void RunConfig::validate() const {
    system.validate();
    detector.validate(system);
    train.validate();
    require(!sweep.subcarriers.empty(), "k_sweep", "must not be empty");
    for (int k : sweep.subcarriers) require(k >= 1, "k_sweep", "entries must be >= 1");
    require(!sweep.noise_db.empty(), "noise_sweep", "must not be empty");
}

std::vector<SurfaceSpec> make_surfaces(const SystemConfig& cfg, double host_coeff) {
    std::vector<SurfaceSpec> out;
    out.reserve(static_cast<std::size_t>(cfg.n_reflectors));
    for (int r = 0; r < cfg.n_reflectors; ++r) {
        SurfaceSpec s;
        s.rows = cfg.surface_rows;
        s.cols = cfg.surface_cols;
        s.ris_count = (r + 1 == cfg.ris_reflector) ? cfg.ris_elements : 0;
        s.host_coeff = host_coeff;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace risdet
