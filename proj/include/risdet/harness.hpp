#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "risdet/channel.hpp"
#include "risdet/config.hpp"
#include "risdet/dsvdd.hpp"
#include "risdet/features.hpp"

namespace risdet {

enum class DetectorKind { dsvdd, scanb_raw, hotelling };

std::string_view to_string(DetectorKind kind);
DetectorKind parse_detector_kind(std::string_view name);

/// Source of flattened observations v_1, v_2, ... for one episode.
class ObservationSource {
public:
    virtual ~ObservationSource() = default;
    virtual FeatureVector next() = 0;
    /// FNV-1a over every observation produced so far.
    std::uint64_t stream_hash() const { return hash_; }

protected:
    void absorb(const FeatureVector& v);

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

/// Simulated uplink for one coherence block. From symbol `change_time` on, the
/// designated reflector's RIS segment redraws 1-bit phases every symbol.
class ScenarioStream final : public ObservationSource {
public:
    ScenarioStream(const SystemConfig& cfg, std::uint64_t seed, int change_time);

    FeatureVector next() override;
    ObservationFrame next_frame();

    int symbols_emitted() const { return index_; }
    long ris_phase_draws() const { return phase_draws_; }
    const ChannelRealization& realization() const { return realization_; }

private:
    SystemConfig cfg_;
    int change_time_;
    Rng symbol_rng_;
    Rng ris_rng_;
    ChannelRealization realization_;
    std::unique_ptr<WidebandChannel> channel_;
    ChannelTensor static_response_; // every surface static
    ChannelTensor fixed_part_;      // everything except the RIS reflector
    int ris_index_ = -1;
    int index_ = 0;
    long phase_draws_ = 0;
};

/// i.i.d. N(0, I) vectors; from `change_time` on, the mean shifts by `shift` on every coordinate.
class GaussianShiftStream final : public ObservationSource {
public:
    GaussianShiftStream(int dim, double shift, std::uint64_t seed, int change_time);
    FeatureVector next() override;

private:
    int dim_;
    double shift_;
    int change_time_;
    Rng rng_;
    int index_ = 0;
};

using SourceFactory = std::function<std::unique_ptr<ObservationSource>(std::uint64_t seed, int change_time)>;

SourceFactory scenario_factory(const SystemConfig& cfg);
SourceFactory gaussian_shift_factory(int dim, double shift);

/// m <= ref_len feeds the reference, m > ref_len feeds the detector, up to `horizon`.
struct EpisodeProtocol {
    int ref_len = 100;
    int change_time = 150;
    int horizon = 500;

    static EpisodeProtocol from(const SystemConfig& cfg) {
        return {cfg.ref_len, cfg.change_time, cfg.frame_len};
    }
};

struct DetectorSpec {
    DetectorKind kind = DetectorKind::dsvdd;
    std::shared_ptr<const DsvddModel> model; // required for dsvdd
    DetectorConfig config;
    double threshold = std::numeric_limits<double>::infinity();
};

enum class Outcome { detected, false_alarm, missed, clean };
std::string_view to_string(Outcome outcome);

struct TracePoint {
    int m;
    std::optional<double> statistic;
    bool alarm;
};

struct EpisodeResult {
    int change_time = 0;
    int horizon = 0;
    std::optional<int> first_alarm;
    Outcome outcome = Outcome::clean;
    int delay = 0; // valid when detected
    double max_statistic = -std::numeric_limits<double>::infinity();
    double mean_update_seconds = 0.0;    // statistic update incl. forward pass
    double mean_statistic_seconds = 0.0; // statistic update only
    std::uint64_t stream_hash = 0;
    std::vector<TracePoint> trace;
};

/// Classifies an alarm time against the change time and horizon.
Outcome classify(std::optional<int> first_alarm, int change_time, int horizon);

EpisodeResult run_episode(ObservationSource& source, const EpisodeProtocol& protocol,
                          const DetectorSpec& spec, bool record_trace = false);

EpisodeResult run_episode(const SystemConfig& cfg, const DetectorSpec& spec, std::uint64_t seed,
                          bool record_trace = false);

/// Nearest-rank q-quantile: the ceil(q n)-th order statistic (at least the first).
double nearest_rank_quantile(std::vector<double> values, double q);

struct CalibrationResult {
    double threshold = 0.0;
    std::vector<double> maxima;
    bool degenerate = false;
};

/// Runs `n_cal` no-change episodes and returns the (1 - F) nearest-rank quantile
/// of the per-episode maximum statistic.
CalibrationResult calibrate_threshold(const SourceFactory& factory, const EpisodeProtocol& protocol,
                                      const DetectorSpec& spec, double false_alarm_target, int n_cal,
                                      std::uint64_t seed);

struct MonteCarloReport {
    DetectorKind kind = DetectorKind::dsvdd;
    int episodes = 0;
    int detected = 0;
    int false_alarms = 0;
    int misses = 0;
    double avg_delay = std::numeric_limits<double>::quiet_NaN();
    double delay_stddev = std::numeric_limits<double>::quiet_NaN();
    double censored_avg_delay = std::numeric_limits<double>::quiet_NaN();
    double false_alarm_rate = std::numeric_limits<double>::quiet_NaN();
    double miss_rate = std::numeric_limits<double>::quiet_NaN();
    double avg_update_time_us = std::numeric_limits<double>::quiet_NaN();
    double avg_statistic_time_us = std::numeric_limits<double>::quiet_NaN();
    double theta = std::numeric_limits<double>::quiet_NaN();
    std::vector<int> delays;
    std::vector<std::uint64_t> stream_hashes;
    std::vector<EpisodeResult> results; // per episode, in seed order

    bool empty() const { return episodes == 0; }
};

MonteCarloReport aggregate(DetectorKind kind, double theta, const std::vector<EpisodeResult>& episodes);

/// Runs every detector over the same `n_episodes` episode seeds.
std::vector<MonteCarloReport> monte_carlo(const SourceFactory& factory, const EpisodeProtocol& protocol,
                                          const std::vector<DetectorSpec>& specs, int n_episodes,
                                          std::uint64_t seed, int workers = 1);

struct TrainingSetInfo {
    int realizations = 0;
    long ris_phase_draws = 0;
};

/// Pre-change observations: a fresh channel every `frame_len` symbols, surfaces static.
TrainingSet generate_training_set(const SystemConfig& cfg, int size, std::uint64_t seed,
                                  TrainingSetInfo* info = nullptr);

} // namespace risdet
