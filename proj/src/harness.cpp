#include "risdet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <climits>
#include <cstring>
#include <iostream>
#include <thread>

#include "risdet/detector.hpp"

namespace risdet {

std::string_view to_string(DetectorKind kind) {
    switch (kind) {
    case DetectorKind::dsvdd: return "dsvdd";
    case DetectorKind::scanb_raw: return "scanb-raw";
    case DetectorKind::hotelling: return "hotelling";
    }
    return "?";
}

DetectorKind parse_detector_kind(std::string_view name) {
    if (name == "dsvdd") return DetectorKind::dsvdd;
    if (name == "scanb-raw") return DetectorKind::scanb_raw;
    if (name == "hotelling") return DetectorKind::hotelling;
    throw ConfigError("unknown detector '" + std::string(name) + "' (expected dsvdd, scanb-raw, hotelling)");
}

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
    case Outcome::detected: return "detected";
    case Outcome::false_alarm: return "false_alarm";
    case Outcome::missed: return "missed";
    case Outcome::clean: return "clean";
    }
    return "?";
}

void ObservationSource::absorb(const FeatureVector& v) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    const std::size_t n = static_cast<std::size_t>(v.size()) * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
        hash_ ^= bytes[i];
        hash_ *= 0x100000001b3ull;
    }
}

ScenarioStream::ScenarioStream(const SystemConfig& cfg, std::uint64_t seed, int change_time)
    : cfg_(cfg), change_time_(change_time), symbol_rng_(derive_seed(seed, 2)), ris_rng_(derive_seed(seed, 3)) {
    Rng channel_rng(derive_seed(seed, 1));
    realization_ = realize_channel(cfg_, channel_rng, false);
    channel_ = std::make_unique<WidebandChannel>(realization_.direct, realization_.reflectors, cfg_);

    std::vector<SurfaceState> states;
    for (const auto& s : realization_.surfaces) states.push_back(surface_matrix(s));
    static_response_ = channel_->response(states);

    if (cfg_.n_reflectors > 0 &&
        realization_.surfaces[static_cast<std::size_t>(cfg_.ris_reflector - 1)].ris_count > 0)
        ris_index_ = cfg_.ris_reflector - 1;
    fixed_part_ = channel_->direct_response();
    for (int r = 0; r < channel_->n_reflectors(); ++r)
        if (r != ris_index_) channel_->accumulate_reflector(r, states[static_cast<std::size_t>(r)], fixed_part_);
}

ObservationFrame ScenarioStream::next_frame() {
    const int m = ++index_;
    if (ris_index_ >= 0 && m >= change_time_) {
        const auto& spec = realization_.surfaces[static_cast<std::size_t>(ris_index_)];
        const auto phases = draw_ris_phases(spec.ris_count, ris_rng_);
        phase_draws_ += static_cast<long>(phases.size());
        const SurfaceState state = surface_matrix(spec, std::span<const double>(phases));
        ChannelTensor h = fixed_part_;
        channel_->accumulate_reflector(ris_index_, state, h);
        return simulate_symbol(h, cfg_, symbol_rng_);
    }
    return simulate_symbol(static_response_, cfg_, symbol_rng_);
}

FeatureVector ScenarioStream::next() {
    FeatureVector v = flatten_observation(next_frame());
    absorb(v);
    return v;
}

GaussianShiftStream::GaussianShiftStream(int dim, double shift, std::uint64_t seed, int change_time)
    : dim_(dim), shift_(shift), change_time_(change_time), rng_(seed) {}

FeatureVector GaussianShiftStream::next() {
    const int m = ++index_;
    FeatureVector v(dim_);
    const double mu = m >= change_time_ ? shift_ : 0.0;
    for (int i = 0; i < dim_; ++i) v[i] = mu + rng_.normal();
    absorb(v);
    return v;
}

SourceFactory scenario_factory(const SystemConfig& cfg) {
    return [cfg](std::uint64_t seed, int change_time) -> std::unique_ptr<ObservationSource> {
        return std::make_unique<ScenarioStream>(cfg, seed, change_time);
    };
}

SourceFactory gaussian_shift_factory(int dim, double shift) {
    return [dim, shift](std::uint64_t seed, int change_time) -> std::unique_ptr<ObservationSource> {
        return std::make_unique<GaussianShiftStream>(dim, shift, seed, change_time);
    };
}

Outcome classify(std::optional<int> first_alarm, int change_time, int horizon) {
    if (first_alarm) return *first_alarm < change_time ? Outcome::false_alarm : Outcome::detected;
    return change_time <= horizon ? Outcome::missed : Outcome::clean;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

/// Uniform driver over the three detector families.
class EpisodeDetector {
public:
    virtual ~EpisodeDetector() = default;
    /// Returns the step result; accumulates statistic-only time into `stat_time`.
    virtual StepResult step(FeatureVector v, Clock::duration& stat_time) = 0;
};

template <typename Obs>
class ScanBDriver final : public EpisodeDetector {
public:
    ScanBDriver(ReferenceBank<Obs> bank, ConfiguredKernel kernel, double threshold,
                std::shared_ptr<const DsvddModel> model)
        : scan_(std::move(bank), kernel, threshold), model_(std::move(model)) {}

    StepResult step(FeatureVector v, Clock::duration& stat_time) override {
        if constexpr (std::is_same_v<Obs, double>) {
            const double s = model_->anomaly_score(v);
            const auto t0 = Clock::now();
            auto r = scan_.step(s);
            stat_time += Clock::now() - t0;
            return r;
        } else {
            const auto t0 = Clock::now();
            auto r = scan_.step(std::move(v));
            stat_time += Clock::now() - t0;
            return r;
        }
    }

private:
    ScanB<Obs, ConfiguredKernel> scan_;
    std::shared_ptr<const DsvddModel> model_;
};

class HotellingDriver final : public EpisodeDetector {
public:
    HotellingDriver(HotellingReference ref, int window, double threshold) : det_(std::move(ref), window, threshold) {}

    StepResult step(FeatureVector v, Clock::duration& stat_time) override {
        const auto t0 = Clock::now();
        auto r = det_.step(std::move(v));
        stat_time += Clock::now() - t0;
        return r;
    }

private:
    HotellingDetector det_;
};

std::unique_ptr<EpisodeDetector> make_detector(const DetectorSpec& spec, const std::vector<FeatureVector>& ref) {
    const int window = spec.config.window;
    switch (spec.kind) {
    case DetectorKind::dsvdd: {
        if (!spec.model) throw ConfigError("dsvdd detector requires a trained model");
        Eigen::MatrixXf batch(spec.model->input_dim(), static_cast<Eigen::Index>(ref.size()));
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (ref[i].size() != batch.rows())
                throw ConfigError("model input width " + std::to_string(batch.rows()) +
                                  " does not match observation length " + std::to_string(ref[i].size()));
            batch.col(static_cast<Eigen::Index>(i)) = ref[i].cast<float>();
        }
        const Eigen::VectorXf s = spec.model->anomaly_scores(batch);
        std::vector<double> scores(s.data(), s.data() + s.size());
        return std::make_unique<ScanBDriver<double>>(
            ReferenceBank<double>::build(scores, window),
            ConfiguredKernel{spec.config.kernel, spec.config.rbf_bandwidth}, spec.threshold, spec.model);
    }
    case DetectorKind::scanb_raw:
        return std::make_unique<ScanBDriver<Eigen::VectorXd>>(
            ReferenceBank<Eigen::VectorXd>::build(ref, window),
            ConfiguredKernel{spec.config.raw_kernel, spec.config.rbf_bandwidth}, spec.threshold, nullptr);
    case DetectorKind::hotelling:
        return std::make_unique<HotellingDriver>(
            HotellingReference::estimate(ref, spec.config.hotelling_shrinkage), window, spec.threshold);
    }
    throw ConfigError("unknown detector kind");
}

} // namespace

EpisodeResult run_episode(ObservationSource& source, const EpisodeProtocol& protocol, const DetectorSpec& spec,
                          bool record_trace) {
    if (protocol.ref_len < 1 || protocol.horizon <= protocol.ref_len)
        throw ConfigError("run_episode: need 1 <= ref_len < horizon");
    EpisodeResult result;
    result.change_time = protocol.change_time;
    result.horizon = protocol.horizon;

    std::vector<FeatureVector> ref;
    ref.reserve(static_cast<std::size_t>(protocol.ref_len));
    for (int m = 1; m <= protocol.ref_len; ++m) ref.push_back(source.next());
    auto detector = make_detector(spec, ref);

    Clock::duration total{};
    Clock::duration stat{};
    long updates = 0;
    for (int m = protocol.ref_len + 1; m <= protocol.horizon; ++m) {
        FeatureVector v = source.next();
        // Once alarmed the outcome is fixed; keep drawing so every detector sees the full stream.
        if (result.first_alarm && !record_trace) continue;
        const auto t0 = Clock::now();
        const StepResult r = detector->step(std::move(v), stat);
        total += Clock::now() - t0;
        ++updates;
        if (r.statistic) result.max_statistic = std::max(result.max_statistic, *r.statistic);
        if (r.alarm && !result.first_alarm) result.first_alarm = m;
        if (record_trace) result.trace.push_back({m, r.statistic, r.alarm});
    }
    result.outcome = classify(result.first_alarm, protocol.change_time, protocol.horizon);
    if (result.outcome == Outcome::detected) result.delay = *result.first_alarm - protocol.change_time;
    if (updates > 0) {
        result.mean_update_seconds = seconds(total) / static_cast<double>(updates);
        result.mean_statistic_seconds = seconds(stat) / static_cast<double>(updates);
    }
    result.stream_hash = source.stream_hash();
    return result;
}

EpisodeResult run_episode(const SystemConfig& cfg, const DetectorSpec& spec, std::uint64_t seed, bool record_trace) {
    ScenarioStream stream(cfg, seed, cfg.change_time);
    return run_episode(stream, EpisodeProtocol::from(cfg), spec, record_trace);
}

double nearest_rank_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ConfigError("nearest_rank_quantile: no values");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    auto rank = static_cast<long>(std::ceil(q * n - 1e-9));
    rank = std::clamp<long>(rank, 1, static_cast<long>(values.size()));
    return values[static_cast<std::size_t>(rank - 1)];
}

CalibrationResult calibrate_threshold(const SourceFactory& factory, const EpisodeProtocol& protocol,
                                      const DetectorSpec& spec, double false_alarm_target, int n_cal,
                                      std::uint64_t seed) {
    if (n_cal < 20) throw ConfigError("calibrate_threshold: n_cal must be >= 20");
    if (false_alarm_target < 0.0 || false_alarm_target > 1.0)
        throw ConfigError("calibrate_threshold: F must lie in [0, 1]");
    DetectorSpec open = spec;
    open.threshold = std::numeric_limits<double>::infinity();
    EpisodeProtocol no_change = protocol;
    no_change.change_time = protocol.horizon + 1;

    CalibrationResult out;
    for (int i = 0; i < n_cal; ++i) {
        auto source = factory(derive_seed(seed, static_cast<std::uint64_t>(i)), no_change.change_time);
        out.maxima.push_back(run_episode(*source, no_change, open).max_statistic);
    }
    out.threshold = nearest_rank_quantile(out.maxima, 1.0 - false_alarm_target);
    const auto [lo, hi] = std::minmax_element(out.maxima.begin(), out.maxima.end());
    out.degenerate = *lo == *hi;
    if (out.degenerate)
        std::cerr << "warning: calibration maxima for " << to_string(spec.kind) << " are all equal ("
                  << out.threshold << ")\n";
    return out;
}

MonteCarloReport aggregate(DetectorKind kind, double theta, const std::vector<EpisodeResult>& episodes) {
    MonteCarloReport rep;
    rep.kind = kind;
    rep.theta = theta;
    rep.episodes = static_cast<int>(episodes.size());
    rep.results = episodes;
    if (episodes.empty()) return rep;
    double delay_sum = 0.0;
    double delay_sq = 0.0;
    double censored_sum = 0.0;
    int censored_n = 0;
    double update_sum = 0.0;
    double stat_sum = 0.0;
    for (const auto& e : episodes) {
        rep.stream_hashes.push_back(e.stream_hash);
        update_sum += e.mean_update_seconds;
        stat_sum += e.mean_statistic_seconds;
        switch (e.outcome) {
        case Outcome::detected:
            ++rep.detected;
            rep.delays.push_back(e.delay);
            delay_sum += e.delay;
            delay_sq += static_cast<double>(e.delay) * e.delay;
            censored_sum += e.delay;
            ++censored_n;
            break;
        case Outcome::false_alarm: ++rep.false_alarms; break;
        case Outcome::missed:
            ++rep.misses;
            censored_sum += e.horizon - e.change_time;
            ++censored_n;
            break;
        case Outcome::clean: break;
        }
    }
    const double n = rep.episodes;
    rep.false_alarm_rate = rep.false_alarms / n;
    rep.miss_rate = rep.misses / n;
    rep.avg_update_time_us = 1e6 * update_sum / n;
    rep.avg_statistic_time_us = 1e6 * stat_sum / n;
    if (rep.detected > 0) {
        rep.avg_delay = delay_sum / rep.detected;
        const double var = rep.detected > 1
                               ? (delay_sq - rep.detected * rep.avg_delay * rep.avg_delay) / (rep.detected - 1)
                               : 0.0;
        rep.delay_stddev = std::sqrt(std::max(0.0, var));
    }
    if (censored_n > 0) rep.censored_avg_delay = censored_sum / censored_n;
    return rep;
}

std::vector<MonteCarloReport> monte_carlo(const SourceFactory& factory, const EpisodeProtocol& protocol,
                                          const std::vector<DetectorSpec>& specs, int n_episodes,
                                          std::uint64_t seed, int workers) {
    if (n_episodes < 0) throw ConfigError("monte_carlo: episode count must be >= 0");
    std::vector<std::vector<EpisodeResult>> results(specs.size(),
                                                    std::vector<EpisodeResult>(static_cast<std::size_t>(n_episodes)));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (int i = next++; i < n_episodes; i = next++) {
            try {
                const auto episode_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
                for (std::size_t d = 0; d < specs.size(); ++d) {
                    auto source = factory(episode_seed, protocol.change_time);
                    results[d][static_cast<std::size_t>(i)] = run_episode(*source, protocol, specs[d]);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n_episodes;
            }
        }
    };
    const int n_threads = std::clamp(workers, 1, std::max(1, n_episodes));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<MonteCarloReport> out;
    for (std::size_t d = 0; d < specs.size(); ++d) out.push_back(aggregate(specs[d].kind, specs[d].threshold, results[d]));
    return out;
}

TrainingSet generate_training_set(const SystemConfig& cfg, int size, std::uint64_t seed, TrainingSetInfo* info) {
    if (size < 1) throw ConfigError("generate_training_set: size must be >= 1");
    cfg.validate();
    TrainingSet set;
    set.samples.resize(cfg.feature_dim(), size);
    TrainingSetInfo local;
    int filled = 0;
    while (filled < size) {
        ScenarioStream stream(cfg, derive_seed(seed, static_cast<std::uint64_t>(local.realizations)), INT_MAX);
        const int take = std::min(cfg.frame_len, size - filled);
        for (int i = 0; i < take; ++i) set.samples.col(filled++) = stream.next().cast<float>();
        local.ris_phase_draws += stream.ris_phase_draws();
        ++local.realizations;
    }
    if (info) *info = local;
    return set;
}

} // namespace risdet
