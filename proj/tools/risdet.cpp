#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "risdet/harness.hpp"
#include "risdet/io.hpp"

namespace fs = std::filesystem;
using namespace risdet;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<int> k;
    std::optional<double> noise_db;
    std::optional<std::uint64_t> seed;
    std::string out;
};

// Stream tags keep the seed streams of different subcommands apart.
enum SeedStream : std::uint64_t { kTrainData = 11, kTrainInit = 12, kCalibration = 13, kEvaluation = 14, kRun = 15 };

void add_common(CLI::App* cmd, CommonOptions& o, bool single_point = true) {
    cmd->add_option("-c,--config", o.config, "Config file (key = value lines)")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.overrides, "Override a config key, e.g. --set window=10")->take_all();
    if (single_point) {
        cmd->add_option("--k", o.k, "Number of subcarriers K");
        cmd->add_option("--noise-db", o.noise_db, "Noise variance in dB");
    }
    cmd->add_option("--seed", o.seed, "Base seed (defaults to the config rng_seed)");
}

RunConfig load_config(const CommonOptions& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : parse_config(o.config);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.k) cfg.system.n_subcarriers = *o.k;
    if (o.noise_db) cfg.system.noise_var_db = *o.noise_db;
    cfg.validate();
    return cfg;
}

std::uint64_t base_seed(const CommonOptions& o, const RunConfig& cfg) { return o.seed.value_or(cfg.system.rng_seed); }

RunManifest start_manifest(const std::string& command, const RunConfig& cfg, std::uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.seed = seed;
    m.config_snapshot = format_config(cfg);
    m.started = utc_timestamp();
    return m;
}

void finish_manifest(RunManifest& m, const fs::path& artifact) {
    m.finished = utc_timestamp();
    const auto p = write_manifest(artifact, m);
    std::cerr << "wrote " << artifact.string() << " (manifest " << p.string() << ")\n";
}

std::vector<DetectorKind> parse_kinds(const std::vector<std::string>& names) {
    std::vector<DetectorKind> out;
    for (const auto& n : names) out.push_back(parse_detector_kind(n));
    return out;
}

std::shared_ptr<const DsvddModel> pick_model(const std::vector<std::shared_ptr<const DsvddModel>>& models,
                                             const SystemConfig& sys) {
    if (models.empty())
        throw ConfigError("the dsvdd detector needs a trained model: pass --model (see `risdet train`)");
    for (const auto& m : models)
        if (m->input_dim() == sys.feature_dim()) return m;
    throw ConfigError("no --model accepts input width " + std::to_string(sys.feature_dim()) + " (K = " +
                      std::to_string(sys.n_subcarriers) + ")");
}

std::vector<std::shared_ptr<const DsvddModel>> load_models(const std::vector<std::string>& paths,
                                                           const TrainConfig& hyper) {
    std::vector<std::shared_ptr<const DsvddModel>> out;
    for (const auto& p : paths) out.push_back(std::make_shared<const DsvddModel>(load_model(p, std::nullopt, hyper)));
    return out;
}

std::map<std::string, double> load_thresholds(const std::string& path) {
    return read_manifest(path).thresholds;
}

double threshold_for(const std::map<std::string, double>& table, DetectorKind kind) {
    const auto it = table.find(std::string(to_string(kind)));
    if (it == table.end()) throw ConfigError("threshold file has no entry for " + std::string(to_string(kind)));
    return it->second;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const CommonOptions& o, std::optional<int> size) {
    const RunConfig cfg = load_config(o);
    const auto seed = base_seed(o, cfg);
    if (o.out.empty()) throw ConfigError("gen-data: --out is required");
    auto manifest = start_manifest("gen-data", cfg, seed);
    TrainingSetInfo info;
    const int n = size.value_or(cfg.train.train_size);
    const auto set = generate_training_set(cfg.system, n, derive_seed(seed, kTrainData), &info);
    save_dataset(o.out, set);
    manifest.outputs["dataset"] = o.out;
    std::cerr << "generated " << set.size() << " observations of dim " << set.dim() << " from "
              << info.realizations << " channel realizations\n";
    finish_manifest(manifest, o.out);
    return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const CommonOptions& o, const std::string& data_path) {
    const RunConfig cfg = load_config(o);
    const auto seed = base_seed(o, cfg);
    if (o.out.empty()) throw ConfigError("train: --out is required");
    auto manifest = start_manifest("train", cfg, seed);
    const auto data = load_dataset(data_path, cfg.system.feature_dim());
    Rng rng(derive_seed(seed, kTrainInit));
    const auto result = train_dsvdd(data, cfg.train, rng);
    save_model(o.out, result.model);
    manifest.inputs["dataset"] = data_path;
    manifest.outputs["model"] = o.out;
    if (!result.epoch_losses.empty())
        std::cerr << "loss: first epoch " << result.epoch_losses.front() << ", last epoch "
                  << result.epoch_losses.back() << ", radius " << result.model.core.radius << "\n";
    finish_manifest(manifest, o.out);
    return 0;
}

// ---------------------------------------------------------------- calibrate

DetectorSpec make_spec(DetectorKind kind, const RunConfig& cfg,
                       const std::vector<std::shared_ptr<const DsvddModel>>& models) {
    DetectorSpec spec;
    spec.kind = kind;
    spec.config = cfg.detector;
    if (kind == DetectorKind::dsvdd) spec.model = pick_model(models, cfg.system);
    return spec;
}

double calibrate_one(const RunConfig& cfg, DetectorSpec spec, int n_cal, std::uint64_t seed) {
    const auto c = calibrate_threshold(scenario_factory(cfg.system), EpisodeProtocol::from(cfg.system), spec,
                                       cfg.detector.false_alarm_target, n_cal, derive_seed(seed, kCalibration));
    return c.threshold;
}

int cmd_calibrate(const CommonOptions& o, const std::vector<std::string>& detectors,
                  const std::vector<std::string>& model_paths, std::optional<int> episodes) {
    const RunConfig cfg = load_config(o);
    const auto seed = base_seed(o, cfg);
    if (o.out.empty()) throw ConfigError("calibrate: --out is required");
    auto manifest = start_manifest("calibrate", cfg, seed);
    const auto models = load_models(model_paths, cfg.train);
    const int n_cal = episodes.value_or(cfg.detector.calibration_episodes);
    for (auto kind : parse_kinds(detectors)) {
        const double theta = calibrate_one(cfg, make_spec(kind, cfg, models), n_cal, seed);
        manifest.thresholds[std::string(to_string(kind))] = theta;
        std::cerr << to_string(kind) << ": theta = " << theta << "\n";
    }
    for (std::size_t i = 0; i < model_paths.size(); ++i) manifest.inputs["model" + std::to_string(i)] = model_paths[i];
    manifest.finished = utc_timestamp();
    write_text_file(o.out, manifest_to_json(manifest));
    std::cerr << "wrote " << o.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- run

int cmd_run(const CommonOptions& o, const std::string& detector, const std::vector<std::string>& model_paths,
            std::optional<double> threshold, const std::string& thresholds_path) {
    const RunConfig cfg = load_config(o);
    const auto seed = base_seed(o, cfg);
    const auto kind = parse_detector_kind(detector);
    auto spec = make_spec(kind, cfg, load_models(model_paths, cfg.train));
    if (threshold) spec.threshold = *threshold;
    else if (!thresholds_path.empty()) spec.threshold = threshold_for(load_thresholds(thresholds_path), kind);

    const auto result = run_episode(cfg.system, spec, derive_seed(seed, kRun), true);
    const std::string csv = format_trace_csv(result.trace);
    std::cerr << to_string(kind) << ": outcome " << to_string(result.outcome);
    if (result.first_alarm) std::cerr << ", first alarm at m = " << *result.first_alarm;
    std::cerr << "\n";
    if (o.out.empty()) {
        std::cout << csv;
        return 0;
    }
    auto manifest = start_manifest("run", cfg, seed);
    for (std::size_t i = 0; i < model_paths.size(); ++i) manifest.inputs["model" + std::to_string(i)] = model_paths[i];
    manifest.thresholds[std::string(to_string(kind))] = spec.threshold;
    manifest.outputs["trace"] = o.out;
    write_text_file(o.out, csv);
    finish_manifest(manifest, o.out);
    return 0;
}

// ---------------------------------------------------------------- montecarlo

struct SweepOptions {
    std::vector<int> k;
    std::vector<double> noise_db;
    std::vector<std::string> detectors{"dsvdd", "scanb-raw", "hotelling"};
    std::vector<std::string> models;
    std::string thresholds;
    std::optional<int> episodes;
    std::optional<int> calibration_episodes;
    int workers = 1;
    std::string episodes_jsonl;
};

int cmd_montecarlo(const CommonOptions& o, const SweepOptions& s) {
    const RunConfig base = load_config(o);
    const auto seed = base_seed(o, base);
    const auto kinds = parse_kinds(s.detectors);
    const auto models = load_models(s.models, base.train);
    const std::vector<int> ks = s.k.empty() ? base.sweep.subcarriers : s.k;
    const std::vector<double> noises = s.noise_db.empty() ? base.sweep.noise_db : s.noise_db;
    const int n_episodes = s.episodes.value_or(1000);
    const int n_cal = s.calibration_episodes.value_or(base.detector.calibration_episodes);
    std::map<std::string, double> fixed;
    if (!s.thresholds.empty()) {
        if (ks.size() * noises.size() != 1)
            throw ConfigError("--thresholds applies to a single (K, noise) point; drop it to calibrate per point");
        fixed = load_thresholds(s.thresholds);
    }
    if (s.workers > 1) std::cerr << "note: timings are measured under " << s.workers << " concurrent workers\n";

    auto manifest = start_manifest("montecarlo", base, seed);
    std::string csv = results_csv_header();
    std::ostringstream jsonl;
    for (int k : ks) {
        for (double noise : noises) {
            RunConfig cfg = base;
            cfg.system.n_subcarriers = k;
            cfg.system.noise_var_db = noise;
            cfg.validate();
            std::vector<DetectorSpec> specs;
            for (auto kind : kinds) {
                auto spec = make_spec(kind, cfg, models);
                spec.threshold = fixed.empty() ? calibrate_one(cfg, spec, n_cal, seed) : threshold_for(fixed, kind);
                std::ostringstream key;
                key << to_string(kind) << "@K=" << k << "@noise_db=" << noise;
                manifest.thresholds[key.str()] = spec.threshold;
                specs.push_back(std::move(spec));
            }
            const auto reports = monte_carlo(scenario_factory(cfg.system), EpisodeProtocol::from(cfg.system), specs,
                                             n_episodes, derive_seed(seed, kEvaluation), s.workers);
            for (const auto& r : reports) {
                const std::string name(to_string(r.kind));
                csv += format_result_row({name, k, noise, r});
                std::cerr << name << " K=" << k << " noise=" << noise << ": delay " << r.avg_delay << ", false alarms "
                          << r.false_alarm_rate << ", misses " << r.miss_rate << "\n";
                if (s.episodes_jsonl.empty()) continue;
                for (std::size_t i = 0; i < r.results.size(); ++i) {
                    const auto& e = r.results[i];
                    nlohmann::ordered_json j;
                    j["detector"] = name;
                    j["K"] = k;
                    j["noise_db"] = noise;
                    j["episode"] = i;
                    j["outcome"] = std::string(to_string(e.outcome));
                    j["first_alarm"] = e.first_alarm ? nlohmann::ordered_json(*e.first_alarm) : nlohmann::ordered_json();
                    j["delay"] = e.outcome == Outcome::detected ? nlohmann::ordered_json(e.delay) : nlohmann::ordered_json();
                    j["max_statistic"] = std::isfinite(e.max_statistic) ? nlohmann::ordered_json(e.max_statistic)
                                                                         : nlohmann::ordered_json();
                    j["stream_hash"] = e.stream_hash;
                    jsonl << j.dump() << "\n";
                }
            }
        }
    }
    for (std::size_t i = 0; i < s.models.size(); ++i) manifest.inputs["model" + std::to_string(i)] = s.models[i];
    if (!s.thresholds.empty()) manifest.inputs["thresholds"] = s.thresholds;
    if (!s.episodes_jsonl.empty()) {
        write_text_file(s.episodes_jsonl, jsonl.str());
        manifest.outputs["episodes"] = s.episodes_jsonl;
    }
    if (o.out.empty()) {
        std::cout << csv;
        return 0;
    }
    manifest.outputs["results"] = o.out;
    write_text_file(o.out, csv);
    finish_manifest(manifest, o.out);
    return 0;
}

// ---------------------------------------------------------------- report

std::string fmt(double x, int prec) {
    if (std::isnan(x)) return "-";
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << x;
    return os.str();
}

int cmd_report(const std::string& in, const std::string& out) {
    const auto rows = parse_results_csv(read_text_file(in));
    std::map<std::pair<double, int>, std::vector<ResultRecord>> groups;
    for (const auto& r : rows) groups[{r.noise_db, r.subcarriers}].push_back(r);

    std::ostringstream os;
    os << "# Detection summary (" << in << ")\n";
    for (const auto& [key, recs] : groups) {
        os << "\n## K = " << key.second << ", noise = " << key.first << " dB\n\n";
        os << "| detector | episodes | avg delay | censored delay | false alarm | miss | update (us) | theta |\n";
        os << "|---|---:|---:|---:|---:|---:|---:|---:|\n";
        for (const auto& r : recs)
            os << "| " << r.detector << " | " << r.episodes << " | " << fmt(r.avg_delay, 2) << " | "
               << fmt(r.censored_avg_delay, 2) << " | " << fmt(r.false_alarm_rate, 3) << " | " << fmt(r.miss_rate, 3)
               << " | " << fmt(r.avg_update_time_us, 2) << " | " << std::setprecision(6) << r.theta << " |\n";
    }

    std::map<std::string, std::map<int, double>> by_detector;
    for (const auto& r : rows) by_detector[r.detector][r.subcarriers] = r.avg_delay;
    os << "\n## Average delay by K\n\n";
    for (const auto& [det, series] : by_detector) {
        os << "- " << det << ":";
        for (const auto& [k, d] : series) os << " K=" << k << " -> " << fmt(d, 2) << ";";
        os << "\n";
    }
    if (out.empty()) std::cout << os.str();
    else write_text_file(out, os.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Detect non-cooperative RIS activity in a simulated MIMO-OFDM uplink"};
    app.require_subcommand(1);

    CommonOptions gen_o, train_o, cal_o, run_o, mc_o;
    std::optional<int> gen_size;
    auto* gen = app.add_subcommand("gen-data", "Simulate RIS-free observations for training");
    add_common(gen, gen_o);
    gen->add_option("--size", gen_size, "Number of observations (default: train_size)");
    gen->add_option("-o,--out", gen_o.out, "Dataset file")->required();

    std::string train_data;
    auto* train = app.add_subcommand("train", "Train the dSVDD scorer on a dataset");
    add_common(train, train_o);
    train->add_option("--data", train_data, "Dataset from gen-data")->required()->check(CLI::ExistingFile);
    train->add_option("-o,--out", train_o.out, "Model file")->required();

    std::vector<std::string> cal_detectors{"dsvdd", "scanb-raw", "hotelling"};
    std::vector<std::string> cal_models;
    std::optional<int> cal_episodes;
    auto* cal = app.add_subcommand("calibrate", "Pick thresholds from no-change episodes");
    add_common(cal, cal_o);
    cal->add_option("--detector", cal_detectors, "Detectors to calibrate")
        ->check(CLI::IsMember({"dsvdd", "scanb-raw", "hotelling"}))
        ->capture_default_str();
    cal->add_option("--model", cal_models, "Trained model (required for dsvdd)");
    cal->add_option("--episodes", cal_episodes, "Calibration episodes (default: calibration_episodes)");
    cal->add_option("-o,--out", cal_o.out, "Threshold manifest (JSON)")->required();

    std::string run_detector = "dsvdd";
    std::vector<std::string> run_models;
    std::optional<double> run_threshold;
    std::string run_thresholds;
    auto* run = app.add_subcommand("run", "Run one episode and emit the statistic trace");
    add_common(run, run_o);
    run->add_option("--detector", run_detector, "Detector")
        ->check(CLI::IsMember({"dsvdd", "scanb-raw", "hotelling"}))
        ->capture_default_str();
    run->add_option("--model", run_models, "Trained model (required for dsvdd)");
    auto* th = run->add_option("--threshold", run_threshold, "Alarm threshold (default: never alarm)");
    run->add_option("--thresholds", run_thresholds, "Threshold manifest from calibrate")->excludes(th);
    run->add_option("-o,--out", run_o.out, "Trace CSV (default: stdout)");

    SweepOptions sweep;
    auto* mc = app.add_subcommand("montecarlo", "Monte-Carlo sweep over K and noise levels");
    add_common(mc, mc_o, false);
    mc->add_option("--k", sweep.k, "Subcarrier counts (default: k_sweep)")->delimiter(',');
    mc->add_option("--noise-db", sweep.noise_db, "Noise levels in dB (default: noise_sweep)")->delimiter(',');
    mc->add_option("--detector", sweep.detectors, "Detectors")
        ->check(CLI::IsMember({"dsvdd", "scanb-raw", "hotelling"}))
        ->delimiter(',')
        ->capture_default_str();
    mc->add_option("--model", sweep.models, "Trained model(s), matched to K by input width");
    mc->add_option("--thresholds", sweep.thresholds, "Threshold manifest (single K/noise point only)");
    mc->add_option("--episodes", sweep.episodes, "Episodes per point (default 1000)");
    mc->add_option("--calibration-episodes", sweep.calibration_episodes, "Episodes for inline calibration");
    mc->add_option("--workers", sweep.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    mc->add_option("--episodes-jsonl", sweep.episodes_jsonl, "Write one JSON line per episode");
    mc->add_option("-o,--out", mc_o.out, "Results CSV (default: stdout)");

    std::string report_in, report_out;
    auto* report = app.add_subcommand("report", "Summarize a results CSV");
    report->add_option("--in", report_in, "Results CSV from montecarlo")->required()->check(CLI::ExistingFile);
    report->add_option("-o,--out", report_out, "Markdown file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_o, gen_size);
        if (train->parsed()) return cmd_train(train_o, train_data);
        if (cal->parsed()) return cmd_calibrate(cal_o, cal_detectors, cal_models, cal_episodes);
        if (run->parsed()) return cmd_run(run_o, run_detector, run_models, run_threshold, run_thresholds);
        if (mc->parsed()) return cmd_montecarlo(mc_o, sweep);
        if (report->parsed()) return cmd_report(report_in, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
