#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "risdet/config.hpp"
#include "risdet/dsvdd.hpp"
#include "risdet/features.hpp"
#include "risdet/harness.hpp"

namespace risdet {

/// Malformed binary file: bad magic, truncated payload, trailing bytes.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed file whose contents disagree with the expected shapes.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Config files are plain text, one `key = value` per line, `#` starts a comment.
// Lists are comma separated. Every key is optional; unknown keys are rejected.

RunConfig parse_config_text(std::string_view text);
RunConfig parse_config(const std::filesystem::path& path);

/// Serializes every key, so parse_config_text(format_config(c)) reproduces c.
std::string format_config(const RunConfig& cfg);

/// Sets one key on `cfg`; used by the parser and by CLI overrides.
void apply_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

std::vector<std::string> config_keys();

// Training set file: "RISDS1", u32 count, u32 dim, then count*dim f32 row-major (LE).
void save_dataset(const std::filesystem::path& path, const TrainingSet& set);
TrainingSet load_dataset(const std::filesystem::path& path, std::optional<int> expected_dim = std::nullopt);

// Model file: "DSVDD1", u32 layer count, per layer u32 rows, u32 cols, then per layer
// rows*cols f32 row-major, then center, radius, input mean, input scale (LE).
void save_model(const std::filesystem::path& path, const DsvddModel& model);
DsvddModel load_model(const std::filesystem::path& path, std::optional<int> expected_input_dim = std::nullopt,
                      const TrainConfig& hyper = {});

/// CSV with header m,statistic,alarm; statistic is blank before the window fills.
std::string format_trace_csv(const std::vector<TracePoint>& trace);

struct ResultRow {
    std::string detector;
    int subcarriers = 0;
    double noise_db = 0.0;
    MonteCarloReport report;
};

std::string results_csv_header();
std::string format_result_row(const ResultRow& row);

/// Parsed results CSV row (for `report`).
struct ResultRecord {
    std::string detector;
    int subcarriers = 0;
    double noise_db = 0.0;
    int episodes = 0;
    double avg_delay = 0.0;
    double censored_avg_delay = 0.0;
    double false_alarm_rate = 0.0;
    double miss_rate = 0.0;
    double avg_update_time_us = 0.0;
    double theta = 0.0;
};

std::vector<ResultRecord> parse_results_csv(std::string_view text);

struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    std::string config_snapshot;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    std::map<std::string, double> thresholds;
    std::string started;
    std::string finished;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(std::string_view text);

/// Writes `<artifact>.manifest.json` next to the artifact and returns its path.
std::filesystem::path write_manifest(const std::filesystem::path& artifact, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Current UTC time in ISO-8601.
std::string utc_timestamp();

} // namespace risdet
