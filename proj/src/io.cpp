#include "risdet/io.hpp"

#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace risdet {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError(std::string(key) + ": cannot parse '" + std::string(value) + "' as " + std::string(expected));
}

long long to_integer(std::string_view key, std::string_view v) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, "integer");
    return out;
}

int to_int(std::string_view key, std::string_view v) {
    const long long x = to_integer(key, v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) bad_value(key, v, "int");
    return static_cast<int>(x);
}

double to_double(std::string_view key, std::string_view v) {
    // std::from_chars for double is missing on older toolchains; strtod on a copy.
    const std::string s(v);
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) bad_value(key, v, "number");
    return x;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v, "boolean");
}

KernelKind to_kernel(std::string_view key, std::string_view v) {
    if (v == "linear") return KernelKind::linear;
    if (v == "rbf") return KernelKind::rbf;
    bad_value(key, v, "kernel (linear|rbf)");
}

std::string kernel_name(KernelKind k) { return k == KernelKind::linear ? "linear" : "rbf"; }

std::string fmt_double(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += f(v[i]);
    }
    return out;
}

struct KeyHandler {
    std::string name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define RISDET_INT(name, field)                                                                     \
    KeyHandler {                                                                                    \
        name, [](RunConfig& c, std::string_view v) { c.field = to_int(name, v); },                \
            [](const RunConfig& c) { return std::to_string(c.field); }                              \
    }
#define RISDET_DOUBLE(name, field)                                                                  \
    KeyHandler {                                                                                    \
        name, [](RunConfig& c, std::string_view v) { c.field = to_double(name, v); },             \
            [](const RunConfig& c) { return fmt_double(c.field); }                                  \
    }

const std::vector<KeyHandler>& key_handlers() {
    static const std::vector<KeyHandler> handlers = {
        RISDET_INT("n_ue", system.n_ue),
        RISDET_INT("bs_rows", system.bs_rows),
        RISDET_INT("bs_cols", system.bs_cols),
        RISDET_INT("n_subcarriers", system.n_subcarriers),
        RISDET_INT("cyclic_prefix", system.cyclic_prefix),
        RISDET_DOUBLE("sample_period", system.sample_period),
        RISDET_DOUBLE("carrier_freq", system.carrier_freq),
        RISDET_INT("paths_direct", system.paths_direct),
        RISDET_INT("paths_bs_r", system.paths_bs_r),
        RISDET_INT("paths_r_ue", system.paths_r_ue),
        RISDET_DOUBLE("noise_var_db", system.noise_var_db),
        RISDET_DOUBLE("rolloff", system.rolloff),
        RISDET_DOUBLE("d_bs_ue", system.d_bs_ue),
        RISDET_DOUBLE("d_bs_r", system.d_bs_r),
        RISDET_DOUBLE("d_r_ue", system.d_r_ue),
        RISDET_INT("frame_len", system.frame_len),
        RISDET_INT("change_time", system.change_time),
        RISDET_INT("ref_len", system.ref_len),
        KeyHandler{"rng_seed",
                   [](RunConfig& c, std::string_view v) {
                       const long long x = to_integer("rng_seed", v);
                       if (x < 0) bad_value("rng_seed", v, "non-negative integer");
                       c.system.rng_seed = static_cast<std::uint64_t>(x);
                   },
                   [](const RunConfig& c) { return std::to_string(c.system.rng_seed); }},
        RISDET_INT("n_reflectors", system.n_reflectors),
        RISDET_INT("surface_rows", system.surface_rows),
        RISDET_INT("surface_cols", system.surface_cols),
        RISDET_INT("ris_reflector", system.ris_reflector),
        RISDET_INT("ris_elements", system.ris_elements),
        RISDET_DOUBLE("reflection_coeff_min", system.reflection_coeff_min),
        RISDET_DOUBLE("reflection_coeff_max", system.reflection_coeff_max),
        RISDET_INT("window", detector.window),
        KeyHandler{"kernel", [](RunConfig& c, std::string_view v) { c.detector.kernel = to_kernel("kernel", v); },
                   [](const RunConfig& c) { return kernel_name(c.detector.kernel); }},
        KeyHandler{"raw_kernel",
                   [](RunConfig& c, std::string_view v) { c.detector.raw_kernel = to_kernel("raw_kernel", v); },
                   [](const RunConfig& c) { return kernel_name(c.detector.raw_kernel); }},
        RISDET_DOUBLE("rbf_bandwidth", detector.rbf_bandwidth),
        RISDET_DOUBLE("hotelling_shrinkage", detector.hotelling_shrinkage),
        RISDET_DOUBLE("false_alarm_target", detector.false_alarm_target),
        RISDET_INT("calibration_episodes", detector.calibration_episodes),
        RISDET_DOUBLE("lambda1", train.lambda1),
        RISDET_DOUBLE("lambda2", train.lambda2),
        RISDET_DOUBLE("learning_rate", train.learning_rate),
        RISDET_INT("batch_size", train.batch_size),
        RISDET_INT("epochs", train.epochs),
        RISDET_DOUBLE("leaky_slope", train.leaky_slope),
        KeyHandler{"hidden_widths",
                   [](RunConfig& c, std::string_view v) {
                       c.train.hidden_widths.clear();
                       if (trim(v).empty()) return;
                       for (auto part : split(v, ',')) c.train.hidden_widths.push_back(to_int("hidden_widths", part));
                   },
                   [](const RunConfig& c) {
                       return join(c.train.hidden_widths, [](int x) { return std::to_string(x); });
                   }},
        RISDET_INT("latent_dim", train.latent_dim),
        KeyHandler{"activate_last",
                   [](RunConfig& c, std::string_view v) { c.train.activate_last = to_bool("activate_last", v); },
                   [](const RunConfig& c) { return std::string(c.train.activate_last ? "true" : "false"); }},
        RISDET_INT("train_size", train.train_size),
        RISDET_DOUBLE("init_radius_quantile", train.init_radius_quantile),
        KeyHandler{"k_sweep",
                   [](RunConfig& c, std::string_view v) {
                       c.sweep.subcarriers.clear();
                       for (auto part : split(v, ',')) c.sweep.subcarriers.push_back(to_int("k_sweep", part));
                   },
                   [](const RunConfig& c) {
                       return join(c.sweep.subcarriers, [](int x) { return std::to_string(x); });
                   }},
        KeyHandler{"noise_sweep",
                   [](RunConfig& c, std::string_view v) {
                       c.sweep.noise_db.clear();
                       for (auto part : split(v, ',')) c.sweep.noise_db.push_back(to_double("noise_sweep", part));
                   },
                   [](const RunConfig& c) { return join(c.sweep.noise_db, fmt_double); }},
    };
    return handlers;
}

#undef RISDET_INT
#undef RISDET_DOUBLE

// Little-endian primitives.
template <typename T>
void put(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw FormatError("truncated file while reading " + what);
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

void put_floats(std::ostream& os, const float* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
    } else {
        for (std::size_t i = 0; i < n; ++i) put(os, data[i]);
    }
}

void get_floats(std::istream& is, float* data, std::size_t n, const std::string& what) {
    if constexpr (std::endian::native == std::endian::little) {
        if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(float))))
            throw FormatError("truncated file while reading " + what);
    } else {
        for (std::size_t i = 0; i < n; ++i) data[i] = get<float>(is, what);
    }
}

void expect_magic(std::istream& is, std::string_view magic) {
    std::string got(magic.size(), '\0');
    if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic)
        throw FormatError("bad magic: expected '" + std::string(magic) + "'");
}

void expect_eof(std::istream& is) {
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("unexpected trailing bytes");
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    return is;
}

} // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& h : key_handlers()) out.push_back(h.name);
    return out;
}

void apply_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& h : key_handlers()) {
        if (h.name == key) {
            h.set(cfg, trim(value));
            return;
        }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config_text(std::string_view text) {
    RunConfig cfg;
    int line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing key");
        apply_config_value(cfg, key, line.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

std::string format_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& h : key_handlers()) out += h.name + " = " + h.get(cfg) + "\n";
    return out;
}

void save_dataset(const std::filesystem::path& path, const TrainingSet& set) {
    auto os = open_out(path);
    os.write("RISDS1", 6);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(set.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(set.dim()));
    // Column-major dim x count storage is count x dim row-major.
    put_floats(os, set.samples.data(), static_cast<std::size_t>(set.samples.size()));
    if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

TrainingSet load_dataset(const std::filesystem::path& path, std::optional<int> expected_dim) {
    auto is = open_in(path);
    expect_magic(is, "RISDS1");
    const auto count = get<std::uint32_t>(is, "count");
    const auto dim = get<std::uint32_t>(is, "dim");
    if (dim == 0) throw FormatError("dataset dim must be positive");
    if (expected_dim && static_cast<int>(dim) != *expected_dim)
        throw ValidationError("dataset dim " + std::to_string(dim) + " does not match expected " +
                              std::to_string(*expected_dim));
    TrainingSet set;
    set.samples.resize(dim, count);
    get_floats(is, set.samples.data(), static_cast<std::size_t>(dim) * count, "dataset payload");
    expect_eof(is);
    return set;
}

void save_model(const std::filesystem::path& path, const DsvddModel& model) {
    model.validate();
    auto os = open_out(path);
    os.write("DSVDD1", 6);
    const auto& w = model.core.net.weights;
    put<std::uint32_t>(os, static_cast<std::uint32_t>(w.size()));
    for (const auto& m : w) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
    }
    for (const auto& m : w) {
        const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
        put_floats(os, rm.data(), static_cast<std::size_t>(rm.size()));
    }
    put_floats(os, model.core.center.data(), static_cast<std::size_t>(model.core.center.size()));
    put<float>(os, model.core.radius);
    put_floats(os, model.input_mean.data(), static_cast<std::size_t>(model.input_mean.size()));
    put_floats(os, model.input_scale.data(), static_cast<std::size_t>(model.input_scale.size()));
    if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

DsvddModel load_model(const std::filesystem::path& path, std::optional<int> expected_input_dim,
                      const TrainConfig& hyper) {
    auto is = open_in(path);
    expect_magic(is, "DSVDD1");
    const auto n_layers = get<std::uint32_t>(is, "layer count");
    if (n_layers == 0 || n_layers > 1024) throw FormatError("implausible layer count " + std::to_string(n_layers));
    std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const auto rows = get<std::uint32_t>(is, "layer rows");
        const auto cols = get<std::uint32_t>(is, "layer cols");
        if (rows == 0 || cols == 0) throw FormatError("zero-sized layer " + std::to_string(l));
        shapes.emplace_back(rows, cols);
    }
    for (std::size_t l = 1; l < shapes.size(); ++l)
        if (shapes[l].second != shapes[l - 1].first)
            throw ValidationError("layer " + std::to_string(l) + " expects " + std::to_string(shapes[l].second) +
                                  " inputs but layer " + std::to_string(l - 1) + " emits " +
                                  std::to_string(shapes[l - 1].first));
    const int input_dim = static_cast<int>(shapes.front().second);
    if (expected_input_dim && input_dim != *expected_input_dim)
        throw ValidationError("model input width " + std::to_string(input_dim) + " does not match expected " +
                              std::to_string(*expected_input_dim));

    DsvddModel model;
    model.hyper = hyper;
    model.hyper.latent_dim = static_cast<int>(shapes.back().first);
    model.hyper.hidden_widths.clear();
    for (std::size_t l = 0; l + 1 < shapes.size(); ++l) model.hyper.hidden_widths.push_back(static_cast<int>(shapes[l].first));
    model.core.net.leaky_slope = static_cast<float>(hyper.leaky_slope);
    model.core.net.activate_last = hyper.activate_last;
    for (const auto& [rows, cols] : shapes) {
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
        get_floats(is, rm.data(), static_cast<std::size_t>(rm.size()), "layer weights");
        model.core.net.weights.emplace_back(rm);
    }
    model.core.center.resize(shapes.back().first);
    get_floats(is, model.core.center.data(), static_cast<std::size_t>(model.core.center.size()), "center");
    model.core.radius = get<float>(is, "radius");
    model.input_mean.resize(input_dim);
    model.input_scale.resize(input_dim);
    get_floats(is, model.input_mean.data(), static_cast<std::size_t>(input_dim), "input mean");
    get_floats(is, model.input_scale.data(), static_cast<std::size_t>(input_dim), "input scale");
    expect_eof(is);
    try {
        model.validate();
    } catch (const ContractError& e) {
        throw ValidationError(e.what());
    }
    return model;
}

std::string format_trace_csv(const std::vector<TracePoint>& trace) {
    std::string out = "m,statistic,alarm\n";
    for (const auto& p : trace) {
        out += std::to_string(p.m) + ",";
        if (p.statistic) out += fmt_double(*p.statistic);
        out += p.alarm ? ",1\n" : ",0\n";
    }
    return out;
}

std::string results_csv_header() {
    return "detector,K,noise_db,episodes,avg_delay,censored_avg_delay,false_alarm_rate,miss_rate,"
           "avg_update_time_us,theta\n";
}

std::string format_result_row(const ResultRow& row) {
    const auto& r = row.report;
    std::ostringstream os;
    os << row.detector << ',' << row.subcarriers << ',' << fmt_double(row.noise_db) << ',' << r.episodes << ','
       << fmt_double(r.avg_delay) << ',' << fmt_double(r.censored_avg_delay) << ','
       << fmt_double(r.false_alarm_rate) << ',' << fmt_double(r.miss_rate) << ','
       << fmt_double(r.avg_update_time_us) << ',' << fmt_double(r.theta) << '\n';
    return os.str();
}

std::vector<ResultRecord> parse_results_csv(std::string_view text) {
    std::vector<ResultRecord> out;
    bool header = true;
    int line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.substr(0, 8) != "detector") throw FormatError("results CSV: missing header");
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 10) throw FormatError("results CSV line " + std::to_string(line_no) + ": expected 10 fields");
        auto num = [&](std::string_view v) {
            if (v == "nan" || v == "-nan") return std::numeric_limits<double>::quiet_NaN();
            if (v == "inf") return std::numeric_limits<double>::infinity();
            return to_double("results", v);
        };
        ResultRecord r;
        r.detector = std::string(f[0]);
        r.subcarriers = to_int("K", f[1]);
        r.noise_db = num(f[2]);
        r.episodes = to_int("episodes", f[3]);
        r.avg_delay = num(f[4]);
        r.censored_avg_delay = num(f[5]);
        r.false_alarm_rate = num(f[6]);
        r.miss_rate = num(f[7]);
        r.avg_update_time_us = num(f[8]);
        r.theta = num(f[9]);
        out.push_back(std::move(r));
    }
    return out;
}

std::string manifest_to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["tool"] = "risdet";
    j["version"] = "0.1.0";
    j["command"] = m.command;
    j["seed"] = m.seed;
    j["config"] = m.config_snapshot;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    nlohmann::ordered_json th = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.thresholds) th[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(fmt_double(v));
    j["thresholds"] = th;
    j["started"] = m.started;
    j["finished"] = m.finished;
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    RunManifest m;
    m.command = j.value("command", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.config_snapshot = j.value("config", "");
    if (j.contains("inputs")) m.inputs = j["inputs"].get<std::map<std::string, std::string>>();
    if (j.contains("outputs")) m.outputs = j["outputs"].get<std::map<std::string, std::string>>();
    if (j.contains("thresholds")) {
        for (const auto& [k, v] : j["thresholds"].items())
            m.thresholds[k] = v.is_number() ? v.get<double>() : to_double(k, v.get<std::string>());
    }
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    return m;
}

std::filesystem::path write_manifest(const std::filesystem::path& artifact, const RunManifest& m) {
    std::filesystem::path p = artifact;
    p += ".manifest.json";
    write_text_file(p, manifest_to_json(m));
    return p;
}

RunManifest read_manifest(const std::filesystem::path& path) { return manifest_from_json(read_text_file(path)); }

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    auto os = open_out(path);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace risdet
