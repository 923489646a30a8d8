#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "risdet/harness.hpp"
#include "risdet/io.hpp"

namespace py = pybind11;
using namespace risdet;

namespace {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RunConfig config_from(const std::string& text) { return parse_config_text(text); }

std::shared_ptr<const DsvddModel> as_model(const std::shared_ptr<DsvddModel>& m) { return m; }

DetectorSpec make_spec(const RunConfig& cfg, const std::string& detector, double threshold,
                       const std::shared_ptr<DsvddModel>& model) {
    DetectorSpec spec;
    spec.kind = parse_detector_kind(detector);
    spec.config = cfg.detector;
    spec.threshold = threshold;
    spec.model = as_model(model);
    return spec;
}

py::dict episode_dict(const EpisodeResult& r) {
    py::dict d;
    d["outcome"] = std::string(to_string(r.outcome));
    d["first_alarm"] = r.first_alarm ? py::object(py::int_(*r.first_alarm)) : py::none();
    d["delay"] = r.outcome == Outcome::detected ? py::object(py::int_(r.delay)) : py::none();
    d["max_statistic"] = r.max_statistic;
    d["stream_hash"] = r.stream_hash;
    py::list trace;
    for (const auto& p : r.trace)
        trace.append(py::make_tuple(p.m, p.statistic ? py::object(py::float_(*p.statistic)) : py::none(), p.alarm));
    d["trace"] = trace;
    return d;
}

py::dict report_dict(const MonteCarloReport& r) {
    py::dict d;
    d["detector"] = std::string(to_string(r.kind));
    d["episodes"] = r.episodes;
    d["detected"] = r.detected;
    d["false_alarms"] = r.false_alarms;
    d["misses"] = r.misses;
    d["avg_delay"] = r.avg_delay;
    d["censored_avg_delay"] = r.censored_avg_delay;
    d["false_alarm_rate"] = r.false_alarm_rate;
    d["miss_rate"] = r.miss_rate;
    d["avg_update_time_us"] = r.avg_update_time_us;
    d["theta"] = r.theta;
    d["stream_hashes"] = r.stream_hashes;
    return d;
}

} // namespace

PYBIND11_MODULE(_risdet, m) {
    m.doc() = "Bindings for the risdet simulation and detection library";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    m.def("default_config", [] { return format_config(RunConfig{}); }, "Default configuration as key = value text.");
    m.def(
        "normalize_config", [](const std::string& text) { return format_config(config_from(text)); },
        py::arg("text"), "Parse, validate and re-emit a configuration.");
    m.def(
        "feature_dim", [](const std::string& text) { return config_from(text).system.feature_dim(); },
        py::arg("config") = "");

    m.def(
        "generate_training_set",
        [](const std::string& text, int size, std::uint64_t seed) {
            const auto set = generate_training_set(config_from(text).system, size, seed);
            return RowMatrixF(set.samples.transpose());
        },
        py::arg("config"), py::arg("size"), py::arg("seed"),
        "Pre-change observations, one row per symbol.");

    m.def(
        "observations",
        [](const std::string& text, std::uint64_t seed, int count, std::optional<int> change_time) {
            const auto cfg = config_from(text).system;
            ScenarioStream s(cfg, seed, change_time.value_or(cfg.change_time));
            Eigen::MatrixXd out(count, cfg.feature_dim());
            for (int i = 0; i < count; ++i) out.row(i) = s.next().transpose();
            return out;
        },
        py::arg("config"), py::arg("seed"), py::arg("count"), py::arg("change_time") = py::none(),
        "Observation stream of one episode, one row per symbol.");

    py::class_<DsvddModel, std::shared_ptr<DsvddModel>>(m, "Model")
        .def_static(
            "train",
            [](const RowMatrixF& data, const std::string& text, std::uint64_t seed) {
                TrainingSet set;
                set.samples = data.transpose();
                Rng rng(seed);
                return std::make_shared<DsvddModel>(train_dsvdd(set, config_from(text).train, rng).model);
            },
            py::arg("data"), py::arg("config") = "", py::arg("seed") = 1)
        .def_static(
            "load",
            [](const std::filesystem::path& path, const std::string& text) {
                return std::make_shared<DsvddModel>(load_model(path, std::nullopt, config_from(text).train));
            },
            py::arg("path"), py::arg("config") = "")
        .def("save", [](const DsvddModel& self, const std::filesystem::path& path) { save_model(path, self); })
        .def(
            "scores",
            [](const DsvddModel& self, const RowMatrixF& batch) {
                return Eigen::VectorXf(self.anomaly_scores(batch.transpose()));
            },
            py::arg("batch"))
        .def_property_readonly("radius", [](const DsvddModel& self) { return self.core.radius; })
        .def_property_readonly("input_dim", &DsvddModel::input_dim)
        .def_property_readonly("latent_dim", &DsvddModel::latent_dim);

    m.def(
        "run_episode",
        [](const std::string& text, const std::string& detector, std::uint64_t seed, double threshold,
           const std::shared_ptr<DsvddModel>& model) {
            const auto cfg = config_from(text);
            py::gil_scoped_release release;
            const auto r = run_episode(cfg.system, make_spec(cfg, detector, threshold, model), seed, true);
            py::gil_scoped_acquire acquire;
            return episode_dict(r);
        },
        py::arg("config"), py::arg("detector"), py::arg("seed"),
        py::arg("threshold") = std::numeric_limits<double>::infinity(), py::arg("model") = nullptr);

    m.def(
        "calibrate",
        [](const std::string& text, const std::string& detector, int episodes, std::uint64_t seed,
           const std::shared_ptr<DsvddModel>& model) {
            const auto cfg = config_from(text);
            py::gil_scoped_release release;
            return calibrate_threshold(scenario_factory(cfg.system), EpisodeProtocol::from(cfg.system),
                                       make_spec(cfg, detector, 0.0, model), cfg.detector.false_alarm_target,
                                       episodes, seed)
                .threshold;
        },
        py::arg("config"), py::arg("detector"), py::arg("episodes"), py::arg("seed"), py::arg("model") = nullptr);

    m.def(
        "monte_carlo",
        [](const std::string& text, const std::vector<std::string>& detectors, const std::vector<double>& thresholds,
           int episodes, std::uint64_t seed, int workers, const std::shared_ptr<DsvddModel>& model) {
            if (detectors.size() != thresholds.size())
                throw ConfigError("monte_carlo: one threshold per detector is required");
            const auto cfg = config_from(text);
            std::vector<DetectorSpec> specs;
            for (std::size_t i = 0; i < detectors.size(); ++i)
                specs.push_back(make_spec(cfg, detectors[i], thresholds[i], model));
            std::vector<MonteCarloReport> reports;
            {
                py::gil_scoped_release release;
                reports = monte_carlo(scenario_factory(cfg.system), EpisodeProtocol::from(cfg.system), specs,
                                      episodes, seed, workers);
            }
            py::list out;
            for (const auto& r : reports) out.append(report_dict(r));
            return out;
        },
        py::arg("config"), py::arg("detectors"), py::arg("thresholds"), py::arg("episodes"), py::arg("seed"),
        py::arg("workers") = 1, py::arg("model") = nullptr);
}
