#include <doctest.h>

#include <cmath>
#include <numeric>

#include "risdet/harness.hpp"
#include "support.hpp"

using namespace risdet;
using risdet::test::small_config;

namespace {

DetectorSpec hotelling_spec(double threshold = std::numeric_limits<double>::infinity()) {
    DetectorSpec s;
    s.kind = DetectorKind::hotelling;
    s.threshold = threshold;
    return s;
}

} // namespace

TEST_CASE("detector names") {
    for (auto k : {DetectorKind::dsvdd, DetectorKind::scanb_raw, DetectorKind::hotelling})
        CHECK(parse_detector_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_detector_kind("cusum"), ConfigError);
}

TEST_CASE("outcome classification") {
    CHECK(classify(160, 150, 500) == Outcome::detected);
    CHECK(classify(150, 150, 500) == Outcome::detected);
    CHECK(classify(149, 150, 500) == Outcome::false_alarm);
    CHECK(classify(std::nullopt, 150, 500) == Outcome::missed);
    CHECK(classify(std::nullopt, 501, 500) == Outcome::clean);
}

TEST_CASE("training set generation") {
    SystemConfig cfg = small_config();
    cfg.frame_len = 5;
    cfg.ref_len = 2;
    cfg.change_time = 3;
    TrainingSetInfo info;
    const auto set = generate_training_set(cfg, 10, 4, &info);
    CHECK(set.size() == 10);
    CHECK(set.dim() == cfg.feature_dim());
    CHECK(info.realizations == 2);
    CHECK(info.ris_phase_draws == 0);
    CHECK(set.samples == generate_training_set(cfg, 10, 4).samples);
    CHECK(set.samples != generate_training_set(cfg, 10, 5).samples);
    CHECK_THROWS_AS(generate_training_set(cfg, 0, 4), ConfigError);
}

TEST_CASE("scenario stream") {
    SystemConfig cfg = small_config();
    SUBCASE("RIS phases start at the change time") {
        ScenarioStream s(cfg, 3, 10);
        for (int m = 1; m < 10; ++m) s.next();
        CHECK(s.ris_phase_draws() == 0);
        s.next();
        CHECK(s.ris_phase_draws() == cfg.ris_elements);
    }
    SUBCASE("pre-change prefix does not depend on the change time") {
        ScenarioStream a(cfg, 8, 20), b(cfg, 8, 1000);
        for (int m = 1; m < 20; ++m) CHECK(a.next() == b.next());
        CHECK(a.next() != b.next());
    }
    SUBCASE("only the designated surface carries an RIS segment") {
        ScenarioStream a(cfg, 8, 5);
        const auto& real = a.realization();
        CHECK(real.surfaces.size() == 2);
        CHECK(real.surfaces[1].ris_count == cfg.ris_elements);
        CHECK(real.surfaces[0].ris_count == 0);
    }
}

TEST_CASE("episodes") {
    const EpisodeProtocol proto{20, 40, 80};
    DetectorSpec spec = hotelling_spec();
    SUBCASE("infinite threshold with a change is a miss") {
        GaussianShiftStream s(4, 3.0, 1, proto.change_time);
        const auto r = run_episode(s, proto, spec);
        CHECK(r.outcome == Outcome::missed);
        CHECK_FALSE(r.first_alarm.has_value());
        CHECK(std::isfinite(r.max_statistic));
    }
    SUBCASE("no change and infinite threshold is clean") {
        EpisodeProtocol p = proto;
        p.change_time = proto.horizon + 1;
        GaussianShiftStream s(4, 3.0, 1, p.change_time);
        CHECK(run_episode(s, p, spec).outcome == Outcome::clean);
    }
    SUBCASE("alarm on the first full window at the change gives delay 0") {
        EpisodeProtocol p{20, 25, 80};
        spec.threshold = -std::numeric_limits<double>::infinity();
        GaussianShiftStream s(4, 3.0, 1, p.change_time);
        const auto r = run_episode(s, p, spec, true);
        CHECK(r.outcome == Outcome::detected);
        CHECK(r.delay == 0);
        CHECK(r.first_alarm == 25);
        REQUIRE(r.trace.size() == 60);
        CHECK_FALSE(r.trace[0].statistic.has_value());
        CHECK(r.trace[4].statistic.has_value());
        CHECK(r.trace.back().alarm);
    }
    SUBCASE("trace does not change the outcome") {
        spec.threshold = 20.0;
        GaussianShiftStream a(4, 3.0, 2, proto.change_time), b(4, 3.0, 2, proto.change_time);
        const auto x = run_episode(a, proto, spec, false);
        const auto y = run_episode(b, proto, spec, true);
        CHECK(x.first_alarm == y.first_alarm);
        CHECK(x.stream_hash == y.stream_hash);
    }
    SUBCASE("dsvdd without a model is rejected") {
        DetectorSpec d;
        d.kind = DetectorKind::dsvdd;
        GaussianShiftStream s(4, 0.0, 1, 1000);
        CHECK_THROWS_AS(run_episode(s, proto, d), ConfigError);
    }
    SUBCASE("reference length must fit the window") {
        EpisodeProtocol p{21, 40, 80};
        GaussianShiftStream s(4, 0.0, 1, 1000);
        CHECK_THROWS_AS(run_episode(s, p, DetectorSpec{DetectorKind::scanb_raw, nullptr, {}, 1.0}), ConfigError);
    }
}

TEST_CASE("nearest-rank quantile") {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    std::reverse(v.begin(), v.end());
    CHECK(nearest_rank_quantile(v, 0.75) == 75.0);
    CHECK(nearest_rank_quantile(v, 0.0) == 1.0);
    CHECK(nearest_rank_quantile(v, 1.0) == 100.0);
    CHECK(nearest_rank_quantile({4.0}, 0.3) == 4.0);
    CHECK_THROWS_AS(nearest_rank_quantile({}, 0.5), ConfigError);
}

TEST_CASE("calibration") {
    const EpisodeProtocol proto{20, 40, 80};
    const auto factory = gaussian_shift_factory(4, 3.0);
    SUBCASE("F = 1 returns the smallest maximum") {
        const auto c = calibrate_threshold(factory, proto, hotelling_spec(), 1.0, 20, 1);
        CHECK(c.threshold == *std::min_element(c.maxima.begin(), c.maxima.end()));
        CHECK_FALSE(c.degenerate);
    }
    SUBCASE("held-out false alarms stay within the binomial bound") {
        const auto c = calibrate_threshold(factory, proto, hotelling_spec(), 0.25, 200, 1);
        EpisodeProtocol no_change = proto;
        no_change.change_time = proto.horizon + 1;
        int alarms = 0;
        for (int i = 0; i < 200; ++i) {
            auto src = factory(derive_seed(999, static_cast<std::uint64_t>(i)), no_change.change_time);
            if (run_episode(*src, no_change, hotelling_spec(c.threshold)).first_alarm) ++alarms;
        }
        CHECK(alarms / 200.0 <= 0.25 + 2 * std::sqrt(0.25 * 0.75 / 200));
    }
    SUBCASE("too few episodes") {
        CHECK_THROWS_AS(calibrate_threshold(factory, proto, hotelling_spec(), 0.25, 19, 1), ConfigError);
    }
}

TEST_CASE("Monte Carlo") {
    const EpisodeProtocol proto{20, 40, 80};
    const auto factory = gaussian_shift_factory(4, 3.0);
    SUBCASE("no episodes leaves rates undefined") {
        const auto r = monte_carlo(factory, proto, {hotelling_spec()}, 0, 1);
        REQUIRE(r.size() == 1);
        CHECK(r[0].empty());
        CHECK(std::isnan(r[0].false_alarm_rate));
        CHECK(std::isnan(r[0].avg_delay));
    }
    SUBCASE("alarm exactly at the change") {
        const EpisodeProtocol p{20, 25, 80};
        const auto r = monte_carlo(factory, p, {hotelling_spec(-std::numeric_limits<double>::infinity())}, 8, 1);
        CHECK(r[0].avg_delay == 0.0);
        CHECK(r[0].false_alarm_rate == 0.0);
        CHECK(r[0].miss_rate == 0.0);
    }
    SUBCASE("detectors share observation streams") {
        std::vector<DetectorSpec> specs{hotelling_spec(30.0), DetectorSpec{DetectorKind::scanb_raw, nullptr, {}, 5.0}};
        const auto r = monte_carlo(factory, proto, specs, 12, 3);
        CHECK(r[0].stream_hashes == r[1].stream_hashes);
        CHECK(r[0].detected + r[0].false_alarms + r[0].misses == 12);
    }
    SUBCASE("worker count does not change results") {
        std::vector<DetectorSpec> specs{hotelling_spec(30.0)};
        const auto a = monte_carlo(factory, proto, specs, 16, 5, 1);
        const auto b = monte_carlo(factory, proto, specs, 16, 5, 4);
        CHECK(a[0].delays == b[0].delays);
        CHECK(a[0].stream_hashes == b[0].stream_hashes);
        CHECK(a[0].false_alarms == b[0].false_alarms);
    }
    SUBCASE("censored delay uses M - mu for misses") {
        std::vector<EpisodeResult> eps(2);
        eps[0].outcome = Outcome::detected;
        eps[0].delay = 10;
        eps[0].change_time = 150;
        eps[0].horizon = 500;
        eps[1].outcome = Outcome::missed;
        eps[1].change_time = 150;
        eps[1].horizon = 500;
        const auto rep = aggregate(DetectorKind::dsvdd, 1.0, eps);
        CHECK(rep.avg_delay == 10.0);
        CHECK(rep.censored_avg_delay == 180.0);
        CHECK(rep.miss_rate == 0.5);
    }
}
