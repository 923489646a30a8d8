#include <doctest.h>

#include <cmath>
#include <numbers>

#include "risdet/channel.hpp"
#include "support.hpp"

using namespace risdet;
using risdet::test::small_config;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("steering vectors") {
    SUBCASE("ULA broadside is all ones") {
        const CVector a = steering_vector(Ula{4}, 0.0);
        CHECK(a.size() == 4);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(a[i] - cplx(1.0, 0.0)) < 1e-15);
    }
    SUBCASE("URA broadside is all ones") {
        const CVector a = steering_vector(Ura{2, 2}, 0.0, 0.0);
        CHECK(a.size() == 4);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(a[i] - cplx(1.0, 0.0)) < 1e-15);
    }
    SUBCASE("ULA at 30 degrees advances by -pi/2 per element") {
        const CVector a = steering_vector(Ula{8}, pi / 6);
        for (int n = 0; n < 8; ++n) CHECK(std::abs(a[n] - std::polar(1.0, -pi * n / 2.0)) < 1e-12);
    }
    SUBCASE("URA indexing is row-major over (row, col)") {
        const double el = 0.7, az = 1.1;
        const CVector a = steering_vector(Ura{3, 5}, el, az);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 5; ++c) {
                const double ph = -pi * std::sin(el) * (r * std::cos(az) + c * std::sin(az));
                CHECK(std::abs(a[r * 5 + c] - std::polar(1.0, ph)) < 1e-12);
            }
    }
    SUBCASE("entries are unit modulus") {
        Rng rng(3);
        for (int t = 0; t < 20; ++t) {
            const CVector a = steering_vector(Ura{4, 5}, rng.uniform(0, 2 * pi), rng.uniform(0, 2 * pi));
            CHECK((a.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
        }
    }
    SUBCASE("non-positive counts are rejected") {
        CHECK_THROWS_AS(steering_vector(Ula{0}, 0.0), ConfigError);
        CHECK_THROWS_AS(steering_vector(Ura{2, 0}, 0.0), ConfigError);
    }
}

TEST_CASE("raised-cosine pulse") {
    const double ts = 1e-8;
    CHECK(pulse(0.0, ts, 0.0) == doctest::Approx(1.0));
    CHECK(pulse(0.0, ts, 0.5) == doctest::Approx(1.0));
    for (int k : {-3, -1, 1, 2, 5}) CHECK(std::abs(pulse(k * ts, ts, 0.0)) < 1e-15);
    // Singularity at t = Ts/(2 beta): limit pi/4 sinc(1/(2 beta)).
    CHECK(std::abs(pulse(ts / (2 * 0.5), ts, 0.5)) < 1e-15);
    const double beta = 0.25;
    const double limit = pi / 4.0 * std::sin(pi * 2.0) / (pi * 2.0);
    CHECK(pulse(ts / (2 * beta), ts, beta) == doctest::Approx(limit).epsilon(1e-12));
    // Continuity across the singular point.
    const double t0 = ts / (2 * 0.3);
    CHECK(pulse(t0, ts, 0.3) == doctest::Approx(pulse(t0 * (1 + 1e-7), ts, 0.3)).epsilon(1e-5));
    CHECK(pulse(1.3 * ts, ts, 0.4) == doctest::Approx(pulse(-1.3 * ts, ts, 0.4)));
}

TEST_CASE("free-space path loss") {
    const double lambda = 299792458.0 / 3.5e9;
    CHECK(free_space_path_loss(10.0, lambda) == doctest::Approx(std::pow(lambda / (40.0 * pi), 2)));
    CHECK(free_space_path_loss(3.0, lambda) / free_space_path_loss(6.0, lambda) == doctest::Approx(4.0));
}

TEST_CASE("path parameter draws") {
    SystemConfig cfg = small_config();
    SUBCASE("direct: count, ranges, determinism") {
        Rng a(9), b(9);
        const auto p = draw_direct_params(cfg, a);
        const auto q = draw_direct_params(cfg, b);
        REQUIRE(p.paths.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(p.paths[i].delay >= 0.0);
            CHECK(p.paths[i].delay <= cfg.cyclic_prefix * cfg.sample_period);
            CHECK(p.paths[i].bs_elevation >= 0.0);
            CHECK(p.paths[i].bs_elevation <= 2 * pi);
            CHECK(p.paths[i].gain == q.paths[i].gain);
            CHECK(p.paths[i].delay == q.paths[i].delay);
        }
        CHECK(p.path_loss == doctest::Approx(free_space_path_loss(cfg.d_bs_ue, cfg.wavelength())));
    }
    SUBCASE("gains are CN(0,1)") {
        Rng rng(1);
        double s = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) s += std::norm(rng.complex_normal());
        CHECK(std::abs(s / n - 1.0) < 0.02);
    }
    SUBCASE("cascaded: single path counts and delay budget") {
        cfg.paths_bs_r = 1;
        cfg.paths_r_ue = 1;
        Rng rng(4);
        const auto r = draw_cascaded_params(cfg, make_surfaces(cfg)[0], rng);
        CHECK(r.bs_side.size() == 1);
        CHECK(r.ue_side.size() == 1);
    }
    SUBCASE("cascaded: sum of delays stays within D Ts") {
        Rng rng(5);
        for (int t = 0; t < 200; ++t) {
            const auto r = draw_cascaded_params(cfg, make_surfaces(cfg)[0], rng);
            double worst = 0.0;
            for (const auto& q : r.bs_side)
                for (const auto& n : r.ue_side) worst = std::max(worst, q.delay + n.delay);
            CHECK(worst <= cfg.cyclic_prefix * cfg.sample_period);
        }
    }
    SUBCASE("cascaded: reproducible") {
        Rng a(77), b(77);
        const auto x = draw_cascaded_params(cfg, make_surfaces(cfg)[1], a);
        const auto y = draw_cascaded_params(cfg, make_surfaces(cfg)[1], b);
        for (std::size_t i = 0; i < x.bs_side.size(); ++i) CHECK(x.bs_side[i].gain == y.bs_side[i].gain);
        for (std::size_t i = 0; i < x.ue_side.size(); ++i) CHECK(x.ue_side[i].delay == y.ue_side[i].delay);
    }
}

TEST_CASE("RIS phases") {
    Rng rng(12);
    CHECK(draw_ris_phases(0, rng).empty());
    CHECK_THROWS_AS(draw_ris_phases(-1, rng), ConfigError);
    long zeros = 0;
    const int n = 100000;
    const auto ph = draw_ris_phases(n, rng);
    for (double p : ph) {
        const cplx g = std::polar(1.0, p);
        CHECK((std::abs(g - cplx(1, 0)) < 1e-12 || std::abs(g - cplx(-1, 0)) < 1e-12));
        if (p == 0.0) ++zeros;
    }
    CHECK(std::abs(static_cast<double>(zeros) / n - 0.5) < 0.01);
}

TEST_CASE("surface matrices") {
    SurfaceSpec spec;
    spec.rows = 2;
    spec.cols = 3;
    spec.host_coeff = 0.7;
    SUBCASE("fully static surface is delta times ones") {
        const auto s = surface_matrix(spec);
        CHECK_FALSE(s.ris_active);
        for (int i = 0; i < 6; ++i) CHECK(s.diagonal[i] == cplx(0.7, 0.0));
    }
    spec.ris_count = 4;
    SUBCASE("phases 0 and pi give +1 and -1 on the RIS segment") {
        const std::vector<double> zero(4, 0.0), half(4, pi);
        const auto a = surface_matrix(spec, std::span<const double>(zero));
        const auto b = surface_matrix(spec, std::span<const double>(half));
        CHECK(a.ris_active);
        for (int i = 0; i < 4; ++i) {
            CHECK(std::abs(a.diagonal[i] - cplx(1, 0)) < 1e-15);
            CHECK(std::abs(b.diagonal[i] - cplx(-1, 0)) < 1e-15);
        }
        for (int i = 4; i < 6; ++i) CHECK(a.diagonal[i] == cplx(0.7, 0.0));
    }
    SUBCASE("inactive RIS segment behaves as host material") {
        const auto s = surface_matrix(spec);
        CHECK_FALSE(s.ris_active);
        for (int i = 0; i < 6; ++i) CHECK(s.diagonal[i] == cplx(0.7, 0.0));
    }
    SUBCASE("explicit gamma fills the static tail") {
        spec.static_coeffs = {cplx(0.1, 0.2), cplx(-0.3, 0.0)};
        const auto s = surface_matrix(spec);
        CHECK(s.diagonal[4] == cplx(0.1, 0.2));
        CHECK(s.diagonal[5] == cplx(-0.3, 0.0));
    }
    SUBCASE("length mismatches are rejected") {
        const std::vector<double> three(3, 0.0);
        CHECK_THROWS_AS(surface_matrix(spec, std::span<const double>(three)), ConfigError);
        spec.static_coeffs = {cplx(0.1, 0.0)};
        CHECK_THROWS_AS(surface_matrix(spec), ConfigError);
    }
}

TEST_CASE("direct delay channel") {
    SystemConfig cfg = small_config();
    SUBCASE("single broadside-free path collapses to a rank-1 outer product") {
        DirectPaths p;
        p.path_loss = 1.0;
        p.paths.push_back({cplx(1, 0), 0.4, 1.2, -0.3, 0.0});
        const CMatrix h = direct_delay_channel(p, cfg, 0);
        const CMatrix expect = steering_vector(Ura{2, 2}, 0.4, 1.2) * steering_vector(Ula{2}, -0.3).adjoint();
        CHECK(test::rel_fro(h, expect) < 1e-14);
        CHECK((h.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
    }
    SUBCASE("zero gains give a zero matrix") {
        Rng rng(2);
        auto p = draw_direct_params(cfg, rng);
        for (auto& path : p.paths) path.gain = 0.0;
        for (int d = 0; d < cfg.cyclic_prefix; ++d) CHECK(direct_delay_channel(p, cfg, d).norm() == 0.0);
    }
    SUBCASE("linear over paths") {
        Rng rng(8);
        cfg.paths_direct = 2;
        const auto both = draw_direct_params(cfg, rng);
        DirectPaths first{{both.paths[0]}, both.path_loss / 2.0};
        DirectPaths second{{both.paths[1]}, both.path_loss / 2.0};
        for (int d = 0; d < cfg.cyclic_prefix; ++d) {
            const CMatrix sum = direct_delay_channel(first, cfg, d) + direct_delay_channel(second, cfg, d);
            CHECK(test::rel_fro(direct_delay_channel(both, cfg, d), sum) < 1e-13);
        }
    }
    SUBCASE("tap outside [0, D) is a contract violation") {
        Rng rng(2);
        const auto p = draw_direct_params(cfg, rng);
        CHECK_THROWS_AS(direct_delay_channel(p, cfg, cfg.cyclic_prefix), ContractError);
    }
}

TEST_CASE("cascaded delay channel") {
    SystemConfig cfg = small_config();
    Rng rng(31);
    const auto surfaces = make_surfaces(cfg);
    std::vector<ReflectorPaths> refl;
    std::vector<SurfaceState> states;
    for (const auto& s : surfaces) {
        refl.push_back(draw_cascaded_params(cfg, s, rng));
        states.push_back(surface_matrix(s));
    }
    SUBCASE("opaque surfaces contribute nothing") {
        auto opaque = states;
        for (auto& s : opaque) s.diagonal.setZero();
        CHECK(cascaded_delay_channel(refl, opaque, cfg, 3).norm() == 0.0);
    }
    SUBCASE("additive over reflectors") {
        for (int d = 0; d < cfg.cyclic_prefix; ++d) {
            const CMatrix all = cascaded_delay_channel(refl, states, cfg, d);
            const CMatrix r0 = cascaded_delay_channel(std::span(refl).subspan(0, 1), std::span(states).subspan(0, 1), cfg, d);
            const CMatrix r1 = cascaded_delay_channel(std::span(refl).subspan(1, 1), std::span(states).subspan(1, 1), cfg, d);
            CHECK(test::rel_fro(all, r0 + r1) < 1e-13);
        }
    }
    SUBCASE("state count must match reflector count") {
        CHECK_THROWS_AS(cascaded_delay_channel(refl, std::span(states).subspan(0, 1), cfg, 0), ContractError);
    }
}

TEST_CASE("single-path collapse") {
    SystemConfig cfg = small_config();
    cfg.paths_bs_r = 1;
    cfg.paths_r_ue = 1;
    SUBCASE("opaque surface gives a zero-weight extra path") {
        Rng rng(1);
        const auto direct = draw_direct_params(cfg, rng);
        std::vector<ReflectorPaths> refl{draw_cascaded_params(cfg, make_surfaces(cfg)[0], rng)};
        SurfaceState st{CVector::Zero(16), false};
        const auto aug = collapse_single_path(direct, refl, std::span(&st, 1));
        CHECK(aug.extra.size() == 1);
        CHECK(std::abs(aug.extra[0].weight) == 0.0);
    }
    SUBCASE("broadside identity surface scales the gain by N_s") {
        ReflectorPaths r;
        r.surface_rows = 4;
        r.surface_cols = 4;
        r.bs_side.push_back({cplx(1, 0), 0.2, 0.1, 0.0, 0.0, 0.0});
        r.ue_side.push_back({cplx(1, 0), 0.0, 0.0, 0.3, 0.0});
        SurfaceState st{CVector::Ones(16), false};
        const auto aug = collapse_single_path(DirectPaths{}, std::span(&r, 1), std::span(&st, 1));
        CHECK(std::abs(aug.extra[0].weight - cplx(16.0, 0.0)) < 1e-12);
    }
    SUBCASE("multi-path or active reflectors are rejected") {
        Rng rng(1);
        const auto direct = draw_direct_params(cfg, rng);
        auto multi = cfg;
        multi.paths_bs_r = 2;
        std::vector<ReflectorPaths> refl{draw_cascaded_params(multi, make_surfaces(cfg)[0], rng)};
        SurfaceState st = surface_matrix(make_surfaces(cfg)[0]);
        CHECK_THROWS_AS(collapse_single_path(direct, refl, std::span(&st, 1)), ContractError);
        refl[0] = draw_cascaded_params(cfg, make_surfaces(cfg)[1], rng);
        const std::vector<double> ph(16, pi);
        SurfaceState active = surface_matrix(make_surfaces(cfg)[1], std::span<const double>(ph));
        CHECK_THROWS_AS(collapse_single_path(direct, refl, std::span(&active, 1)), ContractError);
    }
    SUBCASE("augmented direct paths reproduce direct plus cascaded") {
        Rng rng(2024);
        for (int t = 0; t < 20; ++t) {
            const auto direct = draw_direct_params(cfg, rng);
            std::vector<ReflectorPaths> refl;
            std::vector<SurfaceState> states;
            for (auto s : make_surfaces(cfg)) {
                s.host_coeff = rng.uniform(0.5, 1.0);
                refl.push_back(draw_cascaded_params(cfg, s, rng));
                states.push_back(surface_matrix(s));
            }
            const auto aug = collapse_single_path(direct, refl, states);
            for (int d = 0; d < cfg.cyclic_prefix; ++d) {
                const CMatrix ref = direct_delay_channel(direct, cfg, d) + cascaded_delay_channel(refl, states, cfg, d);
                CHECK(test::rel_fro(augmented_delay_channel(aug, cfg, d), ref) < 1e-10);
            }
        }
    }
}

TEST_CASE("frequency response") {
    SUBCASE("tap-0 only gives a flat spectrum") {
        Rng rng(6);
        auto taps = test::random_tensor(3, 2, 8, rng);
        for (std::size_t d = 1; d < taps.size(); ++d) taps[d].setZero();
        const auto f = freq_response(taps, 16);
        for (const auto& m : f) CHECK(test::rel_fro(m, taps[0]) < 1e-15);
    }
    SUBCASE("identity taps with K = D sum to D at k=0 and cancel elsewhere") {
        ChannelTensor taps(8, CMatrix::Identity(2, 2));
        const auto f = freq_response(taps, 8);
        CHECK(test::rel_fro(f[0], 8.0 * CMatrix::Identity(2, 2)) < 1e-15);
        for (int k = 1; k < 8; ++k) CHECK(f[static_cast<std::size_t>(k)].norm() < 1e-13);
    }
    SUBCASE("matches the direct DFT sum") {
        Rng rng(7);
        for (int t = 0; t < 5; ++t) {
            const auto taps = test::random_tensor(4, 2, 16, rng);
            CHECK(test::rel_fro(freq_response(taps, 32), test::naive_dft(taps, 32)) < 1e-12);
            CHECK(test::rel_fro(freq_response(taps, 8), test::naive_dft(taps, 8)) < 1e-12);
        }
    }
    SUBCASE("bad input") {
        CHECK_THROWS_AS(freq_response({}, 4), ContractError);
        CHECK_THROWS_AS(freq_response(ChannelTensor(2, CMatrix::Zero(1, 1)), 0), ConfigError);
    }
}

TEST_CASE("wideband channel agrees with the tap-domain path") {
    SystemConfig cfg = small_config();
    Rng rng(55);
    const auto real = realize_channel(cfg, rng);
    WidebandChannel ch(real.direct, real.reflectors, cfg);

    std::vector<SurfaceState> states;
    for (const auto& s : real.surfaces) states.push_back(surface_matrix(s));
    CHECK(test::rel_fro(ch.response(states), real.freq) < 1e-11);

    Rng pr(3);
    const auto ph = draw_ris_phases(real.surfaces[1].ris_count, pr);
    states[1] = surface_matrix(real.surfaces[1], std::span<const double>(ph));
    const auto taps = delay_tensor(real.direct, real.reflectors, states, cfg);
    CHECK(test::rel_fro(ch.response(states), freq_response(taps, cfg.n_subcarriers)) < 1e-11);
}

TEST_CASE("symbol simulation") {
    SystemConfig cfg = small_config();
    SUBCASE("noiseless identity channel passes the transmit block") {
        ChannelTensor h(4, CMatrix::Identity(3, 3));
        Rng rng(1);
        CMatrix x(3, 4);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.complex_normal();
        const auto y = simulate_symbol(h, x, 0.0, rng);
        CHECK((y - x).norm() == 0.0);
    }
    SUBCASE("noise-only variance") {
        cfg.noise_var_db = -20.0;
        ChannelTensor h(static_cast<std::size_t>(cfg.n_subcarriers), CMatrix::Zero(cfg.n_bs(), cfg.n_ue));
        Rng rng(10);
        const int n = 10000;
        Eigen::ArrayXXd acc = Eigen::ArrayXXd::Zero(cfg.n_bs(), cfg.n_subcarriers);
        for (int i = 0; i < n; ++i) acc += simulate_symbol(h, cfg, rng).cwiseAbs2().array();
        acc /= n;
        CHECK(((acc / cfg.noise_var()) - 1.0).abs().maxCoeff() < 0.03);
        CHECK(std::abs(acc.mean() / cfg.noise_var() - 1.0) < 0.03);
    }
    SUBCASE("fixed seed reproduces the frame bit for bit") {
        Rng r1(42), r2(42);
        const auto real = realize_channel(cfg, r1);
        const auto real2 = realize_channel(cfg, r2);
        const auto a = simulate_symbol(real.freq, cfg, r1);
        const auto b = simulate_symbol(real2.freq, cfg, r2);
        CHECK(a == b);
    }
    SUBCASE("transmit shape is checked") {
        ChannelTensor h(4, CMatrix::Identity(3, 3));
        Rng rng(1);
        CHECK_THROWS_AS(simulate_symbol(h, CMatrix::Zero(3, 5), 0.0, rng), ContractError);
    }
}
