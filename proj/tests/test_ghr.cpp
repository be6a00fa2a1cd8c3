#include <doctest.h>

#include <cmath>
#include <random>

#include "speedcal/errors.hpp"
#include "speedcal/ghr.hpp"

using namespace speedcal;

namespace {

double step_leader(double t) { return t < 5.0 ? 12.0 : 8.0; }

std::function<double(double)> sine_leader(double base, double amp, double period) {
    return [=](double t) { return base + amp * std::sin(2.0 * M_PI * t / period); };
}

}  // namespace

TEST_CASE("ghr_acceleration: zero stimulus, neutral exponents, Table-IV row") {
    CHECK(ghr_acceleration({1.0, 0.5, 1.0, 0.5}, 10.0, 0.0, 20.0) == 0.0);
    CHECK(ghr_acceleration({1.0, 0.0, 0.0, 0.5}, 3.0, 2.0, 20.0) == doctest::Approx(2.0));
    // phase-2 calibrated row: c=1.39, m=0.10, l=2.0 at v=10, dv=1, dx=20
    const double a = ghr_acceleration({1.39, 0.10, 2.0, 1.74}, 10.0, 1.0, 20.0);
    CHECK(a == doctest::Approx(1.39 * std::pow(10.0, 0.1) / 400.0).epsilon(1e-12));
    CHECK(a == doctest::Approx(0.004374).epsilon(1e-3));
}

TEST_CASE("ghr_acceleration: rejects degenerate spacing") {
    CHECK_THROWS_AS(ghr_acceleration({1, 0, 0, 0.5}, 5.0, 1.0, 0.4), SpacingTooSmall);
    CHECK_NOTHROW(ghr_acceleration({1, 0, 0, 0.5}, 5.0, 1.0, 0.5));
}

TEST_CASE("ghr_acceleration: linear in the speed difference") {
    std::mt19937_64 rng(301);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const GhrParams p{3.0 * u(rng), 3.0 * u(rng), 2.0 * u(rng), 0.2 + 1.6 * u(rng)};
        const double v = 0.5 + 25.0 * u(rng);
        const double dv = -5.0 + 10.0 * u(rng);
        const double dx = 1.0 + 50.0 * u(rng);
        const double alpha = -3.0 + 6.0 * u(rng);
        const double a1 = ghr_acceleration(p, v, dv, dx);
        const double a2 = ghr_acceleration(p, v, alpha * dv, dx);
        CHECK(a2 == doctest::Approx(alpha * a1).epsilon(1e-10).scale(1e-12));
    }
}

TEST_CASE("ghr_acceleration: sign follows the stimulus; spacing damps it") {
    std::mt19937_64 rng(302);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const GhrParams p{0.1 + 2.9 * u(rng), 3.0 * u(rng), 2.0 * u(rng), 0.2};
        const double v = 0.5 + 25.0 * u(rng);
        const double dv = -5.0 + 10.0 * u(rng);
        const double dx = 1.0 + 40.0 * u(rng);
        const double a = ghr_acceleration(p, v, dv, dx);
        if (dv > 0) CHECK(a > 0.0);
        if (dv < 0) CHECK(a < 0.0);
        if (dv != 0.0)
            CHECK(std::abs(ghr_acceleration(p, v, dv, dx + 5.0)) <= std::abs(a) + 1e-15);
    }
    CHECK(ghr_acceleration({2.0, 1.0, 1.0, 0.2}, 10.0, 0.0, 5.0) == 0.0);
}

TEST_CASE("lag_instances floors T*fps robustly") {
    CHECK(lag_instances(0.5, 30.0) == 15);
    CHECK(lag_instances(0.3, 30.0) == 9);   // 0.3*30 = 8.999... in binary
    CHECK(lag_instances(0.3, 10.0) == 3);
    CHECK(lag_instances(1.8, 30.0) == 54);
    CHECK(lag_instances(0.2, 30.0) == 6);
    CHECK(lag_instances(0.55, 30.0) == 16);  // 16.5 floors to 16
}

TEST_CASE("generate_synthetic_episodes: equilibrium stays at equilibrium") {
    const GhrParams p{1.0, 0.5, 1.0, 0.5};
    SyntheticOptions opts;
    opts.initial_spacing = 15.0;
    const auto eps = generate_synthetic_episodes(p, 1, 10.0, 30.0,
                                                 [](double) { return 9.0; }, 0.0, opts);
    REQUIRE(eps.size() == 1);
    for (const EpisodeInstance& inst : eps.front().instances) {
        CHECK(inst.follower_speed == doctest::Approx(9.0).epsilon(1e-12));
        CHECK(inst.spacing == doctest::Approx(15.0).epsilon(1e-12));
        CHECK(inst.speed_difference == doctest::Approx(0.0).scale(1.0));
    }
}

TEST_CASE("generate_synthetic_episodes: follower reacts after the lag with the right sign") {
    const GhrParams p{1.2, 0.4, 0.9, 0.6};
    const auto eps = generate_synthetic_episodes(p, 1, 12.0, 30.0, step_leader, 0.0);
    const auto& inst = eps.front().instances;
    const int lag = lag_instances(p.T, 30.0);
    const auto step_idx = static_cast<std::size_t>(5.0 * 30.0);
    // before the stimulus reaches the follower, speed holds at the seed
    for (std::size_t k = 0; k < step_idx + static_cast<std::size_t>(lag); ++k)
        CHECK(inst[k].follower_speed == doctest::Approx(12.0).epsilon(1e-9));
    // after the lag, the decelerating leader pulls the follower down
    CHECK(inst.back().follower_speed < 12.0);
}

TEST_CASE("generate_synthetic_episodes: duration guard") {
    const GhrParams p{1.0, 0.5, 1.0, 1.5};
    CHECK_THROWS_AS(
        generate_synthetic_episodes(p, 1, 1.5, 30.0, [](double) { return 9.0; }, 0.0),
        InvalidDuration);
}

TEST_CASE("simulate_follower: steady state holds the seed; c = 0 ignores the leader") {
    const GhrParams steady{1.0, 0.5, 1.0, 0.5};
    const auto eps = generate_synthetic_episodes(steady, 1, 10.0, 30.0,
                                                 [](double) { return 9.0; }, 0.0);
    const auto sim = simulate_follower(steady, eps.front(), 30.0);
    for (const SimPoint& pt : sim) CHECK(pt.v_hat == doctest::Approx(9.0).epsilon(1e-12));

    // c = 0: constant prediction even against a moving leader
    const GhrParams active{1.5, 0.3, 0.8, 0.5};
    const auto busy = generate_synthetic_episodes(active, 1, 12.0, 30.0, step_leader, 0.0);
    const GhrParams zero_c{0.0, 0.3, 0.8, 0.5};
    const auto sim2 = simulate_follower(zero_c, busy.front(), 30.0);
    for (const SimPoint& pt : sim2)
        CHECK(pt.v_hat == doctest::Approx(sim2.front().v_hat).epsilon(1e-12));
}

TEST_CASE("simulate_follower: replaying the generator's parameters is exact") {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const GhrParams p{0.3 + 2.0 * u(rng), 0.2 + 1.5 * u(rng), 0.3 + 1.2 * u(rng),
                          0.3 + 1.0 * u(rng)};
        SyntheticOptions opts;
        opts.initial_spacing = 18.0 + 10.0 * u(rng);
        opts.seed = 1000 + trial;
        const auto eps = generate_synthetic_episodes(
            p, 1, 10.0, 30.0, sine_leader(10.0, 1.5, 6.0), 0.0, opts);
        const auto sim = simulate_follower(p, eps.front(), 30.0);
        const int lag = lag_instances(p.T, 30.0);
        REQUIRE(sim.size() == eps.front().instances.size() - static_cast<std::size_t>(lag));
        for (std::size_t i = 0; i < sim.size(); ++i) {
            const EpisodeInstance& inst =
                eps.front().instances[i + static_cast<std::size_t>(lag)];
            CHECK(sim[i].frame == inst.frame);
            CHECK(std::abs(sim[i].v_hat - inst.follower_speed) < 1e-9);
        }
    }
}

TEST_CASE("simulate_follower: too-short episodes are rejected") {
    const GhrParams p{1.0, 0.5, 1.0, 1.0};  // lag 30 at 30 fps
    CarFollowingEpisode ep;
    ep.nema_phase = 2;
    for (int k = 0; k < 31; ++k) ep.instances.push_back({k, 9.0, 9.0, 15.0, 0.0});
    CHECK_THROWS_AS(simulate_follower(p, ep, 30.0), EpisodeTooShort);
}

TEST_CASE("episode_mae: exact match scores zero") {
    const GhrParams p{1.0, 0.5, 1.0, 0.5};
    const auto eps = generate_synthetic_episodes(p, 3, 10.0, 30.0,
                                                 sine_leader(10.0, 1.0, 5.0), 0.0);
    CHECK(episode_mae(p, eps, 30.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
}

TEST_CASE("episode_mae: pooled over instances, not mean of episode means") {
    // with dv = 0 everywhere the prediction holds at the seed, so shifting
    // the observed speeds after the seed makes per-instance errors explicit
    const GhrParams p{1.0, 0.0, 0.0, 0.5};
    const int lag = lag_instances(p.T, 30.0);
    CarFollowingEpisode e1;
    e1.nema_phase = 2;
    for (int k = 0; k < lag + 3; ++k)
        e1.instances.push_back({k, 10.0, k <= lag ? 10.0 : 11.5, 20.0, 0.0});
    CarFollowingEpisode e2 = e1;
    e2.instances.resize(static_cast<std::size_t>(lag) + 2);
    // e1 simulated errors {0, 1.5, 1.5}; e2 simulated errors {0, 1.5}
    const double mae = episode_mae(p, std::vector<CarFollowingEpisode>{e1, e2}, 30.0);
    CHECK(mae == doctest::Approx(4.5 / 5.0).epsilon(1e-12));
}

TEST_CASE("episode_mae: throws when every episode is shorter than the lag") {
    const GhrParams p{1.0, 0.5, 1.0, 1.8};  // lag 54
    CarFollowingEpisode ep;
    for (int k = 0; k < 40; ++k) ep.instances.push_back({k, 9.0, 9.0, 15.0, 0.0});
    CHECK_THROWS_AS(episode_mae(p, std::vector<CarFollowingEpisode>{ep}, 30.0),
                    NoUsableEpisodes);
}

TEST_CASE("calibrate: noiseless round trip reaches near-zero MAE and replays the speeds") {
    const GhrParams truth{1.0, 0.5, 1.0, 0.5};
    SyntheticOptions opts;
    opts.initial_spacing = 16.0;
    opts.spacing_step = 3.0;
    const auto eps = generate_synthetic_episodes(truth, 4, 10.0, 30.0,
                                                 sine_leader(10.0, 2.0, 7.0), 0.0, opts);
    OptimizerOptions oo;
    oo.seed = 7;
    const CalibrationResult result = calibrate(eps, 30.0, oo);
    CHECK(result.mae < 0.01);
    CHECK(in_bounds(result.params, oo.bounds));

    // forward simulation with the recovered parameters matches observations
    double sq = 0.0;
    std::size_t n = 0;
    for (const CarFollowingEpisode& ep : eps) {
        const auto sim = simulate_follower(result.params, ep, 30.0);
        const int lag = lag_instances(result.params.T, 30.0);
        for (std::size_t i = 0; i < sim.size(); ++i) {
            const double obs = ep.instances[i + static_cast<std::size_t>(lag)].follower_speed;
            sq += (sim[i].v_hat - obs) * (sim[i].v_hat - obs);
            ++n;
        }
    }
    CHECK(std::sqrt(sq / static_cast<double>(n)) < 0.05);
}

TEST_CASE("calibrate: deterministic under a fixed seed") {
    const GhrParams truth{1.4, 0.3, 0.7, 0.8};
    const auto eps = generate_synthetic_episodes(truth, 2, 8.0, 30.0,
                                                 sine_leader(9.0, 1.0, 4.0), 0.2);
    OptimizerOptions oo;
    oo.seed = 99;
    const CalibrationResult a = calibrate(eps, 30.0, oo);
    const CalibrationResult b = calibrate(eps, 30.0, oo);
    CHECK(a.mae == b.mae);
    CHECK(a.params.c == b.params.c);
    CHECK(a.params.m == b.params.m);
    CHECK(a.params.l == b.params.l);
    CHECK(a.params.T == b.params.T);
    CHECK(a.diagnostics.evaluations == b.diagnostics.evaluations);
}

TEST_CASE("calibrate: flat objective is flagged degenerate but converges") {
    // constant platoon: dv = 0 at every instance, so the MAE is 0 for any c
    CarFollowingEpisode ep;
    ep.nema_phase = 4;
    for (int k = 0; k < 200; ++k) ep.instances.push_back({k, 9.0, 9.0, 12.0, 0.0});
    const CalibrationResult result = calibrate(std::vector<CarFollowingEpisode>{ep}, 30.0);
    CHECK(result.mae == doctest::Approx(0.0));
    CHECK(result.diagnostics.degenerate);
    CHECK(result.diagnostics.converged);
    CHECK(in_bounds(result.params, GhrBounds{}));
}

TEST_CASE("calibrate: returned MAE never exceeds sampled objective values") {
    const GhrParams truth{0.8, 0.9, 0.5, 0.6};
    const auto eps = generate_synthetic_episodes(truth, 2, 8.0, 30.0,
                                                 sine_leader(11.0, 1.2, 5.0), 0.1);
    OptimizerOptions oo;
    oo.seed = 5;
    const CalibrationResult result = calibrate(eps, 30.0, oo);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 64; ++i) {
        const GhrParams p{3.0 * u(rng), 3.0 * u(rng), 2.0 * u(rng), 0.2 + 1.6 * u(rng)};
        CHECK(result.mae <= episode_mae(p, eps, 30.0) + 1e-12);
    }
}

TEST_CASE("calibrate: mixed phases are rejected; empty input throws") {
    CarFollowingEpisode a;
    a.nema_phase = 2;
    for (int k = 0; k < 100; ++k) a.instances.push_back({k, 9, 9, 12, 0});
    CarFollowingEpisode b = a;
    b.nema_phase = 6;
    CHECK_THROWS_AS(calibrate(std::vector<CarFollowingEpisode>{a, b}, 30.0), Error);
    CHECK_THROWS_AS(calibrate(std::vector<CarFollowingEpisode>{}, 30.0), NoUsableEpisodes);
}

TEST_CASE("format_calibration_report: dashes for missing phases") {
    ReportSection sec;
    sec.min_instances = 30;
    sec.mean_episode_duration_s = 2.63;
    PhaseCalibration with;
    with.nema_phase = 2;
    with.episode_count = 4;
    with.instance_count = 400;
    CalibrationResult r;
    r.nema_phase = 2;
    r.params = {1.39, 0.10, 2.0, 1.74};
    r.mae = 0.11;
    with.result = r;
    PhaseCalibration without;
    without.nema_phase = 3;
    sec.phases = {with, without};
    const std::string text = format_calibration_report(std::vector<ReportSection>{sec});
    CHECK(text.find("min_instances=30") != std::string::npos);
    CHECK(text.find("1.39") != std::string::npos);
    CHECK(text.find("   -") != std::string::npos);
}
