#include "speedcal/ghr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "speedcal/errors.hpp"

namespace speedcal {

namespace {

constexpr double kLagEps = 1e-9;        // guards floor() against 0.3*30 = 8.999...
constexpr int kMaxLagFrameSkew = 2;     // tolerated frame-delta mismatch at the lag

double clamp_box(double v, double lo, double hi) { return std::clamp(v, lo, hi); }

GhrParams clamp_params(const GhrParams& p, const GhrBounds& b) {
    return {clamp_box(p.c, b.c_min, b.c_max), clamp_box(p.m, b.m_min, b.m_max),
            clamp_box(p.l, b.l_min, b.l_max), clamp_box(p.T, b.t_min, b.t_max)};
}

double acceleration_unchecked(const GhrParams& p, double v_follower, double delta_v,
                              double delta_x) {
    return p.c * std::pow(v_follower, p.m) * delta_v / std::pow(delta_x, p.l);
}

// Shared integration core: emits (instance index, v_hat) for every simulated
// instance so the simulator and the MAE objective cannot drift apart.
// Instances whose lagged state is frame-misaligned or closer than the
// minimum spacing are skipped without breaking the integration state.
template <typename Emit>
bool simulate_core(const GhrParams& params, const CarFollowingEpisode& episode, double fps,
                   Emit&& emit) {
    const int lag = lag_instances(params.T, fps);
    const auto n = static_cast<std::int64_t>(episode.instances.size());
    if (n <= lag + 1) return false;

    const double dt = 1.0 / fps;
    bool seeded = false;
    double prev_v = 0.0;
    double prev_a = 0.0;
    for (std::int64_t i = lag; i < n; ++i) {
        const EpisodeInstance& cur = episode.instances[i];
        const EpisodeInstance& lagged = episode.instances[i - lag];
        if (std::llabs((cur.frame - lagged.frame) - lag) > kMaxLagFrameSkew) continue;
        if (lagged.spacing < kMinSpacingMeters) continue;
        const double a = acceleration_unchecked(params, lagged.follower_speed,
                                                lagged.speed_difference, lagged.spacing);
        if (!seeded) {
            prev_v = cur.follower_speed;  // observed speed anchors the integration
            seeded = true;
        } else {
            prev_v = std::max(0.0, prev_v + 0.5 * (a + prev_a) * dt);
        }
        prev_a = a;
        emit(static_cast<std::size_t>(i), prev_v);
    }
    return seeded;
}

}  // namespace

bool in_bounds(const GhrParams& p, const GhrBounds& b) {
    return p.c >= b.c_min && p.c <= b.c_max && p.m >= b.m_min && p.m <= b.m_max &&
           p.l >= b.l_min && p.l <= b.l_max && p.T >= b.t_min && p.T <= b.t_max;
}

double ghr_acceleration(const GhrParams& params, double v_follower, double delta_v,
                        double delta_x) {
    if (!(delta_x >= kMinSpacingMeters))
        throw SpacingTooSmall("spacing " + std::to_string(delta_x) + " m below minimum " +
                              std::to_string(kMinSpacingMeters) + " m");
    if (!(v_follower >= 0.0)) throw Error("follower speed must be non-negative");
    return acceleration_unchecked(params, v_follower, delta_v, delta_x);
}

int lag_instances(double T_seconds, double fps) {
    return static_cast<int>(std::floor(T_seconds * fps + kLagEps));
}

std::vector<SimPoint> simulate_follower(const GhrParams& params,
                                        const CarFollowingEpisode& episode, double fps) {
    const int lag = lag_instances(params.T, fps);
    if (static_cast<std::int64_t>(episode.instances.size()) <= lag + 1)
        throw EpisodeTooShort("episode has " + std::to_string(episode.instances.size()) +
                              " instances; needs more than " + std::to_string(lag + 1) +
                              " for lag " + std::to_string(lag));
    std::vector<SimPoint> out;
    out.reserve(episode.instances.size());
    simulate_core(params, episode, fps, [&](std::size_t idx, double v_hat) {
        out.push_back({episode.instances[idx].frame, v_hat});
    });
    return out;
}

double episode_mae(const GhrParams& params, std::span<const CarFollowingEpisode> episodes,
                   double fps) {
    double total_error = 0.0;
    std::size_t total_instances = 0;
    for (const CarFollowingEpisode& ep : episodes) {
        simulate_core(params, ep, fps, [&](std::size_t idx, double v_hat) {
            total_error += std::abs(ep.instances[idx].follower_speed - v_hat);
            ++total_instances;
        });
    }
    if (total_instances == 0)
        throw NoUsableEpisodes("every episode is shorter than the perception lag");
    return total_error / static_cast<double>(total_instances);
}

namespace {

double radical_inverse(unsigned base, unsigned long long index) {
    double inv_base = 1.0 / base;
    double f = inv_base;
    double r = 0.0;
    while (index > 0) {
        r += f * static_cast<double>(index % base);
        index /= base;
        f *= inv_base;
    }
    return r;
}

GhrParams halton_start(const GhrBounds& b, unsigned long long index) {
    static constexpr std::array<unsigned, 4> bases{2, 3, 5, 7};
    const double u0 = radical_inverse(bases[0], index);
    const double u1 = radical_inverse(bases[1], index);
    const double u2 = radical_inverse(bases[2], index);
    const double u3 = radical_inverse(bases[3], index);
    return {b.c_min + u0 * (b.c_max - b.c_min), b.m_min + u1 * (b.m_max - b.m_min),
            b.l_min + u2 * (b.l_max - b.l_min), b.t_min + u3 * (b.t_max - b.t_min)};
}

struct TrackedObjective {
    std::function<double(const GhrParams&)> fn;
    long evaluations{0};
    double best_value{std::numeric_limits<double>::infinity()};
    GhrParams best_params;

    double operator()(const GhrParams& p) {
        const double v = fn(p);
        ++evaluations;
        if (v < best_value) {
            best_value = v;
            best_params = p;
        }
        return v;
    }
};

using ParamVec = std::array<double, 4>;

ParamVec to_vec(const GhrParams& p) { return {p.c, p.m, p.l, p.T}; }
GhrParams to_params(const ParamVec& v) { return {v[0], v[1], v[2], v[3]}; }

ParamVec project(const ParamVec& v, const GhrBounds& b) {
    return to_vec(clamp_params(to_params(v), b));
}

// Nelder-Mead with box projection on a 4-dim simplex. Returns true when the
// improvement-window convergence test fired before the budget ran out.
bool nelder_mead(TrackedObjective& tracked, const GhrParams& start,
                 const OptimizerOptions& opt) {
    const GhrBounds& b = opt.bounds;
    const long budget = opt.evals_per_start;
    const long eval_base = tracked.evaluations;

    // per-start progress, independent of other starts
    double local_best = std::numeric_limits<double>::infinity();
    long evals_at_last_improvement = 0;
    auto obj = [&](const GhrParams& p) {
        const double v = tracked(p);
        if (v < local_best - opt.improvement_tol)
            evals_at_last_improvement = tracked.evaluations - eval_base;
        local_best = std::min(local_best, v);
        return v;
    };

    auto budget_left = [&] { return tracked.evaluations - eval_base < budget; };
    auto converged = [&] {
        return tracked.evaluations - eval_base - evals_at_last_improvement >=
               opt.improvement_window;
    };

    struct Vertex {
        ParamVec x;
        double f;
    };
    std::array<Vertex, 5> simplex;
    const std::array<double, 4> lo{b.c_min, b.m_min, b.l_min, b.t_min};
    const std::array<double, 4> hi{b.c_max, b.m_max, b.l_max, b.t_max};

    simplex[0].x = project(to_vec(start), b);
    simplex[0].f = obj(to_params(simplex[0].x));
    for (int j = 0; j < 4; ++j) {
        ParamVec x = simplex[0].x;
        double step = 0.15 * (hi[j] - lo[j]);
        if (x[j] + step > hi[j]) step = -step;
        x[j] += step;
        simplex[j + 1].x = project(x, b);
        if (!budget_left()) return false;
        simplex[j + 1].f = obj(to_params(simplex[j + 1].x));
    }

    while (budget_left() && !converged()) {
        std::sort(simplex.begin(), simplex.end(),
                  [](const Vertex& a, const Vertex& c) { return a.f < c.f; });
        ParamVec centroid{0, 0, 0, 0};
        for (int v = 0; v < 4; ++v)
            for (int j = 0; j < 4; ++j) centroid[j] += simplex[v].x[j] / 4.0;
        const Vertex& worst = simplex[4];

        auto affine = [&](double coef) {
            ParamVec x;
            for (int j = 0; j < 4; ++j) x[j] = centroid[j] + coef * (centroid[j] - worst.x[j]);
            return project(x, b);
        };

        const ParamVec xr = affine(1.0);
        const double fr = obj(to_params(xr));
        if (fr < simplex[0].f) {
            if (!budget_left()) { simplex[4] = {xr, fr}; break; }
            const ParamVec xe = affine(2.0);
            const double fe = obj(to_params(xe));
            simplex[4] = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
        } else if (fr < simplex[3].f) {
            simplex[4] = {xr, fr};
        } else {
            if (!budget_left()) break;
            ParamVec xc;
            const ParamVec& toward = fr < worst.f ? xr : worst.x;
            for (int j = 0; j < 4; ++j) xc[j] = centroid[j] + 0.5 * (toward[j] - centroid[j]);
            xc = project(xc, b);
            const double fc = obj(to_params(xc));
            if (fc < std::min(fr, worst.f)) {
                simplex[4] = {xc, fc};
            } else {
                // shrink toward the best vertex
                for (int v = 1; v <= 4; ++v) {
                    for (int j = 0; j < 4; ++j)
                        simplex[v].x[j] =
                            simplex[0].x[j] + 0.5 * (simplex[v].x[j] - simplex[0].x[j]);
                    simplex[v].x = project(simplex[v].x, b);
                    if (!budget_left()) return converged();
                    simplex[v].f = obj(to_params(simplex[v].x));
                }
            }
        }
    }
    return converged();
}

}  // namespace

CalibrationResult calibrate(std::span<const CarFollowingEpisode> episodes, double fps,
                            const OptimizerOptions& options) {
    if (episodes.empty()) throw NoUsableEpisodes("no episodes supplied");
    const int phase = episodes.front().nema_phase;
    for (const CarFollowingEpisode& ep : episodes)
        if (ep.nema_phase != phase)
            throw Error("calibrate expects episodes from a single NEMA phase");

    const double inf = std::numeric_limits<double>::infinity();
    auto objective = [&](const GhrParams& p) -> double {
        try {
            return episode_mae(p, episodes, fps);
        } catch (const NoUsableEpisodes&) {
            return inf;  // lag too long for every episode at this T
        }
    };

    CalibrationResult result;
    result.nema_phase = phase;
    result.episode_count = episodes.size();
    for (const CarFollowingEpisode& ep : episodes) result.instance_count += ep.instances.size();
    result.diagnostics.starts = options.starts;
    result.diagnostics.seed = options.seed;

    const unsigned long long offset = 1 + options.seed % 997;
    std::vector<GhrParams> starts;
    std::vector<double> start_values;
    TrackedObjective tracked{objective, 0, inf, {}};
    for (int s = 0; s < options.starts; ++s) {
        const GhrParams p = halton_start(options.bounds, offset + static_cast<unsigned>(s));
        starts.push_back(p);
        start_values.push_back(tracked(p));
    }

    double finite_min = inf;
    double finite_max = -inf;
    int finite_count = 0;
    for (double v : start_values) {
        if (!std::isfinite(v)) continue;
        finite_min = std::min(finite_min, v);
        finite_max = std::max(finite_max, v);
        ++finite_count;
    }
    if (finite_count == 0)
        throw NoUsableEpisodes("every episode is shorter than the perception lag at all starts");
    result.diagnostics.degenerate = finite_count >= 2 && finite_max - finite_min < 1e-12;

    bool best_start_converged = false;
    double best_before = inf;
    for (int s = 0; s < options.starts; ++s) {
        if (!std::isfinite(start_values[s])) continue;
        const bool conv = nelder_mead(tracked, starts[s], options);
        if (tracked.best_value < best_before) {
            best_before = tracked.best_value;
            best_start_converged = conv;
        }
    }

    result.params = clamp_params(tracked.best_params, options.bounds);
    result.mae = tracked.best_value;
    result.diagnostics.evaluations = tracked.evaluations;
    result.diagnostics.converged = best_start_converged;
    return result;
}

std::vector<CarFollowingEpisode> generate_synthetic_episodes(
    const GhrParams& true_params, int n_episodes, double duration_s, double fps,
    const std::function<double(double)>& leader_profile, double noise_sigma,
    const SyntheticOptions& options) {
    if (!(fps > 0.0)) throw Error("fps must be positive");
    if (!(duration_s > true_params.T + 2.0 / fps))
        throw InvalidDuration("duration must exceed T + 2/fps");
    if (n_episodes < 1) throw Error("need at least one episode");
    if (noise_sigma < 0.0) throw Error("noise sigma must be non-negative");
    const int lag = lag_instances(true_params.T, fps);
    if (lag < 1) throw Error("perception lag is below one frame; raise fps or T");

    const double dt = 1.0 / fps;
    const auto n = static_cast<std::size_t>(std::llround(duration_s * fps));
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);

    std::vector<CarFollowingEpisode> episodes;
    episodes.reserve(static_cast<std::size_t>(n_episodes));

    for (int e = 0; e < n_episodes; ++e) {
        std::vector<double> vl(n), vf(n), dv(n), dx(n), acc(n, 0.0);
        const double v_f0 = options.follower_initial_speed.value_or(leader_profile(0.0));
        if (!(v_f0 >= 0.0)) throw Error("follower initial speed must be non-negative");
        dx[0] = options.initial_spacing + e * options.spacing_step;

        for (std::size_t k = 0; k < n; ++k) {
            vl[k] = leader_profile(static_cast<double>(k) * dt);
            if (!(vl[k] >= 0.0)) throw Error("leader profile produced a negative speed");
            if (k <= static_cast<std::size_t>(lag)) {
                vf[k] = v_f0;  // no stimulus inside the perception lag
            } else {
                const std::size_t j = k - static_cast<std::size_t>(lag);
                if (dx[j] < kMinSpacingMeters)
                    throw SpecError("synthetic episode collapsed below the minimum spacing");
                acc[k] = acceleration_unchecked(true_params, vf[j], dv[j], dx[j]);
                vf[k] = std::max(0.0, vf[k - 1] + 0.5 * (acc[k] + acc[k - 1]) * dt);
            }
            if (k == static_cast<std::size_t>(lag)) {
                // acceleration at the seed instance, needed by the first update
                if (dx[0] < kMinSpacingMeters)
                    throw SpecError("synthetic episode starts below the minimum spacing");
                acc[k] = acceleration_unchecked(true_params, vf[0], dv[0], dx[0]);
            }
            dv[k] = vl[k] - vf[k];
            if (k > 0) dx[k] = dx[k - 1] + 0.5 * (dv[k] + dv[k - 1]) * dt;
        }

        CarFollowingEpisode ep;
        ep.nema_phase = options.nema_phase;
        ep.lane_id = options.lane_id;
        ep.leader_id = options.first_track_id + 2 * e;
        ep.follower_id = options.first_track_id + 2 * e + 1;
        ep.instances.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            double rec_l = vl[k];
            double rec_f = vf[k];
            if (noise_sigma > 0.0) {
                rec_l = std::max(0.0, rec_l + noise(rng));
                rec_f = std::max(0.0, rec_f + noise(rng));
            }
            ep.instances.push_back(
                {static_cast<std::int64_t>(k), rec_l, rec_f, dx[k], rec_l - rec_f});
        }
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

std::string format_calibration_report(std::span<const ReportSection> sections) {
    std::string out;
    char buf[256];
    out += "GHR calibration report\n";
    out += "======================\n";
    for (const ReportSection& sec : sections) {
        std::snprintf(buf, sizeof(buf), "\nmin_instances=%d  mean_episode_duration_s=%.2f\n",
                      sec.min_instances, sec.mean_episode_duration_s);
        out += buf;
        out += "phase       T       m       l       c     MAE  episodes  instances\n";
        for (const PhaseCalibration& row : sec.phases) {
            if (row.result) {
                const CalibrationResult& r = *row.result;
                std::snprintf(buf, sizeof(buf),
                              "%5d  %6.2f  %6.2f  %6.2f  %6.2f  %6.2f  %8zu  %9zu%s\n",
                              row.nema_phase, r.params.T, r.params.m, r.params.l, r.params.c,
                              r.mae, row.episode_count, row.instance_count,
                              r.diagnostics.degenerate ? "  [degenerate objective]" : "");
            } else {
                std::snprintf(buf, sizeof(buf),
                              "%5d  %6s  %6s  %6s  %6s  %6s  %8zu  %9zu\n", row.nema_phase, "-",
                              "-", "-", "-", "-", row.episode_count, row.instance_count);
            }
            out += buf;
        }
    }
    return out;
}

}  // namespace speedcal
