#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speedcal/movement.hpp"

namespace speedcal {

/// Gazis-Herman-Rothery stimulus-response parameters:
/// follower acceleration = c * v^m * dv / dx^l at perception-reaction lag T.
struct GhrParams {
    double c{0.0};  // sensitivity coefficient
    double m{0.0};  // speed exponent
    double l{0.0};  // spacing exponent
    double T{0.2};  // perception-reaction time, seconds
};

/// Calibration box: 0 <= c <= 3, 0 <= m <= 3, 0 <= l <= 2, 0.2 <= T <= 1.8.
struct GhrBounds {
    double c_min{0.0}, c_max{3.0};
    double m_min{0.0}, m_max{3.0};
    double l_min{0.0}, l_max{2.0};
    double t_min{0.2}, t_max{1.8};
};

bool in_bounds(const GhrParams& p, const GhrBounds& b);

/// Below this centroid spacing the geometry is degenerate (overlapping
/// boxes) and dx^l is heading toward its singularity.
inline constexpr double kMinSpacingMeters = 0.5;

/// Follower acceleration from states the caller evaluated at t - T.
/// Throws SpacingTooSmall below kMinSpacingMeters.
double ghr_acceleration(const GhrParams& params, double v_follower, double delta_v,
                        double delta_x);

/// Perception-reaction lag in instances: floor(T * fps).
int lag_instances(double T_seconds, double fps);

struct SimPoint {
    std::int64_t frame{0};
    double v_hat{0.0};
};

/// Forward integration of the follower speed over one episode. Instances up
/// to the lag are skipped; the first simulated instance is seeded with the
/// observed follower speed; later instances use the trapezoidal update
/// v_k = v_{k-1} + (a_k + a_{k-1})/2 * (1/fps) with accelerations computed
/// from the episode states at the lagged instance. Speeds are floored at 0.
std::vector<SimPoint> simulate_follower(const GhrParams& params,
                                        const CarFollowingEpisode& episode, double fps);

/// Pooled mean absolute error |v - v_hat| over all simulated instances of
/// all episodes (instance-weighted). Episodes shorter than the lag are
/// skipped; throws NoUsableEpisodes when none survive.
double episode_mae(const GhrParams& params, std::span<const CarFollowingEpisode> episodes,
                   double fps);

struct OptimizerOptions {
    int starts{16};
    int evals_per_start{500};
    std::uint64_t seed{12345};
    double improvement_tol{1e-6};  // m/s
    int improvement_window{20};    // evaluations
    GhrBounds bounds{};
};

struct OptimizerDiagnostics {
    int starts{0};
    long evaluations{0};
    bool converged{false};
    bool degenerate{false};  // objective flat across all starts
    std::uint64_t seed{0};
};

struct CalibrationResult {
    int nema_phase{0};
    GhrParams params;
    double mae{0.0};
    std::size_t episode_count{0};
    std::size_t instance_count{0};
    OptimizerDiagnostics diagnostics;
};

/// Multi-start bounded Nelder-Mead direct search over the parameter box,
/// minimizing episode_mae. Deterministic given the seed; the returned MAE
/// never exceeds the objective at any evaluated point.
CalibrationResult calibrate(std::span<const CarFollowingEpisode> episodes, double fps,
                            const OptimizerOptions& options = {});

struct SyntheticOptions {
    double initial_spacing{20.0};   // meters, first episode
    double spacing_step{2.0};       // added per episode
    std::optional<double> follower_initial_speed;  // default: leader speed at t=0
    std::uint64_t seed{42};
    int nema_phase{2};
    std::string lane_id{"synthetic"};
    std::int64_t first_track_id{1};
};

/// Verification oracle for calibrate: episodes whose follower obeys the GHR
/// dynamics under true_params, integrated with the exact scheme
/// simulate_follower replays. Spacing integrates the speed difference
/// trapezoidally; optional Gaussian observation noise is added to the
/// recorded speeds only.
std::vector<CarFollowingEpisode> generate_synthetic_episodes(
    const GhrParams& true_params, int n_episodes, double duration_s, double fps,
    const std::function<double(double)>& leader_profile, double noise_sigma,
    const SyntheticOptions& options = {});

/// One section of the calibration report (one min-instances threshold).
struct PhaseCalibration {
    int nema_phase{0};
    std::size_t episode_count{0};
    std::size_t instance_count{0};
    std::optional<CalibrationResult> result;  // empty = insufficient episodes
};

struct ReportSection {
    int min_instances{0};
    double mean_episode_duration_s{0.0};
    std::vector<PhaseCalibration> phases;
};

/// Plain-text calibration report: one section per min-instances threshold,
/// one row per NEMA phase, '-' for phases without enough episodes.
std::string format_calibration_report(std::span<const ReportSection> sections);

}  // namespace speedcal
