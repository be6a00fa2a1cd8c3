#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "speedcal/speed.hpp"

namespace speedcal {

/// Instrumented-vehicle speed trace: (timestamp seconds, speed m/s),
/// timestamps strictly increasing.
struct GroundTruthTrace {
    std::vector<std::pair<double, double>> samples;
    double source_rate{100.0};  // Hz
};

void validate(const GroundTruthTrace& trace);

enum class SpeedKind { Raw, Smoothed };

/// Pairs each profile frame with the linearly interpolated true speed at
/// time frame/fps + t0_offset; pairs outside the trace span are dropped.
/// Returns (true, estimated) pairs; throws NoOverlap when none remain.
std::vector<std::pair<double, double>> align(const GroundTruthTrace& trace,
                                             const SpeedProfile& profile, double fps,
                                             double t0_offset,
                                             SpeedKind kind = SpeedKind::Raw);

/// One pass of the probe vehicle through the camera frame.
struct Appearance {
    std::string id;
    std::string label;       // traffic state, e.g. "Light" / "Congested"
    std::size_t begin{0};    // half-open index range into the pair list
    std::size_t end{0};
};

struct AppearanceRow {
    std::string id;
    std::string label;
    double mean_true{0.0};
    double mean_estimated{0.0};
    double error{0.0};  // estimated - true
};

struct ValidationReport {
    std::size_t n_instances{0};
    double mean_error{0.0};  // mean(est - true)
    double sigma{0.0};       // population std of (est - true)
    double mae{0.0};
    double rmse{0.0};
    double r_squared{0.0};
    std::vector<AppearanceRow> appearances;
};

/// Error statistics of estimated vs true speeds. Population sigma keeps the
/// identity sigma^2 = RMSE^2 - mean_error^2 exact. R^2 is the coefficient
/// of determination with SS_tot taken around the true-speed mean.
ValidationReport validation_report(std::span<const std::pair<double, double>> pairs,
                                   std::span<const Appearance> appearances = {});

/// Grid search for the time offset maximizing agreement (minimum MSE)
/// between the trace and the profile. Optional helper when t0 is unknown.
double estimate_offset(const GroundTruthTrace& trace, const SpeedProfile& profile, double fps,
                       double search_span_s, double step_s,
                       SpeedKind kind = SpeedKind::Smoothed);

/// Plain-text report mirroring the per-appearance table and the summary
/// statistics table. `rows` pairs a label (e.g. smoothing setting) with a
/// report computed from the corresponding pair set.
std::string format_validation_report(
    std::span<const std::pair<std::string, ValidationReport>> rows);

}  // namespace speedcal
