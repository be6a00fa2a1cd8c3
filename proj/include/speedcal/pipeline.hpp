#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speedcal/geometry.hpp"
#include "speedcal/speed.hpp"
#include "speedcal/trajectory.hpp"

namespace speedcal {

struct PipelineConfig {
    double fps{30.0};
    double max_gap_seconds{0.5};
    std::optional<double> smoothing_window_seconds{1.0};
    std::optional<double> confidence_threshold;   // drops records carrying a lower confidence
    std::vector<std::string> class_filter;        // empty = keep all classes
    std::optional<double> stationary_clamp;       // raw speeds below this become 0
};

struct PipelineResult {
    std::map<std::int64_t, Trajectory> trajectories;
    std::map<std::int64_t, SpeedProfile> profiles;
    std::size_t records_used{0};
    std::size_t records_filtered{0};
    std::size_t dropped_gap_samples{0};
    std::size_t extrapolated_samples{0};
};

/// detections -> trajectories -> per-vehicle speed profiles, applying the
/// configured filters, clamp and smoothing.
PipelineResult run_speed_pipeline(std::span<const DetectionRecord> records, const Homography& h,
                                  const MppCalibration& cal, const PipelineConfig& config);

}  // namespace speedcal
