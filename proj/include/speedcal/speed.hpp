#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "speedcal/geometry.hpp"
#include "speedcal/trajectory.hpp"

namespace speedcal {

struct SpeedSample {
    std::int64_t frame{0};
    double raw_speed{0.0};  // m/s
    std::optional<double> smoothed_speed;
    std::int64_t gap_frames{1};  // frame delta to the previous detection
};

struct SpeedProfile {
    std::int64_t track_id{0};
    std::vector<SpeedSample> samples;
    std::optional<double> smoothing_window_seconds;
    double fps{30.0};
    // metadata
    std::size_t dropped_gap_samples{0};   // pairs omitted because the gap exceeded max_gap
    std::size_t extrapolated_samples{0};  // estimates whose MPP weight left the calibrated region
};

/// Frame-by-frame speed from consecutive bird's-eye centroids:
/// speed_k = weighted_distance(p_k, p_{k-1}) / ((frame_k - frame_{k-1}) / fps).
/// The first appearance carries no estimate; pairs whose gap exceeds
/// max_gap_seconds are omitted and counted in the profile metadata.
SpeedProfile estimate_speeds(const Trajectory& traj, const MppCalibration& cal,
                             double max_gap_seconds);

/// Trailing moving average over the raw samples whose frame lies within the
/// window ending at the current frame. Window length in frames is
/// round(window_seconds * fps), minimum 1. Raw values are preserved.
SpeedProfile smooth(const SpeedProfile& profile, double window_seconds);

/// Optional fix for stopped-vehicle bounding-box jitter: raw speeds below
/// the threshold become 0. Off by default; apply before smoothing.
SpeedProfile apply_stationary_clamp(const SpeedProfile& profile, double threshold);

/// Incremental counterpart of estimate_speeds + smooth for stream input.
/// State per track is bounded by the smoothing window.
class StreamingSpeedEstimator {
public:
    StreamingSpeedEstimator(const MppCalibration& cal, double fps, double max_gap_seconds,
                            std::optional<double> window_seconds,
                            std::optional<double> stationary_clamp = std::nullopt);

    /// Feeds one detection; returns the completed sample for that track,
    /// if the pair produced one.
    std::optional<SpeedSample> push(std::int64_t track_id, std::int64_t frame, Vec2 birdseye);

    std::size_t dropped_gap_samples() const { return dropped_gaps_; }
    std::size_t extrapolated_samples() const { return extrapolated_; }

private:
    struct TrackState {
        std::int64_t last_frame{0};
        Vec2 last_birdseye;
        bool has_last{false};
        std::vector<SpeedSample> window;  // raw samples inside the smoothing window
    };

    MppCalibration cal_;
    double fps_;
    double max_gap_seconds_;
    std::optional<double> window_seconds_;
    std::int64_t window_frames_{1};
    std::optional<double> clamp_;
    std::size_t dropped_gaps_{0};
    std::size_t extrapolated_{0};
    std::map<std::int64_t, TrackState> tracks_;
};

}  // namespace speedcal
