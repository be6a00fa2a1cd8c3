#include "speedcal/pipeline.hpp"

#include <algorithm>

namespace speedcal {

PipelineResult run_speed_pipeline(std::span<const DetectionRecord> records, const Homography& h,
                                  const MppCalibration& cal, const PipelineConfig& config) {
    std::vector<DetectionRecord> kept;
    kept.reserve(records.size());
    for (const DetectionRecord& rec : records) {
        if (!config.class_filter.empty() &&
            std::find(config.class_filter.begin(), config.class_filter.end(), rec.class_label) ==
                config.class_filter.end())
            continue;
        if (config.confidence_threshold && rec.confidence &&
            *rec.confidence < *config.confidence_threshold)
            continue;
        kept.push_back(rec);
    }

    PipelineResult result;
    result.records_used = kept.size();
    result.records_filtered = records.size() - kept.size();
    result.trajectories = build_trajectories(kept, h, config.fps);

    for (const auto& [id, traj] : result.trajectories) {
        SpeedProfile profile = estimate_speeds(traj, cal, config.max_gap_seconds);
        if (config.stationary_clamp)
            profile = apply_stationary_clamp(profile, *config.stationary_clamp);
        if (config.smoothing_window_seconds)
            profile = smooth(profile, *config.smoothing_window_seconds);
        result.dropped_gap_samples += profile.dropped_gap_samples;
        result.extrapolated_samples += profile.extrapolated_samples;
        result.profiles.emplace(id, std::move(profile));
    }
    return result;
}

}  // namespace speedcal
