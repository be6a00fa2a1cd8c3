#include "speedcal/speed.hpp"

#include <algorithm>
#include <cmath>

#include "speedcal/errors.hpp"

namespace speedcal {

namespace {

std::int64_t window_length_frames(double window_seconds, double fps) {
    return std::max<std::int64_t>(1, std::llround(window_seconds * fps));
}

}  // namespace

SpeedProfile estimate_speeds(const Trajectory& traj, const MppCalibration& cal,
                             double max_gap_seconds) {
    SpeedProfile profile;
    profile.track_id = traj.track_id;
    profile.fps = traj.fps;
    if (traj.samples.size() < 2) return profile;

    for (std::size_t k = 1; k < traj.samples.size(); ++k) {
        const TrajectorySample& prev = traj.samples[k - 1];
        const TrajectorySample& cur = traj.samples[k];
        const std::int64_t gap = cur.frame - prev.frame;
        const double gap_seconds = static_cast<double>(gap) / traj.fps;
        if (gap_seconds > max_gap_seconds) {
            ++profile.dropped_gap_samples;
            continue;
        }
        const double dist_m = weighted_distance(cal, prev.birdseye, cur.birdseye);
        const Vec2 mid = midpoint(prev.birdseye, cur.birdseye);
        if (!in_region(cal, mid)) ++profile.extrapolated_samples;
        profile.samples.push_back({cur.frame, dist_m / gap_seconds, std::nullopt, gap});
    }
    return profile;
}

SpeedProfile smooth(const SpeedProfile& profile, double window_seconds) {
    if (!(window_seconds > 0.0))
        throw NonPositiveWindow("smoothing window must be positive seconds");
    SpeedProfile out = profile;
    out.smoothing_window_seconds = window_seconds;
    const std::int64_t window = window_length_frames(window_seconds, profile.fps);

    std::size_t lo = 0;
    for (std::size_t k = 0; k < out.samples.size(); ++k) {
        // window covers frames in [frame - window + 1, frame]
        while (out.samples[lo].frame <= out.samples[k].frame - window) ++lo;
        double sum = 0.0;
        for (std::size_t j = lo; j <= k; ++j) sum += out.samples[j].raw_speed;
        out.samples[k].smoothed_speed = sum / static_cast<double>(k - lo + 1);
    }
    return out;
}

SpeedProfile apply_stationary_clamp(const SpeedProfile& profile, double threshold) {
    SpeedProfile out = profile;
    for (SpeedSample& s : out.samples)
        if (s.raw_speed < threshold) s.raw_speed = 0.0;
    return out;
}

StreamingSpeedEstimator::StreamingSpeedEstimator(const MppCalibration& cal, double fps,
                                                 double max_gap_seconds,
                                                 std::optional<double> window_seconds,
                                                 std::optional<double> stationary_clamp)
    : cal_(cal),
      fps_(fps),
      max_gap_seconds_(max_gap_seconds),
      window_seconds_(window_seconds),
      clamp_(stationary_clamp) {
    if (!(fps > 0.0)) throw Error("fps must be positive");
    if (window_seconds_) {
        if (!(*window_seconds_ > 0.0))
            throw NonPositiveWindow("smoothing window must be positive seconds");
        window_frames_ = window_length_frames(*window_seconds_, fps_);
    }
}

std::optional<SpeedSample> StreamingSpeedEstimator::push(std::int64_t track_id,
                                                         std::int64_t frame, Vec2 birdseye) {
    TrackState& state = tracks_[track_id];
    if (state.has_last && frame == state.last_frame)
        throw DuplicateFrame("track " + std::to_string(track_id) +
                             " has two detections in frame " + std::to_string(frame));
    if (state.has_last && frame < state.last_frame)
        throw Error("stream input must be frame-ordered per track");

    if (!state.has_last) {
        state.has_last = true;
        state.last_frame = frame;
        state.last_birdseye = birdseye;
        return std::nullopt;  // first appearance carries no estimate
    }

    const std::int64_t gap = frame - state.last_frame;
    state.last_frame = frame;
    const Vec2 prev = state.last_birdseye;
    state.last_birdseye = birdseye;

    if (static_cast<double>(gap) / fps_ > max_gap_seconds_) {
        ++dropped_gaps_;
        return std::nullopt;
    }

    const double dist_m = weighted_distance(cal_, prev, birdseye);
    if (!in_region(cal_, midpoint(prev, birdseye))) ++extrapolated_;
    double raw = dist_m / (static_cast<double>(gap) / fps_);
    if (clamp_ && raw < *clamp_) raw = 0.0;

    SpeedSample sample{frame, raw, std::nullopt, gap};
    if (window_seconds_) {
        state.window.push_back(sample);
        while (state.window.front().frame <= frame - window_frames_)
            state.window.erase(state.window.begin());
        double sum = 0.0;
        for (const SpeedSample& s : state.window) sum += s.raw_speed;
        sample.smoothed_speed = sum / static_cast<double>(state.window.size());
    }
    return sample;
}

}  // namespace speedcal
