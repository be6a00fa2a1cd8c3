#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "speedcal/ghr.hpp"
#include "speedcal/movement.hpp"
#include "speedcal/trajectory.hpp"

namespace speedcal {

/// Speed profile of a scheduled vehicle. GhrFollower ties the vehicle to the
/// closest preceding schedule entry in the same lane and integrates the
/// car-following dynamics behind it.
struct SpeedProfileSpec {
    enum class Kind { Constant, Ramp, Step, GhrFollower };
    Kind kind{Kind::Constant};
    double v0{9.0};
    double v1{9.0};      // ramp end / step level
    double t0{0.0};      // ramp start time / step time, seconds from entry
    double t1{0.0};      // ramp end time
    GhrParams ghr;       // GhrFollower only
    double initial_spacing{20.0};  // meters behind the leader, GhrFollower only

    double speed_at(double t) const;  // Constant/Ramp/Step kinds
};

struct ScheduledVehicle {
    std::int64_t track_id{0};
    std::string lane_id;
    double entry_time_s{0.0};
    double start_offset_m{0.0};  // arc position at entry; negative = behind lane start
    std::string class_label{"car"};
    SpeedProfileSpec profile;
};

struct ScenarioSpec {
    std::vector<VirtualLane> lanes;
    std::vector<ScheduledVehicle> schedule;
    Homography birdseye_to_camera;  // inverse of the session homography
    MppCalibration mpp;
    double fps{30.0};
    double duration_s{60.0};
    double jitter_sigma{0.0};  // camera-space centroid jitter, pixels
    std::uint64_t seed{1};
    std::map<std::string, Vec2> box_sizes{{"car", {40.0, 30.0}}};  // class -> (w, h) px
};

struct TrueSpeedSample {
    std::int64_t track_id{0};
    std::int64_t frame{0};
    double speed{0.0};  // m/s, instantaneous
};

struct ScenarioOutput {
    std::vector<DetectionRecord> detections;  // sorted by (frame, track_id)
    std::vector<TrueSpeedSample> true_speeds;
    std::vector<CarFollowingEpisode> true_episodes;  // one per GHR follower
};

/// Runs the scenario: vehicles advance along lane centerlines at their
/// scheduled speeds, bird's-eye positions map into camera space through
/// birdseye_to_camera, and fixed-size boxes (optionally jittered) become
/// detection records. Deterministic under a fixed seed.
ScenarioOutput generate(const ScenarioSpec& spec);

}  // namespace speedcal
