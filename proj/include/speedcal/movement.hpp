#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speedcal/geometry.hpp"
#include "speedcal/speed.hpp"
#include "speedcal/trajectory.hpp"
#include "speedcal/types.hpp"

namespace speedcal {

struct Polygon {
    std::vector<Vec2> vertices;
};

/// Ray-crossing point-in-polygon test.
bool contains(const Polygon& poly, Vec2 p);
bool is_simple(const Polygon& poly);
bool zones_disjoint(const Polygon& a, const Polygon& b);

/// A geometric lane construct assigning trajectories to NEMA movements:
/// enter through entry_zone, leave through exit_zone, ordered along the
/// centerline direction.
struct VirtualLane {
    std::string lane_id;
    int nema_phase{0};
    Polygon entry_zone;
    Polygon exit_zone;
    std::vector<Vec2> centerline;  // bird's-eye pixels, defines along-lane direction
};

void validate(const VirtualLane& lane);

struct MovementLabel {
    std::int64_t track_id{0};
    std::optional<int> nema_phase;  // empty = unclassified
    std::optional<std::string> lane_id;
    std::int64_t entry_frame{0};
    std::int64_t exit_frame{0};

    bool classified() const { return nema_phase.has_value(); }
};

struct EpisodeInstance {
    std::int64_t frame{0};
    double leader_speed{0.0};     // m/s
    double follower_speed{0.0};   // m/s
    double spacing{0.0};          // meters, centroid to centroid
    double speed_difference{0.0}; // leader - follower, m/s
};

struct CarFollowingEpisode {
    int nema_phase{0};
    std::string lane_id;
    std::int64_t leader_id{0};
    std::int64_t follower_id{0};
    std::vector<EpisodeInstance> instances;
};

double episode_duration_seconds(const CarFollowingEpisode& ep, double fps);

/// Arc-length position of the nearest point on the polyline (pixels along
/// the path); optionally reports that nearest point.
double project_arc_length(std::span<const Vec2> polyline, Vec2 p, Vec2* nearest = nullptr);

/// Zone-gate movement classification: a trajectory belongs to a lane when it
/// hits the entry zone and later the exit zone; ties go to the lane whose
/// centerline collects the most centroids within 2 m.
MovementLabel classify_movement(const Trajectory& traj, std::span<const VirtualLane> lanes,
                                const MppCalibration& cal);

/// Pairs vehicles that share a lane over overlapping frame spans into
/// leader-follower episodes. Pairing is nearest-neighbor along the
/// centerline; an episode ends when a third vehicle merges between the
/// pair or either vehicle leaves the lane. Instances exist only at frames
/// where both vehicles carry a speed estimate; episodes shorter than
/// min_instances are dropped.
std::vector<CarFollowingEpisode> extract_episodes(
    std::span<const MovementLabel> labels, std::span<const VirtualLane> lanes,
    const std::map<std::int64_t, SpeedProfile>& profiles,
    const std::map<std::int64_t, Trajectory>& trajectories, const MppCalibration& cal,
    int min_instances);

}  // namespace speedcal
