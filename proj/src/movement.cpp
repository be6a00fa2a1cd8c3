#include "speedcal/movement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "speedcal/errors.hpp"

namespace speedcal {

namespace {

constexpr double kCenterlineTieBreakMeters = 2.0;

int orientation(Vec2 a, Vec2 b, Vec2 c) {
    const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
    return std::min(a.x, b.x) - 1e-12 <= p.x && p.x <= std::max(a.x, b.x) + 1e-12 &&
           std::min(a.y, b.y) - 1e-12 <= p.y && p.y <= std::max(a.y, b.y) + 1e-12;
}

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
    const int o1 = orientation(p1, p2, q1);
    const int o2 = orientation(p1, p2, q2);
    const int o3 = orientation(q1, q2, p1);
    const int o4 = orientation(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0 && on_segment(q1, q2, p2)) return true;
    return false;
}

Vec2 closest_point_on_segment(Vec2 a, Vec2 b, Vec2 p, double& t_out) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    t_out = t;
    return a + t * ab;
}

}  // namespace

bool contains(const Polygon& poly, Vec2 p) {
    const std::size_t n = poly.vertices.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& vi = poly.vertices[i];
        const Vec2& vj = poly.vertices[j];
        if ((vi.y > p.y) != (vj.y > p.y) &&
            p.x < (vj.x - vi.x) * (p.y - vi.y) / (vj.y - vi.y) + vi.x)
            inside = !inside;
    }
    return inside;
}

bool is_simple(const Polygon& poly) {
    const std::size_t n = poly.vertices.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a1 = poly.vertices[i];
        const Vec2 a2 = poly.vertices[(i + 1) % n];
        if (pixel_distance(a1, a2) < 1e-12) return false;  // degenerate edge
        for (std::size_t j = i + 1; j < n; ++j) {
            // skip edges sharing a vertex
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            const Vec2 b1 = poly.vertices[j];
            const Vec2 b2 = poly.vertices[(j + 1) % n];
            if (segments_intersect(a1, a2, b1, b2)) return false;
        }
    }
    return true;
}

bool zones_disjoint(const Polygon& a, const Polygon& b) {
    for (std::size_t i = 0; i < a.vertices.size(); ++i) {
        const Vec2 a1 = a.vertices[i];
        const Vec2 a2 = a.vertices[(i + 1) % a.vertices.size()];
        for (std::size_t j = 0; j < b.vertices.size(); ++j) {
            const Vec2 b1 = b.vertices[j];
            const Vec2 b2 = b.vertices[(j + 1) % b.vertices.size()];
            if (segments_intersect(a1, a2, b1, b2)) return false;
        }
    }
    for (const Vec2& v : a.vertices)
        if (contains(b, v)) return false;
    for (const Vec2& v : b.vertices)
        if (contains(a, v)) return false;
    return true;
}

void validate(const VirtualLane& lane) {
    if (lane.nema_phase < 1 || lane.nema_phase > 8)
        throw Error("lane '" + lane.lane_id + "': NEMA phase must be in 1..8");
    if (lane.entry_zone.vertices.size() < 3 || lane.exit_zone.vertices.size() < 3)
        throw Error("lane '" + lane.lane_id + "': zones need at least 3 vertices");
    if (!is_simple(lane.entry_zone) || !is_simple(lane.exit_zone))
        throw Error("lane '" + lane.lane_id + "': zone polygons must be simple");
    if (!zones_disjoint(lane.entry_zone, lane.exit_zone))
        throw Error("lane '" + lane.lane_id + "': entry and exit zones must be disjoint");
    if (lane.centerline.size() < 2)
        throw Error("lane '" + lane.lane_id + "': centerline needs at least 2 points");
}

double episode_duration_seconds(const CarFollowingEpisode& ep, double fps) {
    if (ep.instances.size() < 2) return 0.0;
    return static_cast<double>(ep.instances.back().frame - ep.instances.front().frame) / fps;
}

double project_arc_length(std::span<const Vec2> polyline, Vec2 p, Vec2* nearest) {
    double best_dist = std::numeric_limits<double>::infinity();
    double best_arc = 0.0;
    Vec2 best_point = polyline.front();
    double arc_before = 0.0;
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        const Vec2 a = polyline[i];
        const Vec2 b = polyline[i + 1];
        double t = 0.0;
        const Vec2 q = closest_point_on_segment(a, b, p, t);
        const double d = pixel_distance(p, q);
        if (d < best_dist) {
            best_dist = d;
            best_arc = arc_before + t * pixel_distance(a, b);
            best_point = q;
        }
        arc_before += pixel_distance(a, b);
    }
    if (nearest) *nearest = best_point;
    return best_arc;
}

MovementLabel classify_movement(const Trajectory& traj, std::span<const VirtualLane> lanes,
                                const MppCalibration& cal) {
    if (lanes.empty()) throw Error("classify_movement requires at least one lane");

    struct Candidate {
        const VirtualLane* lane;
        std::int64_t entry_frame;
        std::int64_t exit_frame;
        std::size_t near_centerline;
    };
    std::vector<Candidate> candidates;

    for (const VirtualLane& lane : lanes) {
        std::int64_t entry_frame = -1;
        std::int64_t exit_frame = -1;
        for (const TrajectorySample& s : traj.samples) {
            if (entry_frame < 0) {
                if (contains(lane.entry_zone, s.birdseye)) entry_frame = s.frame;
            } else if (s.frame > entry_frame && contains(lane.exit_zone, s.birdseye)) {
                exit_frame = s.frame;  // keep the last exit-zone hit
            }
        }
        if (entry_frame < 0 || exit_frame < 0) continue;

        std::size_t near = 0;
        for (const TrajectorySample& s : traj.samples) {
            Vec2 q;
            project_arc_length(lane.centerline, s.birdseye, &q);
            if (weighted_distance(cal, s.birdseye, q) <= kCenterlineTieBreakMeters) ++near;
        }
        candidates.push_back({&lane, entry_frame, exit_frame, near});
    }

    MovementLabel label;
    label.track_id = traj.track_id;
    if (candidates.empty()) return label;

    const Candidate* best = &candidates.front();
    for (const Candidate& c : candidates)
        if (c.near_centerline > best->near_centerline) best = &c;

    label.nema_phase = best->lane->nema_phase;
    label.lane_id = best->lane->lane_id;
    label.entry_frame = best->entry_frame;
    label.exit_frame = best->exit_frame;
    return label;
}

namespace {

double instance_speed(const SpeedSample& s) {
    return s.smoothed_speed.value_or(s.raw_speed);
}

struct LaneMember {
    std::int64_t track_id{0};
    std::int64_t entry_frame{0};
    std::int64_t exit_frame{0};
    std::unordered_map<std::int64_t, Vec2> centroid_by_frame;
    std::unordered_map<std::int64_t, double> arc_by_frame;
    std::unordered_map<std::int64_t, double> speed_by_frame;
};

struct PairKey {
    std::int64_t leader;
    std::int64_t follower;
    bool operator<(const PairKey& o) const {
        return leader != o.leader ? leader < o.leader : follower < o.follower;
    }
};

}  // namespace

std::vector<CarFollowingEpisode> extract_episodes(
    std::span<const MovementLabel> labels, std::span<const VirtualLane> lanes,
    const std::map<std::int64_t, SpeedProfile>& profiles,
    const std::map<std::int64_t, Trajectory>& trajectories, const MppCalibration& cal,
    int min_instances) {
    if (min_instances < 2) throw Error("min_instances must be >= 2");

    std::map<std::string, const VirtualLane*> lane_by_id;
    for (const VirtualLane& lane : lanes) lane_by_id[lane.lane_id] = &lane;

    std::map<std::string, std::vector<const MovementLabel*>> by_lane;
    for (const MovementLabel& label : labels) {
        if (!label.classified()) continue;
        by_lane[*label.lane_id].push_back(&label);
    }

    std::vector<CarFollowingEpisode> episodes;

    for (auto& [lane_id, lane_labels] : by_lane) {
        if (lane_labels.size() < 2) continue;
        const auto lane_it = lane_by_id.find(lane_id);
        if (lane_it == lane_by_id.end())
            throw Error("movement label references unknown lane '" + lane_id + "'");
        const VirtualLane& lane = *lane_it->second;

        // per-member lookup tables over the member's in-lane frame span
        std::vector<LaneMember> members;
        std::set<std::int64_t> all_frames;
        for (const MovementLabel* label : lane_labels) {
            const auto traj_it = trajectories.find(label->track_id);
            if (traj_it == trajectories.end()) continue;
            LaneMember m;
            m.track_id = label->track_id;
            m.entry_frame = label->entry_frame;
            m.exit_frame = label->exit_frame;
            for (const TrajectorySample& s : traj_it->second.samples) {
                if (s.frame < m.entry_frame || s.frame > m.exit_frame) continue;
                m.centroid_by_frame[s.frame] = s.birdseye;
                m.arc_by_frame[s.frame] = project_arc_length(lane.centerline, s.birdseye);
                all_frames.insert(s.frame);
            }
            const auto prof_it = profiles.find(label->track_id);
            if (prof_it != profiles.end()) {
                for (const SpeedSample& sp : prof_it->second.samples) {
                    if (sp.frame < m.entry_frame || sp.frame > m.exit_frame) continue;
                    m.speed_by_frame[sp.frame] = instance_speed(sp);
                }
            }
            members.push_back(std::move(m));
        }
        if (members.size() < 2) continue;

        // frame-ordered sweep: adjacent pairs in along-lane order form runs;
        // a run closes when a third vehicle merges between the pair (or the
        // ordering flips), and survives tracking gaps.
        std::map<PairKey, std::vector<std::int64_t>> open_runs;
        std::vector<std::pair<PairKey, std::vector<std::int64_t>>> closed_runs;

        for (const std::int64_t f : all_frames) {
            struct Present {
                std::size_t member_index;
                double arc;
            };
            std::vector<Present> present;
            for (std::size_t i = 0; i < members.size(); ++i) {
                const auto it = members[i].arc_by_frame.find(f);
                if (it != members[i].arc_by_frame.end()) present.push_back({i, it->second});
            }
            std::set<PairKey> adjacent_now;
            if (present.size() >= 2) {
                std::sort(present.begin(), present.end(), [&](const Present& a, const Present& b) {
                    if (a.arc != b.arc) return a.arc > b.arc;  // leader first
                    return members[a.member_index].track_id < members[b.member_index].track_id;
                });
                for (std::size_t i = 0; i + 1 < present.size(); ++i) {
                    adjacent_now.insert({members[present[i].member_index].track_id,
                                         members[present[i + 1].member_index].track_id});
                }
            }

            // close open runs whose pair is present but no longer adjacent
            for (auto it = open_runs.begin(); it != open_runs.end();) {
                const PairKey key = it->first;
                const bool leader_here = std::any_of(
                    present.begin(), present.end(), [&](const Present& p) {
                        return members[p.member_index].track_id == key.leader;
                    });
                const bool follower_here = std::any_of(
                    present.begin(), present.end(), [&](const Present& p) {
                        return members[p.member_index].track_id == key.follower;
                    });
                if (leader_here && follower_here && !adjacent_now.count(key)) {
                    closed_runs.emplace_back(key, std::move(it->second));
                    it = open_runs.erase(it);
                } else {
                    ++it;
                }
            }
            for (const PairKey& key : adjacent_now) open_runs[key].push_back(f);
        }
        for (auto& [key, frames] : open_runs) closed_runs.emplace_back(key, std::move(frames));

        // materialize episodes: instances require a speed estimate on both sides
        for (auto& [key, frames] : closed_runs) {
            const LaneMember* leader = nullptr;
            const LaneMember* follower = nullptr;
            for (const LaneMember& m : members) {
                if (m.track_id == key.leader) leader = &m;
                if (m.track_id == key.follower) follower = &m;
            }
            CarFollowingEpisode ep;
            ep.nema_phase = lane.nema_phase;
            ep.lane_id = lane_id;
            ep.leader_id = key.leader;
            ep.follower_id = key.follower;
            for (const std::int64_t f : frames) {
                const auto lv = leader->speed_by_frame.find(f);
                const auto fv = follower->speed_by_frame.find(f);
                if (lv == leader->speed_by_frame.end() || fv == follower->speed_by_frame.end())
                    continue;
                const double spacing = weighted_distance(cal, leader->centroid_by_frame.at(f),
                                                         follower->centroid_by_frame.at(f));
                if (!(spacing > 0.0)) continue;
                ep.instances.push_back(
                    {f, lv->second, fv->second, spacing, lv->second - fv->second});
            }
            if (ep.instances.size() >= static_cast<std::size_t>(min_instances))
                episodes.push_back(std::move(ep));
        }
    }

    std::sort(episodes.begin(), episodes.end(),
              [](const CarFollowingEpisode& a, const CarFollowingEpisode& b) {
                  if (a.lane_id != b.lane_id) return a.lane_id < b.lane_id;
                  if (a.leader_id != b.leader_id) return a.leader_id < b.leader_id;
                  if (a.follower_id != b.follower_id) return a.follower_id < b.follower_id;
                  return a.instances.front().frame < b.instances.front().frame;
              });
    return episodes;
}

}  // namespace speedcal
