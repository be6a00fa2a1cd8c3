#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speedcal/geometry.hpp"
#include "speedcal/types.hpp"

namespace speedcal {

/// One tracked bounding box at one frame, as emitted by the upstream tracker.
struct DetectionRecord {
    std::int64_t frame{0};
    std::int64_t track_id{0};
    double left{0.0};
    double top{0.0};
    double width{0.0};
    double height{0.0};
    std::string class_label;
    std::optional<double> confidence;
};

inline Vec2 centroid(const DetectionRecord& r) {
    return {r.left + r.width / 2.0, r.top + r.height / 2.0};
}

struct TrajectorySample {
    std::int64_t frame{0};
    Vec2 camera;
    Vec2 birdseye;
};

/// Per-vehicle time-ordered centroid sequence; frames strictly increasing,
/// gaps preserved as-is.
struct Trajectory {
    std::int64_t track_id{0};
    std::vector<TrajectorySample> samples;
    double fps{30.0};
};

struct ParseIssue {
    std::size_t line{0};
    std::string message;
};

struct ParseResult {
    std::vector<DetectionRecord> records;
    std::vector<ParseIssue> issues;
};

/// Reads the detection interchange format (see README): one detection per
/// line, either comma-separated `frame,track_id,left,top,width,height,class
/// [,confidence]` or a JSON object with the same field names. Malformed
/// lines become diagnostics; a stream with no data lines at all throws
/// EmptyInput.
ParseResult parse_detections(std::istream& in);

std::map<std::int64_t, Trajectory> build_trajectories(std::span<const DetectionRecord> records,
                                                      const Homography& h, double fps);

/// Number of consecutive-sample pairs whose frame delta exceeds 1.
std::size_t frame_gap_count(const Trajectory& traj);

void write_trajectories(std::ostream& out, const std::map<std::int64_t, Trajectory>& trajs);
std::map<std::int64_t, Trajectory> read_trajectories(std::istream& in);

}  // namespace speedcal
