#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "speedcal/geometry.hpp"
#include "speedcal/ghr.hpp"
#include "speedcal/metrics.hpp"
#include "speedcal/movement.hpp"
#include "speedcal/synthgen.hpp"
#include "speedcal/trajectory.hpp"

namespace speedcal {

inline constexpr const char* kVersion = "0.1.0";

/// Stamped into every output artifact so reruns are attributable and
/// byte-identical given unchanged inputs.
struct Provenance {
    std::string version{kVersion};
    std::string config_hash{"none"};
    std::uint64_t seed{0};
};

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);
std::string provenance_header(const Provenance& p);  // '#'-prefixed lines

std::string read_file(const std::filesystem::path& path);

// --- geometry calibration config and artifacts ---------------------------

struct GeometryConfig {
    std::vector<PointCorrespondence> correspondences;
    PixelRegion region;
    bool segments_in_camera_space{false};  // transform segment endpoints first
    std::vector<ReferenceSegment> segments_x;
    std::vector<ReferenceSegment> segments_y;
};

GeometryConfig load_geometry_config(const std::filesystem::path& path);
void save_geometry_config(const std::filesystem::path& path, const GeometryConfig& config);

struct DerivedGeometry {
    Homography homography;
    MppCalibration mpp;
};

/// Estimates the homography from the config's correspondences and fits the
/// MPP model; camera-space reference segments are transformed into
/// bird's-eye space first.
DerivedGeometry derive_geometry(const GeometryConfig& config);

void save_homography(const std::filesystem::path& path, const Homography& h,
                     const Provenance& prov);
Homography load_homography(const std::filesystem::path& path);

void save_mpp(const std::filesystem::path& path, const MppCalibration& cal,
              const Provenance& prov);
MppCalibration load_mpp(const std::filesystem::path& path);

// --- lanes ----------------------------------------------------------------

std::vector<VirtualLane> load_lanes(const std::filesystem::path& path);
void save_lanes(const std::filesystem::path& path, std::span<const VirtualLane> lanes);

// --- detection / speed / episode / ground-truth streams -------------------

void save_detections(std::ostream& out, std::span<const DetectionRecord> records,
                     const Provenance& prov);

void save_speed_profiles(std::ostream& out,
                         const std::map<std::int64_t, SpeedProfile>& profiles,
                         const Provenance& prov);

void save_true_speeds(std::ostream& out, std::span<const TrueSpeedSample> samples, double fps,
                      const Provenance& prov);

/// Ground-truth speed file: `timestamp_s,speed_mps` rows, or
/// `track_id,timestamp_s,speed_mps` rows filtered by `track`.
GroundTruthTrace load_ground_truth(const std::filesystem::path& path,
                                   std::optional<std::int64_t> track = std::nullopt);
std::vector<std::int64_t> ground_truth_tracks(const std::filesystem::path& path);

void save_episodes(std::ostream& out, std::span<const CarFollowingEpisode> episodes,
                   const Provenance& prov);
std::vector<CarFollowingEpisode> load_episodes(const std::filesystem::path& path);

// --- synthetic scenario ----------------------------------------------------

ScenarioSpec load_scenario(const std::filesystem::path& path);

// --- session config --------------------------------------------------------

struct SessionConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this
    std::filesystem::path detections;
    std::filesystem::path geometry;
    std::filesystem::path homography;
    std::filesystem::path mpp;
    std::filesystem::path lanes;
    std::filesystem::path ground_truth;

    double fps{30.0};
    std::optional<double> smoothing_window_s{1.0};
    double max_gap_s{0.5};
    std::vector<int> min_instances{30, 45, 60};
    int min_episodes{3};
    std::optional<double> confidence_threshold;
    std::vector<std::string> class_filter;
    std::optional<double> stationary_clamp;
    double t0_offset_s{0.0};
    bool auto_offset{false};
    std::optional<std::int64_t> ground_truth_track;
    std::map<std::int64_t, std::string> appearance_labels;
    std::uint64_t optimizer_seed{12345};
    int optimizer_starts{16};
    int optimizer_budget{500};

    std::string config_hash{"none"};  // hash of the config file bytes
};

SessionConfig load_session_config(const std::filesystem::path& path);

/// Resolves a possibly-relative path against the config directory.
std::filesystem::path resolve_path(const SessionConfig& config,
                                   const std::filesystem::path& p);

/// Throws ConfigError naming the path when the file is missing.
void require_file(const std::filesystem::path& path, const std::string& what);

}  // namespace speedcal
