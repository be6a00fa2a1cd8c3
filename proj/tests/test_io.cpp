#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "speedcal/errors.hpp"
#include "speedcal/io.hpp"

using namespace speedcal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("speedcal-io-" + std::to_string(::getpid()) + "-" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

}  // namespace

TEST_CASE("homography and MPP artifacts round trip") {
    TempDir dir;
    Homography h;
    h.m = {1.2, 0.08, 14.0, -0.05, 1.1, -7.0, 2.0e-4, 1.1e-4, 1.0};
    const Provenance prov{kVersion, "cafe", 7};
    save_homography(dir.path / "h.json", h, prov);
    const Homography h2 = load_homography(dir.path / "h.json");
    for (int i = 0; i < 9; ++i) CHECK(h.m[i] == h2.m[i]);

    const MppCalibration cal{0.04, 0.03, 0.02, 0.031, 0, 1000, 0, 800};
    save_mpp(dir.path / "mpp.json", cal, prov);
    const MppCalibration cal2 = load_mpp(dir.path / "mpp.json");
    CHECK(cal2.mpp_x_min == cal.mpp_x_min);
    CHECK(cal2.mpp_y_max == cal.mpp_y_max);
    CHECK(cal2.x_max == cal.x_max);
}

TEST_CASE("geometry config loads and validates") {
    TempDir dir;
    write(dir.path / "geom.json", R"({
      "correspondences": [
        {"source": [0, 0], "target": [0, 0]},
        {"source": [100, 0], "target": [90, 5]},
        {"source": [100, 100], "target": [95, 95]},
        {"source": [0, 100], "target": [5, 90]}
      ],
      "region": {"x_min": 0, "x_max": 1000, "y_min": 0, "y_max": 800},
      "segments_x": [
        {"a": [0, 400], "b": [60, 400], "true_length_m": 2.75},
        {"a": [940, 400], "b": [1040, 400], "true_length_m": 2.75}
      ],
      "segments_y": [
        {"a": [500, -65], "b": [500, 65], "true_length_m": 2.75},
        {"a": [500, 755], "b": [500, 845], "true_length_m": 2.75}
      ]
    })");
    const GeometryConfig gc = load_geometry_config(dir.path / "geom.json");
    CHECK(gc.correspondences.size() == 4);
    CHECK_FALSE(gc.segments_in_camera_space);
    CHECK(gc.segments_x.size() == 2);
    CHECK(gc.region.x_max == 1000);

    write(dir.path / "bad.json", "{ not json");
    CHECK_THROWS_AS(load_geometry_config(dir.path / "bad.json"), FormatError);
    CHECK_THROWS_AS(load_geometry_config(dir.path / "missing.json"), ConfigError);
}

TEST_CASE("lane file round trip with validation") {
    TempDir dir;
    VirtualLane lane;
    lane.lane_id = "EB";
    lane.nema_phase = 2;
    lane.entry_zone.vertices = {{0, 460}, {80, 460}, {80, 540}, {0, 540}};
    lane.exit_zone.vertices = {{920, 460}, {1000, 460}, {1000, 540}, {920, 540}};
    lane.centerline = {{0, 500}, {1000, 500}};
    save_lanes(dir.path / "lanes.json", std::vector<VirtualLane>{lane});
    const auto lanes = load_lanes(dir.path / "lanes.json");
    REQUIRE(lanes.size() == 1);
    CHECK(lanes[0].lane_id == "EB");
    CHECK(lanes[0].nema_phase == 2);
    CHECK(lanes[0].centerline.size() == 2);

    // invalid phase rejected at load
    write(dir.path / "bad_lanes.json", R"({"lanes": [{
        "lane_id": "x", "nema_phase": 11,
        "entry_zone": [[0,0],[1,0],[1,1]],
        "exit_zone": [[5,5],[6,5],[6,6]],
        "centerline": [[0,0],[10,10]]}]})");
    CHECK_THROWS_AS(load_lanes(dir.path / "bad_lanes.json"), Error);
}

TEST_CASE("ground truth loader: two and three column forms") {
    TempDir dir;
    write(dir.path / "gt2.csv", "# comment\n0.0,5.0\n0.5,6.0\n1.0,7.0\n");
    const GroundTruthTrace t2 = load_ground_truth(dir.path / "gt2.csv");
    REQUIRE(t2.samples.size() == 3);
    CHECK(t2.samples[1].second == doctest::Approx(6.0));
    CHECK(t2.source_rate == doctest::Approx(2.0));

    write(dir.path / "gt3.csv", "1,0.0,5.0\n1,0.5,6.0\n2,0.0,8.0\n2,0.5,9.0\n");
    const GroundTruthTrace track2 = load_ground_truth(dir.path / "gt3.csv", 2);
    REQUIRE(track2.samples.size() == 2);
    CHECK(track2.samples[0].second == doctest::Approx(8.0));
    CHECK_THROWS_AS(load_ground_truth(dir.path / "gt3.csv"), ConfigError);

    const auto tracks = ground_truth_tracks(dir.path / "gt3.csv");
    REQUIRE(tracks.size() == 2);
    CHECK(tracks[0] == 1);
    CHECK(tracks[1] == 2);
}

TEST_CASE("episode file round trip") {
    TempDir dir;
    CarFollowingEpisode ep;
    ep.nema_phase = 2;
    ep.lane_id = "EB";
    ep.leader_id = 4;
    ep.follower_id = 9;
    for (int k = 0; k < 5; ++k)
        ep.instances.push_back({100 + k, 9.0 + k * 0.125, 8.5, 14.0 - k * 0.25, 0.5 + k * 0.125});
    {
        std::ofstream out(dir.path / "eps.csv");
        save_episodes(out, std::vector<CarFollowingEpisode>{ep}, Provenance{});
    }
    const auto loaded = load_episodes(dir.path / "eps.csv");
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].nema_phase == 2);
    CHECK(loaded[0].lane_id == "EB");
    CHECK(loaded[0].leader_id == 4);
    CHECK(loaded[0].follower_id == 9);
    REQUIRE(loaded[0].instances.size() == 5);
    CHECK(loaded[0].instances[3].spacing == doctest::Approx(13.25).epsilon(1e-9));
}

TEST_CASE("session config: defaults, overrides, and errors") {
    TempDir dir;
    write(dir.path / "session.json", R"({
      "fps": 29.97,
      "paths": {"detections": "det.csv", "lanes": "lanes.json"},
      "min_instances": [30, 45],
      "smoothing_window_s": 0.5,
      "optimizer": {"seed": 321, "starts": 8, "budget": 200}
    })");
    const SessionConfig config = load_session_config(dir.path / "session.json");
    CHECK(config.fps == doctest::Approx(29.97));
    CHECK(config.min_instances == std::vector<int>{30, 45});
    CHECK(config.smoothing_window_s == doctest::Approx(0.5));
    CHECK(config.optimizer_seed == 321);
    CHECK(config.optimizer_starts == 8);
    CHECK(config.max_gap_s == doctest::Approx(0.5));  // default
    CHECK(resolve_path(config, config.detections) == dir.path / "det.csv");
    CHECK(config.config_hash.size() == 16);

    write(dir.path / "bad.json", R"({"fps": -3})");
    CHECK_THROWS_AS(load_session_config(dir.path / "bad.json"), ConfigError);
    write(dir.path / "null_smooth.json", R"({"smoothing_window_s": null})");
    CHECK_FALSE(load_session_config(dir.path / "null_smooth.json").smoothing_window_s);

    CHECK_THROWS_AS(require_file(dir.path / "nope.csv", "detections"), ConfigError);
}

TEST_CASE("derive_geometry: camera-space segments are transformed before fitting") {
    Homography truth;
    truth.m = {1.1, 0.05, 20.0, -0.03, 0.95, 10.0, 4.0e-5, 2.0e-5, 1.0};

    GeometryConfig bev_config;
    bev_config.region = {0, 1000, 0, 800};
    const std::vector<Vec2> sources = {{50, 50}, {900, 80}, {850, 700}, {60, 650}, {430, 390}};
    for (const Vec2 s : sources)
        bev_config.correspondences.push_back({s, transform_point(truth, s)});
    bev_config.segments_x = {{{0, 400}, {60, 400}, 2.75}, {{940, 400}, {1040, 400}, 2.75}};
    bev_config.segments_y = {{{500, -65}, {500, 65}, 2.75}, {{500, 755}, {500, 845}, 2.75}};

    GeometryConfig cam_config = bev_config;
    cam_config.segments_in_camera_space = true;
    const Homography inv = inverse(truth);
    auto to_camera = [&](ReferenceSegment& s) {
        s.a = transform_point(inv, s.a);
        s.b = transform_point(inv, s.b);
    };
    for (ReferenceSegment& s : cam_config.segments_x) to_camera(s);
    for (ReferenceSegment& s : cam_config.segments_y) to_camera(s);

    const DerivedGeometry from_bev = derive_geometry(bev_config);
    const DerivedGeometry from_cam = derive_geometry(cam_config);
    CHECK(from_cam.mpp.mpp_x_min == doctest::Approx(from_bev.mpp.mpp_x_min).epsilon(1e-9));
    CHECK(from_cam.mpp.mpp_x_max == doctest::Approx(from_bev.mpp.mpp_x_max).epsilon(1e-9));
    CHECK(from_cam.mpp.mpp_y_min == doctest::Approx(from_bev.mpp.mpp_y_min).epsilon(1e-9));
    CHECK(from_cam.mpp.mpp_y_max == doctest::Approx(from_bev.mpp.mpp_y_max).epsilon(1e-9));
}

TEST_CASE("provenance header and hashing are stable") {
    const Provenance prov{"0.1.0", "deadbeef00000000", 42};
    const std::string header = provenance_header(prov);
    CHECK(header.find("# speedcal 0.1.0") != std::string::npos);
    CHECK(header.find("seed=42") != std::string::npos);
    CHECK(fnv1a64("abc") == fnv1a64("abc"));
    CHECK(fnv1a64("abc") != fnv1a64("abd"));
    CHECK(hex64(fnv1a64("abc")).size() == 16);
}

TEST_CASE("scenario loader parses every profile kind") {
    TempDir dir;
    write(dir.path / "scen.json", R"({
      "fps": 30, "duration_s": 10, "jitter_sigma": 0.5, "seed": 3,
      "birdseye_to_camera": [[1,0,0],[0,1,0],[0,0,1]],
      "mpp": {"mpp_x_min": 0.04, "mpp_x_max": 0.03, "mpp_y_min": 0.02, "mpp_y_max": 0.031,
              "x_min": 0, "x_max": 1800, "y_min": 0, "y_max": 1200},
      "lanes": [{"lane_id": "EB", "nema_phase": 2,
                 "entry_zone": [[0,560],[100,560],[100,640],[0,640]],
                 "exit_zone": [[1700,560],[1800,560],[1800,640],[1700,640]],
                 "centerline": [[0,600],[1800,600]]}],
      "box_sizes": {"car": [42, 28]},
      "schedule": [
        {"track_id": 1, "lane_id": "EB", "entry_time_s": 0,
         "profile": {"type": "constant", "v": 9}},
        {"track_id": 2, "lane_id": "EB", "entry_time_s": 1,
         "profile": {"type": "ramp", "v0": 12, "v1": 6, "t0": 2, "t1": 5}},
        {"track_id": 3, "lane_id": "EB", "entry_time_s": 2,
         "profile": {"type": "step", "v0": 10, "v1": 7, "t_step": 4}},
        {"track_id": 4, "lane_id": "EB",
         "profile": {"type": "ghr_follower", "c": 1.0, "m": 0.5, "l": 1.0, "T": 0.5,
                     "initial_spacing": 12}}
      ]
    })");
    const ScenarioSpec spec = load_scenario(dir.path / "scen.json");
    CHECK(spec.schedule.size() == 4);
    CHECK(spec.schedule[0].profile.kind == SpeedProfileSpec::Kind::Constant);
    CHECK(spec.schedule[1].profile.kind == SpeedProfileSpec::Kind::Ramp);
    CHECK(spec.schedule[2].profile.kind == SpeedProfileSpec::Kind::Step);
    CHECK(spec.schedule[3].profile.kind == SpeedProfileSpec::Kind::GhrFollower);
    CHECK(spec.schedule[3].profile.initial_spacing == doctest::Approx(12.0));
    CHECK(spec.box_sizes.at("car").x == doctest::Approx(42.0));
    CHECK(spec.jitter_sigma == doctest::Approx(0.5));

    // profile shapes evaluate correctly
    CHECK(spec.schedule[1].profile.speed_at(0.0) == doctest::Approx(12.0));
    CHECK(spec.schedule[1].profile.speed_at(3.5) == doctest::Approx(9.0));
    CHECK(spec.schedule[1].profile.speed_at(7.0) == doctest::Approx(6.0));
    CHECK(spec.schedule[2].profile.speed_at(3.9) == doctest::Approx(10.0));
    CHECK(spec.schedule[2].profile.speed_at(4.1) == doctest::Approx(7.0));
}
