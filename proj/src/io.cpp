#include "speedcal/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "speedcal/errors.hpp"

namespace speedcal {

using nlohmann::json;

namespace {

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

json parse_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string(what) + " file not found: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw FormatError(std::string(what) + " file is not valid JSON: " + path.string());
    return j;
}

Vec2 json_point(const json& j, const char* context) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw FormatError(std::string(context) + ": expected a [x, y] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<Vec2> json_points(const json& j, const char* context) {
    if (!j.is_array()) throw FormatError(std::string(context) + ": expected an array of points");
    std::vector<Vec2> pts;
    pts.reserve(j.size());
    for (const json& p : j) pts.push_back(json_point(p, context));
    return pts;
}

json point_to_json(Vec2 p) { return json::array({p.x, p.y}); }

json points_to_json(std::span<const Vec2> pts) {
    json arr = json::array();
    for (const Vec2& p : pts) arr.push_back(point_to_json(p));
    return arr;
}

double get_number(const json& j, const char* key, const char* context) {
    if (!j.contains(key) || !j[key].is_number())
        throw FormatError(std::string(context) + ": missing numeric field '" + key + "'");
    return j[key].get<double>();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw ConfigError("write failed: " + path.string());
}

json provenance_to_json(const Provenance& p) {
    return {{"version", p.version}, {"config_hash", p.config_hash}, {"seed", p.seed}};
}

json mpp_to_json(const MppCalibration& cal) {
    return {{"mpp_x_min", cal.mpp_x_min}, {"mpp_x_max", cal.mpp_x_max},
            {"mpp_y_min", cal.mpp_y_min}, {"mpp_y_max", cal.mpp_y_max},
            {"x_min", cal.x_min},         {"x_max", cal.x_max},
            {"y_min", cal.y_min},         {"y_max", cal.y_max}};
}

MppCalibration mpp_from_json(const json& j, const char* context) {
    MppCalibration cal;
    cal.mpp_x_min = get_number(j, "mpp_x_min", context);
    cal.mpp_x_max = get_number(j, "mpp_x_max", context);
    cal.mpp_y_min = get_number(j, "mpp_y_min", context);
    cal.mpp_y_max = get_number(j, "mpp_y_max", context);
    cal.x_min = get_number(j, "x_min", context);
    cal.x_max = get_number(j, "x_max", context);
    cal.y_min = get_number(j, "y_min", context);
    cal.y_max = get_number(j, "y_max", context);
    validate(cal);
    return cal;
}

json matrix_to_json(const Homography& h) {
    return json::array({json::array({h.m[0], h.m[1], h.m[2]}),
                        json::array({h.m[3], h.m[4], h.m[5]}),
                        json::array({h.m[6], h.m[7], h.m[8]})});
}

Homography matrix_from_json(const json& j, const char* context) {
    if (!j.is_array() || j.size() != 3)
        throw FormatError(std::string(context) + ": expected a 3x3 matrix");
    Homography h;
    for (int r = 0; r < 3; ++r) {
        if (!j[r].is_array() || j[r].size() != 3)
            throw FormatError(std::string(context) + ": expected a 3x3 matrix");
        for (int c = 0; c < 3; ++c) {
            if (!j[r][c].is_number())
                throw FormatError(std::string(context) + ": matrix entries must be numbers");
            h.m[3 * r + c] = j[r][c].get<double>();
        }
    }
    validate(h);
    return h;
}

std::vector<ReferenceSegment> segments_from_json(const json& j, const char* context) {
    if (!j.is_array())
        throw FormatError(std::string(context) + ": expected an array of segments");
    std::vector<ReferenceSegment> segs;
    for (const json& s : j) {
        ReferenceSegment seg;
        if (!s.contains("a") || !s.contains("b"))
            throw FormatError(std::string(context) + ": segment needs 'a' and 'b' endpoints");
        seg.a = json_point(s["a"], context);
        seg.b = json_point(s["b"], context);
        seg.true_length = get_number(s, "true_length_m", context);
        if (!(seg.true_length > 0.0))
            throw FormatError(std::string(context) + ": true_length_m must be positive");
        segs.push_back(seg);
    }
    return segs;
}

json segments_to_json(std::span<const ReferenceSegment> segs) {
    json arr = json::array();
    for (const ReferenceSegment& s : segs)
        arr.push_back({{"a", point_to_json(s.a)},
                       {"b", point_to_json(s.b)},
                       {"true_length_m", s.true_length}});
    return arr;
}

VirtualLane lane_from_json(const json& j) {
    VirtualLane lane;
    if (!j.contains("lane_id") || !j["lane_id"].is_string())
        throw FormatError("lane: missing string field 'lane_id'");
    lane.lane_id = j["lane_id"].get<std::string>();
    lane.nema_phase = static_cast<int>(get_number(j, "nema_phase", "lane"));
    lane.entry_zone.vertices = json_points(j.value("entry_zone", json::array()), "entry_zone");
    lane.exit_zone.vertices = json_points(j.value("exit_zone", json::array()), "exit_zone");
    lane.centerline = json_points(j.value("centerline", json::array()), "centerline");
    validate(lane);
    return lane;
}

json lane_to_json(const VirtualLane& lane) {
    return {{"lane_id", lane.lane_id},
            {"nema_phase", lane.nema_phase},
            {"entry_zone", points_to_json(lane.entry_zone.vertices)},
            {"exit_zone", points_to_json(lane.exit_zone.vertices)},
            {"centerline", points_to_json(lane.centerline)}};
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) { return fmt("%016llx", static_cast<unsigned long long>(v)); }

std::string provenance_header(const Provenance& p) {
    return fmt("# speedcal %s\n# config_hash=%s seed=%llu\n", p.version.c_str(),
               p.config_hash.c_str(), static_cast<unsigned long long>(p.seed));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("file not found: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GeometryConfig load_geometry_config(const std::filesystem::path& path) {
    const json j = parse_json_file(path, "geometry config");
    GeometryConfig config;
    if (!j.contains("correspondences") || !j["correspondences"].is_array())
        throw FormatError("geometry config: missing 'correspondences' array");
    for (const json& c : j["correspondences"]) {
        if (!c.contains("source") || !c.contains("target"))
            throw FormatError("geometry config: correspondence needs 'source' and 'target'");
        config.correspondences.push_back(
            {json_point(c["source"], "correspondence source"),
             json_point(c["target"], "correspondence target")});
    }
    if (!j.contains("region")) throw FormatError("geometry config: missing 'region'");
    config.region.x_min = get_number(j["region"], "x_min", "region");
    config.region.x_max = get_number(j["region"], "x_max", "region");
    config.region.y_min = get_number(j["region"], "y_min", "region");
    config.region.y_max = get_number(j["region"], "y_max", "region");
    const std::string space = j.value("segments_space", std::string("birdseye"));
    if (space != "birdseye" && space != "camera")
        throw FormatError("geometry config: segments_space must be 'birdseye' or 'camera'");
    config.segments_in_camera_space = space == "camera";
    config.segments_x = segments_from_json(j.value("segments_x", json::array()), "segments_x");
    config.segments_y = segments_from_json(j.value("segments_y", json::array()), "segments_y");
    return config;
}

void save_geometry_config(const std::filesystem::path& path, const GeometryConfig& config) {
    json corr = json::array();
    for (const PointCorrespondence& c : config.correspondences)
        corr.push_back({{"source", point_to_json(c.source)}, {"target", point_to_json(c.target)}});
    const json j = {{"correspondences", corr},
                    {"region",
                     {{"x_min", config.region.x_min},
                      {"x_max", config.region.x_max},
                      {"y_min", config.region.y_min},
                      {"y_max", config.region.y_max}}},
                    {"segments_space", config.segments_in_camera_space ? "camera" : "birdseye"},
                    {"segments_x", segments_to_json(config.segments_x)},
                    {"segments_y", segments_to_json(config.segments_y)}};
    write_file(path, j.dump(2) + "\n");
}

DerivedGeometry derive_geometry(const GeometryConfig& config) {
    DerivedGeometry out;
    out.homography = estimate_homography(config.correspondences);
    std::vector<ReferenceSegment> sx = config.segments_x;
    std::vector<ReferenceSegment> sy = config.segments_y;
    if (config.segments_in_camera_space) {
        for (ReferenceSegment& s : sx) {
            s.a = transform_point(out.homography, s.a);
            s.b = transform_point(out.homography, s.b);
        }
        for (ReferenceSegment& s : sy) {
            s.a = transform_point(out.homography, s.a);
            s.b = transform_point(out.homography, s.b);
        }
    }
    out.mpp = calibrate_mpp(sx, sy, config.region);
    return out;
}

void save_homography(const std::filesystem::path& path, const Homography& h,
                     const Provenance& prov) {
    const json j = {{"provenance", provenance_to_json(prov)}, {"matrix", matrix_to_json(h)}};
    write_file(path, j.dump(2) + "\n");
}

Homography load_homography(const std::filesystem::path& path) {
    const json j = parse_json_file(path, "homography");
    if (!j.contains("matrix")) throw FormatError("homography file: missing 'matrix'");
    return matrix_from_json(j["matrix"], "homography");
}

void save_mpp(const std::filesystem::path& path, const MppCalibration& cal,
              const Provenance& prov) {
    json j = mpp_to_json(cal);
    j["provenance"] = provenance_to_json(prov);
    write_file(path, j.dump(2) + "\n");
}

MppCalibration load_mpp(const std::filesystem::path& path) {
    return mpp_from_json(parse_json_file(path, "MPP calibration"), "MPP calibration");
}

std::vector<VirtualLane> load_lanes(const std::filesystem::path& path) {
    const json j = parse_json_file(path, "lanes");
    if (!j.contains("lanes") || !j["lanes"].is_array())
        throw FormatError("lanes file: missing 'lanes' array");
    std::vector<VirtualLane> lanes;
    for (const json& lj : j["lanes"]) lanes.push_back(lane_from_json(lj));
    if (lanes.empty()) throw FormatError("lanes file: no lanes defined");
    return lanes;
}

void save_lanes(const std::filesystem::path& path, std::span<const VirtualLane> lanes) {
    json arr = json::array();
    for (const VirtualLane& lane : lanes) arr.push_back(lane_to_json(lane));
    write_file(path, json{{"lanes", arr}}.dump(2) + "\n");
}

void save_detections(std::ostream& out, std::span<const DetectionRecord> records,
                     const Provenance& prov) {
    out << provenance_header(prov);
    out << "# columns: frame,track_id,left,top,width,height,class[,confidence]\n";
    for (const DetectionRecord& r : records) {
        out << fmt("%lld,%lld,%.10f,%.10f,%.10f,%.10f,%s", static_cast<long long>(r.frame),
                   static_cast<long long>(r.track_id), r.left, r.top, r.width, r.height,
                   r.class_label.c_str());
        if (r.confidence) out << fmt(",%.6f", *r.confidence);
        out << '\n';
    }
}

void save_speed_profiles(std::ostream& out,
                         const std::map<std::int64_t, SpeedProfile>& profiles,
                         const Provenance& prov) {
    out << provenance_header(prov);
    if (!profiles.empty()) out << fmt("# fps=%.6g\n", profiles.begin()->second.fps);
    out << "# columns: track_id,frame,raw_mps,smoothed_mps,gap_frames\n";
    for (const auto& [id, profile] : profiles) {
        out << fmt("# track %lld: samples=%zu dropped_gap_samples=%zu extrapolated_samples=%zu",
                   static_cast<long long>(id), profile.samples.size(),
                   profile.dropped_gap_samples, profile.extrapolated_samples);
        if (profile.smoothing_window_seconds)
            out << fmt(" smoothing_window_s=%.6g", *profile.smoothing_window_seconds);
        out << '\n';
        for (const SpeedSample& s : profile.samples) {
            out << fmt("%lld,%lld,%.9f,", static_cast<long long>(id),
                       static_cast<long long>(s.frame), s.raw_speed);
            if (s.smoothed_speed) out << fmt("%.9f", *s.smoothed_speed);
            out << fmt(",%lld\n", static_cast<long long>(s.gap_frames));
        }
    }
}

void save_true_speeds(std::ostream& out, std::span<const TrueSpeedSample> samples, double fps,
                      const Provenance& prov) {
    out << provenance_header(prov);
    out << "# columns: track_id,timestamp_s,speed_mps\n";
    for (const TrueSpeedSample& s : samples)
        out << fmt("%lld,%.9f,%.9f\n", static_cast<long long>(s.track_id),
                   static_cast<double>(s.frame) / fps, s.speed);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

}  // namespace

GroundTruthTrace load_ground_truth(const std::filesystem::path& path,
                                   std::optional<std::int64_t> track) {
    std::ifstream in(path);
    if (!in) throw ConfigError("ground-truth file not found: " + path.string());
    GroundTruthTrace trace;
    std::string line;
    std::size_t line_no = 0;
    std::int64_t seen_track = -1;
    bool multi_track_conflict = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> f = split_line(line);
        try {
            if (f.size() == 2) {
                trace.samples.emplace_back(std::stod(f[0]), std::stod(f[1]));
            } else if (f.size() == 3) {
                const std::int64_t id = std::stoll(f[0]);
                if (track && id != *track) continue;
                if (!track) {
                    if (seen_track >= 0 && id != seen_track) multi_track_conflict = true;
                    seen_track = id;
                }
                trace.samples.emplace_back(std::stod(f[1]), std::stod(f[2]));
            } else {
                throw FormatError(line_no, "expected 2 or 3 comma-separated fields");
            }
        } catch (const std::invalid_argument&) {
            throw FormatError(line_no, "malformed ground-truth row");
        }
    }
    if (multi_track_conflict)
        throw ConfigError("ground-truth file holds several tracks; select one with "
                          "ground_truth_track");
    if (trace.samples.empty())
        throw ConfigError("ground-truth file has no usable rows: " + path.string());
    // timestamps arrive in file order; the formats above are frame/time ordered
    double dt_sum = 0.0;
    std::size_t dt_count = 0;
    for (std::size_t i = 1; i < trace.samples.size(); ++i) {
        dt_sum += trace.samples[i].first - trace.samples[i - 1].first;
        ++dt_count;
    }
    if (dt_count > 0 && dt_sum > 0.0)
        trace.source_rate = static_cast<double>(dt_count) / dt_sum;
    validate(trace);
    return trace;
}

std::vector<std::int64_t> ground_truth_tracks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("ground-truth file not found: " + path.string());
    std::vector<std::int64_t> tracks;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> f = split_line(line);
        if (f.size() != 3) continue;
        try {
            const std::int64_t id = std::stoll(f[0]);
            if (std::find(tracks.begin(), tracks.end(), id) == tracks.end())
                tracks.push_back(id);
        } catch (const std::invalid_argument&) {
            continue;
        }
    }
    std::sort(tracks.begin(), tracks.end());
    return tracks;
}

void save_episodes(std::ostream& out, std::span<const CarFollowingEpisode> episodes,
                   const Provenance& prov) {
    out << provenance_header(prov);
    out << "# episode,phase,lane_id,leader_id,follower_id,n_instances\n";
    out << "# instance,frame,v_leader_mps,v_follower_mps,dx_m,dv_mps\n";
    for (const CarFollowingEpisode& ep : episodes) {
        out << fmt("episode,%d,%s,%lld,%lld,%zu\n", ep.nema_phase, ep.lane_id.c_str(),
                   static_cast<long long>(ep.leader_id), static_cast<long long>(ep.follower_id),
                   ep.instances.size());
        for (const EpisodeInstance& inst : ep.instances)
            out << fmt("instance,%lld,%.9f,%.9f,%.9f,%.9f\n",
                       static_cast<long long>(inst.frame), inst.leader_speed,
                       inst.follower_speed, inst.spacing, inst.speed_difference);
    }
}

std::vector<CarFollowingEpisode> load_episodes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("episode file not found: " + path.string());
    std::vector<CarFollowingEpisode> episodes;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> f = split_line(line);
        try {
            if (f.at(0) == "episode") {
                if (f.size() != 6) throw FormatError(line_no, "bad episode header row");
                CarFollowingEpisode ep;
                ep.nema_phase = std::stoi(f[1]);
                ep.lane_id = f[2];
                ep.leader_id = std::stoll(f[3]);
                ep.follower_id = std::stoll(f[4]);
                episodes.push_back(std::move(ep));
            } else if (f.at(0) == "instance") {
                if (f.size() != 6 || episodes.empty())
                    throw FormatError(line_no, "instance row outside an episode");
                episodes.back().instances.push_back({std::stoll(f[1]), std::stod(f[2]),
                                                     std::stod(f[3]), std::stod(f[4]),
                                                     std::stod(f[5])});
            } else {
                throw FormatError(line_no, "unknown row type '" + f.at(0) + "'");
            }
        } catch (const std::invalid_argument&) {
            throw FormatError(line_no, "malformed episode row");
        }
    }
    return episodes;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    const json j = parse_json_file(path, "scenario");
    ScenarioSpec spec;
    spec.fps = j.value("fps", 30.0);
    spec.duration_s = get_number(j, "duration_s", "scenario");
    spec.jitter_sigma = j.value("jitter_sigma", 0.0);
    spec.seed = j.value("seed", std::uint64_t{1});
    if (!j.contains("birdseye_to_camera"))
        throw FormatError("scenario: missing 'birdseye_to_camera' matrix");
    spec.birdseye_to_camera = matrix_from_json(j["birdseye_to_camera"], "scenario");
    if (!j.contains("mpp")) throw FormatError("scenario: missing 'mpp'");
    spec.mpp = mpp_from_json(j["mpp"], "scenario mpp");
    if (!j.contains("lanes") || !j["lanes"].is_array())
        throw FormatError("scenario: missing 'lanes' array");
    for (const json& lj : j["lanes"]) spec.lanes.push_back(lane_from_json(lj));
    if (j.contains("box_sizes")) {
        spec.box_sizes.clear();
        for (const auto& [cls, size] : j["box_sizes"].items())
            spec.box_sizes[cls] = json_point(size, "box_sizes");
    }
    if (!j.contains("schedule") || !j["schedule"].is_array())
        throw FormatError("scenario: missing 'schedule' array");
    for (const json& vj : j["schedule"]) {
        ScheduledVehicle veh;
        veh.track_id = static_cast<std::int64_t>(get_number(vj, "track_id", "schedule"));
        if (!vj.contains("lane_id") || !vj["lane_id"].is_string())
            throw FormatError("schedule: missing string field 'lane_id'");
        veh.lane_id = vj["lane_id"].get<std::string>();
        veh.entry_time_s = vj.value("entry_time_s", 0.0);
        veh.start_offset_m = vj.value("start_offset_m", 0.0);
        veh.class_label = vj.value("class", std::string("car"));
        if (!vj.contains("profile") || !vj["profile"].is_object())
            throw FormatError("schedule: missing 'profile' object");
        const json& pj = vj["profile"];
        const std::string type = pj.value("type", std::string("constant"));
        SpeedProfileSpec& prof = veh.profile;
        if (type == "constant") {
            prof.kind = SpeedProfileSpec::Kind::Constant;
            prof.v0 = get_number(pj, "v", "constant profile");
        } else if (type == "ramp") {
            prof.kind = SpeedProfileSpec::Kind::Ramp;
            prof.v0 = get_number(pj, "v0", "ramp profile");
            prof.v1 = get_number(pj, "v1", "ramp profile");
            prof.t0 = get_number(pj, "t0", "ramp profile");
            prof.t1 = get_number(pj, "t1", "ramp profile");
        } else if (type == "step") {
            prof.kind = SpeedProfileSpec::Kind::Step;
            prof.v0 = get_number(pj, "v0", "step profile");
            prof.v1 = get_number(pj, "v1", "step profile");
            prof.t0 = get_number(pj, "t_step", "step profile");
        } else if (type == "ghr_follower") {
            prof.kind = SpeedProfileSpec::Kind::GhrFollower;
            prof.ghr.c = get_number(pj, "c", "ghr_follower profile");
            prof.ghr.m = get_number(pj, "m", "ghr_follower profile");
            prof.ghr.l = get_number(pj, "l", "ghr_follower profile");
            prof.ghr.T = get_number(pj, "T", "ghr_follower profile");
            prof.initial_spacing = get_number(pj, "initial_spacing", "ghr_follower profile");
        } else {
            throw FormatError("schedule: unknown profile type '" + type + "'");
        }
        spec.schedule.push_back(std::move(veh));
    }
    return spec;
}

SessionConfig load_session_config(const std::filesystem::path& path) {
    const std::string raw = read_file(path);
    const json j = json::parse(raw, nullptr, false);
    if (j.is_discarded())
        throw ConfigError("session config is not valid JSON: " + path.string());

    SessionConfig config;
    config.base_dir = path.has_parent_path() ? path.parent_path() : ".";
    config.config_hash = hex64(fnv1a64(raw));

    if (j.contains("paths")) {
        const json& p = j["paths"];
        auto get_path = [&](const char* key) -> std::filesystem::path {
            if (!p.contains(key)) return {};
            if (!p[key].is_string())
                throw ConfigError(std::string("session config: paths.") + key +
                                  " must be a string");
            return std::filesystem::path(p[key].get<std::string>());
        };
        config.detections = get_path("detections");
        config.geometry = get_path("geometry");
        config.homography = get_path("homography");
        config.mpp = get_path("mpp");
        config.lanes = get_path("lanes");
        config.ground_truth = get_path("ground_truth");
    }

    config.fps = j.value("fps", 30.0);
    if (!(config.fps > 0.0)) throw ConfigError("session config: fps must be positive");
    if (j.contains("smoothing_window_s")) {
        if (j["smoothing_window_s"].is_null())
            config.smoothing_window_s.reset();
        else
            config.smoothing_window_s = j["smoothing_window_s"].get<double>();
    }
    if (config.smoothing_window_s && !(*config.smoothing_window_s > 0.0))
        throw ConfigError("session config: smoothing_window_s must be positive");
    config.max_gap_s = j.value("max_gap_s", 0.5);
    if (!(config.max_gap_s > 0.0)) throw ConfigError("session config: max_gap_s must be positive");

    if (j.contains("min_instances")) {
        config.min_instances.clear();
        if (j["min_instances"].is_array())
            for (const json& v : j["min_instances"])
                config.min_instances.push_back(v.get<int>());
        else
            config.min_instances.push_back(j["min_instances"].get<int>());
    }
    for (int mi : config.min_instances)
        if (mi < 2) throw ConfigError("session config: min_instances entries must be >= 2");
    config.min_episodes = j.value("min_episodes", 3);
    if (config.min_episodes < 1)
        throw ConfigError("session config: min_episodes must be >= 1");

    if (j.contains("confidence_threshold") && !j["confidence_threshold"].is_null())
        config.confidence_threshold = j["confidence_threshold"].get<double>();
    if (j.contains("class_filter"))
        for (const json& v : j["class_filter"])
            config.class_filter.push_back(v.get<std::string>());
    if (j.contains("stationary_clamp_mps") && !j["stationary_clamp_mps"].is_null())
        config.stationary_clamp = j["stationary_clamp_mps"].get<double>();
    config.t0_offset_s = j.value("t0_offset_s", 0.0);
    config.auto_offset = j.value("auto_offset", false);
    if (j.contains("ground_truth_track") && !j["ground_truth_track"].is_null())
        config.ground_truth_track = j["ground_truth_track"].get<std::int64_t>();
    if (j.contains("appearance_labels"))
        for (const auto& [key, value] : j["appearance_labels"].items())
            config.appearance_labels[std::stoll(key)] = value.get<std::string>();

    if (j.contains("optimizer")) {
        const json& o = j["optimizer"];
        config.optimizer_seed = o.value("seed", std::uint64_t{12345});
        config.optimizer_starts = o.value("starts", 16);
        config.optimizer_budget = o.value("budget", 500);
        if (config.optimizer_starts < 1 || config.optimizer_budget < 10)
            throw ConfigError("session config: optimizer starts/budget out of range");
    }
    return config;
}

std::filesystem::path resolve_path(const SessionConfig& config,
                                   const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute() || p == "-") return p;
    return config.base_dir / p;
}

void require_file(const std::filesystem::path& path, const std::string& what) {
    if (path.empty())
        throw ConfigError("session config does not name a " + what + " file");
    if (!std::filesystem::exists(path))
        throw ConfigError(what + " file does not exist: " + path.string());
}

}  // namespace speedcal
