#include "speedcal/trajectory.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "speedcal/errors.hpp"

namespace speedcal {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return fields;
}

bool parse_i64(std::string_view s, std::int64_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && !s.empty();
}

bool parse_f64(std::string_view s, double& out) {
    if (s.empty()) return false;
    // std::from_chars for double is unreliable on older libstdc++; strtod via a copy.
    std::string tmp(s);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    return end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

std::string validate_record(const DetectionRecord& r) {
    if (r.frame < 0) return "frame must be non-negative";
    if (!(r.width > 0.0)) return "width must be positive";
    if (!(r.height > 0.0)) return "height must be positive";
    if (r.confidence && !(*r.confidence >= 0.0 && *r.confidence <= 1.0))
        return "confidence outside [0,1]";
    return {};
}

bool parse_csv_record(std::string_view line, DetectionRecord& rec, std::string& err) {
    const std::vector<std::string_view> f = split_csv(line);
    if (f.size() < 7 || f.size() > 8) {
        err = "expected 7 or 8 comma-separated fields, got " + std::to_string(f.size());
        return false;
    }
    if (!parse_i64(f[0], rec.frame)) { err = "bad frame field '" + std::string(f[0]) + "'"; return false; }
    if (!parse_i64(f[1], rec.track_id)) { err = "bad track_id field '" + std::string(f[1]) + "'"; return false; }
    const char* names[4] = {"left", "top", "width", "height"};
    double* slots[4] = {&rec.left, &rec.top, &rec.width, &rec.height};
    for (int i = 0; i < 4; ++i) {
        if (!parse_f64(f[2 + i], *slots[i])) {
            err = std::string("bad ") + names[i] + " field '" + std::string(f[2 + i]) + "'";
            return false;
        }
    }
    rec.class_label = std::string(f[6]);
    if (f.size() == 8 && !f[7].empty()) {
        double conf = 0.0;
        if (!parse_f64(f[7], conf)) { err = "bad confidence field '" + std::string(f[7]) + "'"; return false; }
        rec.confidence = conf;
    }
    err = validate_record(rec);
    return err.empty();
}

bool parse_json_record(std::string_view line, DetectionRecord& rec, std::string& err) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        err = "malformed JSON object";
        return false;
    }
    try {
        rec.frame = j.at("frame").get<std::int64_t>();
        rec.track_id = j.at("track_id").get<std::int64_t>();
        rec.left = j.at("left").get<double>();
        rec.top = j.at("top").get<double>();
        rec.width = j.at("width").get<double>();
        rec.height = j.at("height").get<double>();
        rec.class_label = j.at("class").get<std::string>();
        if (j.contains("confidence") && !j["confidence"].is_null())
            rec.confidence = j["confidence"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        err = e.what();
        return false;
    }
    err = validate_record(rec);
    return err.empty();
}

}  // namespace

ParseResult parse_detections(std::istream& in) {
    ParseResult result;
    std::string line;
    std::size_t line_no = 0;
    std::size_t data_lines = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view content = trim(line);
        if (content.empty() || content.front() == '#') continue;
        ++data_lines;
        DetectionRecord rec;
        std::string err;
        const bool ok = content.front() == '{' ? parse_json_record(content, rec, err)
                                               : parse_csv_record(content, rec, err);
        if (ok)
            result.records.push_back(std::move(rec));
        else
            result.issues.push_back({line_no, err});
    }
    if (data_lines == 0) throw EmptyInput("detection stream contains no data lines");
    return result;
}

std::map<std::int64_t, Trajectory> build_trajectories(std::span<const DetectionRecord> records,
                                                      const Homography& h, double fps) {
    if (!(fps > 0.0)) throw Error("fps must be positive");
    std::map<std::int64_t, Trajectory> trajs;
    for (const DetectionRecord& rec : records) {
        Trajectory& t = trajs[rec.track_id];
        t.track_id = rec.track_id;
        t.fps = fps;
        const Vec2 cam = centroid(rec);
        t.samples.push_back({rec.frame, cam, transform_point(h, cam)});
    }
    for (auto& [id, t] : trajs) {
        std::stable_sort(t.samples.begin(), t.samples.end(),
                         [](const TrajectorySample& a, const TrajectorySample& b) {
                             return a.frame < b.frame;
                         });
        for (std::size_t i = 1; i < t.samples.size(); ++i) {
            if (t.samples[i].frame == t.samples[i - 1].frame)
                throw DuplicateFrame("track " + std::to_string(id) +
                                     " has two detections in frame " +
                                     std::to_string(t.samples[i].frame));
        }
    }
    return trajs;
}

std::size_t frame_gap_count(const Trajectory& traj) {
    std::size_t gaps = 0;
    for (std::size_t i = 1; i < traj.samples.size(); ++i)
        if (traj.samples[i].frame - traj.samples[i - 1].frame > 1) ++gaps;
    return gaps;
}

void write_trajectories(std::ostream& out, const std::map<std::int64_t, Trajectory>& trajs) {
    const double fps = trajs.empty() ? 30.0 : trajs.begin()->second.fps;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "# trajectories fps=%.17g\n", fps);
    out << buf << "track_id,frame,cam_x,cam_y,bev_x,bev_y\n";
    for (const auto& [id, t] : trajs) {
        for (const TrajectorySample& s : t.samples) {
            std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%.17g,%.17g\n",
                          static_cast<long long>(id), static_cast<long long>(s.frame), s.camera.x,
                          s.camera.y, s.birdseye.x, s.birdseye.y);
            out << buf;
        }
    }
}

std::map<std::int64_t, Trajectory> read_trajectories(std::istream& in) {
    std::map<std::int64_t, Trajectory> trajs;
    std::string line;
    std::size_t line_no = 0;
    double fps = 30.0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view content = trim(line);
        if (content.empty()) continue;
        if (content.front() == '#') {
            const std::size_t pos = content.find("fps=");
            if (pos != std::string_view::npos) {
                double v = 0.0;
                if (parse_f64(trim(content.substr(pos + 4)), v)) fps = v;
            }
            continue;
        }
        if (content.rfind("track_id,", 0) == 0) continue;
        const std::vector<std::string_view> f = split_csv(content);
        std::int64_t id = 0;
        TrajectorySample s;
        if (f.size() != 6 || !parse_i64(f[0], id) || !parse_i64(f[1], s.frame) ||
            !parse_f64(f[2], s.camera.x) || !parse_f64(f[3], s.camera.y) ||
            !parse_f64(f[4], s.birdseye.x) || !parse_f64(f[5], s.birdseye.y))
            throw FormatError(line_no, "malformed trajectory row");
        Trajectory& t = trajs[id];
        t.track_id = id;
        t.fps = fps;
        t.samples.push_back(s);
    }
    for (auto& [id, t] : trajs) t.fps = fps;
    return trajs;
}

}  // namespace speedcal
