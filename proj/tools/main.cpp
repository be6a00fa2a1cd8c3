#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "speedcal/errors.hpp"
#include "speedcal/geometry.hpp"
#include "speedcal/ghr.hpp"
#include "speedcal/io.hpp"
#include "speedcal/metrics.hpp"
#include "speedcal/movement.hpp"
#include "speedcal/pipeline.hpp"
#include "speedcal/speed.hpp"
#include "speedcal/synthgen.hpp"
#include "speedcal/trajectory.hpp"

namespace fs = std::filesystem;
using namespace speedcal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;       // missing files, malformed configs, empty input
constexpr int kExitProcessing = 2;  // geometry/numeric failures on valid input

// Flag values layered over the session config: flag > config > default.
struct Overrides {
    std::string config_path;
    std::optional<double> fps;
    std::optional<double> smoothing_window;
    bool no_smoothing{false};
    std::optional<double> max_gap;
    std::vector<int> min_instances;
    std::optional<double> confidence;
    std::vector<std::string> classes;
    std::optional<double> clamp;
    std::optional<double> t0_offset;
    bool auto_offset{false};
    std::optional<std::int64_t> gt_track;
    std::optional<std::uint64_t> seed;
    std::optional<int> budget;
    std::optional<int> starts;
    std::optional<std::string> detections;
};

void add_common_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("-c,--config", ov.config_path, "session config (JSON)")->required();
    cmd->add_option("--fps", ov.fps, "frames per second of the source video");
}

SessionConfig load_config(const Overrides& ov) {
    SessionConfig config = load_session_config(ov.config_path);
    if (ov.fps) config.fps = *ov.fps;
    if (ov.smoothing_window) config.smoothing_window_s = *ov.smoothing_window;
    if (ov.no_smoothing) config.smoothing_window_s.reset();
    if (ov.max_gap) config.max_gap_s = *ov.max_gap;
    if (!ov.min_instances.empty()) config.min_instances = ov.min_instances;
    if (ov.confidence) config.confidence_threshold = *ov.confidence;
    if (!ov.classes.empty()) config.class_filter = ov.classes;
    if (ov.clamp) config.stationary_clamp = *ov.clamp;
    if (ov.t0_offset) config.t0_offset_s = *ov.t0_offset;
    if (ov.auto_offset) config.auto_offset = true;
    if (ov.gt_track) config.ground_truth_track = *ov.gt_track;
    if (ov.seed) config.optimizer_seed = *ov.seed;
    if (ov.budget) config.optimizer_budget = *ov.budget;
    if (ov.starts) config.optimizer_starts = *ov.starts;
    if (ov.detections) config.detections = *ov.detections;
    if (!(config.fps > 0.0)) throw ConfigError("fps must be positive");
    return config;
}

PipelineConfig pipeline_config(const SessionConfig& config) {
    PipelineConfig pc;
    pc.fps = config.fps;
    pc.max_gap_seconds = config.max_gap_s;
    pc.smoothing_window_seconds = config.smoothing_window_s;
    pc.confidence_threshold = config.confidence_threshold;
    pc.class_filter = config.class_filter;
    pc.stationary_clamp = config.stationary_clamp;
    return pc;
}

Provenance make_provenance(const SessionConfig& config, std::uint64_t seed = 0) {
    return Provenance{kVersion, config.config_hash, seed};
}

// Loads the session homography and MPP model: prefers the calibrated
// artifacts, falls back to computing them from the geometry config.
std::pair<Homography, MppCalibration> load_geometry_artifacts(const SessionConfig& config) {
    const fs::path hpath = resolve_path(config, config.homography);
    const fs::path mpath = resolve_path(config, config.mpp);
    if (!hpath.empty() && fs::exists(hpath) && !mpath.empty() && fs::exists(mpath))
        return {load_homography(hpath), load_mpp(mpath)};

    const fs::path gpath = resolve_path(config, config.geometry);
    require_file(gpath, "geometry config (no homography/MPP artifacts found either)");
    std::cerr << "note: deriving homography and MPP from " << gpath.string() << "\n";
    const DerivedGeometry derived = derive_geometry(load_geometry_config(gpath));
    return {derived.homography, derived.mpp};
}

ParseResult parse_detection_file(const SessionConfig& config) {
    const fs::path path = resolve_path(config, config.detections);
    if (path == "-") {
        return parse_detections(std::cin);
    }
    require_file(path, "detections");
    std::ifstream in(path);
    return parse_detections(in);
}

void report_parse_issues(const ParseResult& parsed) {
    for (const ParseIssue& issue : parsed.issues)
        std::cerr << "warning: detections line " << issue.line << ": " << issue.message << "\n";
}

// --- calibrate-geometry -----------------------------------------------------

int run_calibrate_geometry(const Overrides& ov, const std::string& out_homography,
                           const std::string& out_mpp) {
    const SessionConfig config = load_config(ov);
    const fs::path gpath = resolve_path(config, config.geometry);
    require_file(gpath, "geometry config");
    const GeometryConfig gc = load_geometry_config(gpath);
    const DerivedGeometry derived = derive_geometry(gc);
    const Homography& h = derived.homography;
    const MppCalibration& cal = derived.mpp;

    double max_err = 0.0;
    double mean_err = 0.0;
    for (const PointCorrespondence& c : gc.correspondences) {
        const double e = reprojection_error(h, c);
        max_err = std::max(max_err, e);
        mean_err += e;
    }
    mean_err /= static_cast<double>(gc.correspondences.size());

    const Provenance prov = make_provenance(config);
    const fs::path hpath = out_homography.empty()
                               ? (config.homography.empty() ? config.base_dir / "homography.json"
                                                            : resolve_path(config, config.homography))
                               : fs::path(out_homography);
    const fs::path mpath = out_mpp.empty()
                               ? (config.mpp.empty() ? config.base_dir / "mpp.json"
                                                     : resolve_path(config, config.mpp))
                               : fs::path(out_mpp);
    save_homography(hpath, h, prov);
    save_mpp(mpath, cal, prov);

    std::printf("correspondences: %zu  reprojection error: max %.3e px, mean %.3e px\n",
                gc.correspondences.size(), max_err, mean_err);
    std::printf("mpp x: %.6f -> %.6f m/px   mpp y: %.6f -> %.6f m/px\n", cal.mpp_x_min,
                cal.mpp_x_max, cal.mpp_y_min, cal.mpp_y_max);
    std::printf("wrote %s and %s\n", hpath.string().c_str(), mpath.string().c_str());
    return kExitOk;
}

// --- estimate-speeds ---------------------------------------------------------

int run_estimate_speeds(const Overrides& ov, const std::string& out_path, bool stream_mode) {
    const SessionConfig config = load_config(ov);
    const auto [h, cal] = load_geometry_artifacts(config);
    const Provenance prov = make_provenance(config);

    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        out_file.open(out_path, std::ios::binary);
        if (!out_file) throw ConfigError("cannot open output file: " + out_path);
        out = &out_file;
    }

    const fs::path det_path = resolve_path(config, config.detections);
    if (stream_mode || det_path == "-") {
        // incremental pass over stdin (or the file), bounded state per track
        std::istream* in = &std::cin;
        std::ifstream in_file;
        if (det_path != "-") {
            require_file(det_path, "detections");
            in_file.open(det_path);
            in = &in_file;
        }
        StreamingSpeedEstimator estimator(cal, config.fps, config.max_gap_s,
                                          config.smoothing_window_s, config.stationary_clamp);
        *out << provenance_header(prov);
        char fps_line[64];
        std::snprintf(fps_line, sizeof(fps_line), "# fps=%.6g\n", config.fps);
        *out << fps_line;
        *out << "# columns: track_id,frame,raw_mps,smoothed_mps,gap_frames\n";
        std::string line;
        std::size_t line_no = 0;
        std::size_t n_samples = 0;
        std::set<std::int64_t> vehicles;
        while (std::getline(*in, line)) {
            ++line_no;
            std::istringstream single(line);
            ParseResult parsed;
            try {
                parsed = parse_detections(single);
            } catch (const EmptyInput&) {
                continue;  // blank/comment line
            }
            if (!parsed.issues.empty()) {
                std::cerr << "warning: detections line " << line_no << ": "
                          << parsed.issues.front().message << "\n";
                continue;
            }
            const DetectionRecord& rec = parsed.records.front();
            if (!config.class_filter.empty() &&
                std::find(config.class_filter.begin(), config.class_filter.end(),
                          rec.class_label) == config.class_filter.end())
                continue;
            if (config.confidence_threshold && rec.confidence &&
                *rec.confidence < *config.confidence_threshold)
                continue;
            vehicles.insert(rec.track_id);
            const auto sample =
                estimator.push(rec.track_id, rec.frame, transform_point(h, centroid(rec)));
            if (sample) {
                ++n_samples;
                char buf[160];
                std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9f,",
                              static_cast<long long>(rec.track_id),
                              static_cast<long long>(sample->frame), sample->raw_speed);
                *out << buf;
                if (sample->smoothed_speed) {
                    std::snprintf(buf, sizeof(buf), "%.9f", *sample->smoothed_speed);
                    *out << buf;
                }
                *out << ',' << sample->gap_frames << '\n';
            }
        }
        if (vehicles.empty()) throw EmptyInput("detection stream contains no data lines");
        std::cerr << "vehicles: " << vehicles.size() << "  samples: " << n_samples
                  << "  dropped gaps: " << estimator.dropped_gap_samples()
                  << "  extrapolated: " << estimator.extrapolated_samples() << "\n";
        return kExitOk;
    }

    const ParseResult parsed = parse_detection_file(config);
    report_parse_issues(parsed);
    const PipelineResult result = run_speed_pipeline(parsed.records, h, cal,
                                                     pipeline_config(config));
    save_speed_profiles(*out, result.profiles, prov);

    std::size_t n_samples = 0;
    for (const auto& [id, p] : result.profiles) n_samples += p.samples.size();
    std::cerr << "vehicles: " << result.profiles.size() << "  samples: " << n_samples
              << "  dropped gaps: " << result.dropped_gap_samples
              << "  extrapolated: " << result.extrapolated_samples
              << "  filtered records: " << result.records_filtered << "\n";
    return kExitOk;
}

// --- calibrate-ghr -----------------------------------------------------------

int run_calibrate_ghr(const Overrides& ov, const std::string& out_path,
                      const std::string& episodes_out) {
    const SessionConfig config = load_config(ov);
    const auto [h, cal] = load_geometry_artifacts(config);
    const fs::path lanes_path = resolve_path(config, config.lanes);
    require_file(lanes_path, "lanes");
    const std::vector<VirtualLane> lanes = load_lanes(lanes_path);

    const ParseResult parsed = parse_detection_file(config);
    report_parse_issues(parsed);
    const PipelineResult pipeline = run_speed_pipeline(parsed.records, h, cal,
                                                       pipeline_config(config));

    std::vector<MovementLabel> labels;
    for (const auto& [id, traj] : pipeline.trajectories)
        labels.push_back(classify_movement(traj, lanes, cal));

    OptimizerOptions opt;
    opt.seed = config.optimizer_seed;
    opt.starts = config.optimizer_starts;
    opt.evals_per_start = config.optimizer_budget;

    std::vector<ReportSection> sections;
    std::vector<CarFollowingEpisode> all_episodes;
    for (const int& min_instances : config.min_instances) {
        const std::vector<CarFollowingEpisode> episodes = extract_episodes(
            labels, lanes, pipeline.profiles, pipeline.trajectories, cal, min_instances);
        if (!episodes_out.empty() && &min_instances == &config.min_instances.front())
            all_episodes = episodes;

        ReportSection section;
        section.min_instances = min_instances;
        double dur_sum = 0.0;
        for (const CarFollowingEpisode& ep : episodes)
            dur_sum += episode_duration_seconds(ep, config.fps);
        section.mean_episode_duration_s =
            episodes.empty() ? 0.0 : dur_sum / static_cast<double>(episodes.size());

        for (int phase = 1; phase <= 8; ++phase) {
            PhaseCalibration row;
            row.nema_phase = phase;
            std::vector<CarFollowingEpisode> phase_eps;
            for (const CarFollowingEpisode& ep : episodes)
                if (ep.nema_phase == phase) phase_eps.push_back(ep);
            row.episode_count = phase_eps.size();
            for (const CarFollowingEpisode& ep : phase_eps)
                row.instance_count += ep.instances.size();
            if (static_cast<int>(phase_eps.size()) >= config.min_episodes) {
                try {
                    row.result = calibrate(phase_eps, config.fps, opt);
                } catch (const Error& e) {
                    std::cerr << "warning: phase " << phase << " (min_instances "
                              << min_instances << "): " << e.what() << "\n";
                }
            }
            section.phases.push_back(std::move(row));
        }
        sections.push_back(std::move(section));
    }

    const std::string report = format_calibration_report(sections);
    const Provenance prov = make_provenance(config, config.optimizer_seed);
    if (out_path.empty() || out_path == "-") {
        std::cout << report;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw ConfigError("cannot open output file: " + out_path);
        out << provenance_header(prov) << report;
    }
    if (!episodes_out.empty()) {
        std::ofstream out(episodes_out, std::ios::binary);
        if (!out) throw ConfigError("cannot open output file: " + episodes_out);
        save_episodes(out, all_episodes, prov);
    }

    bool any_calibrated = false;
    for (const ReportSection& s : sections)
        for (const PhaseCalibration& p : s.phases)
            if (p.result) any_calibrated = true;
    if (!any_calibrated)
        std::cerr << "warning: no phase had enough car-following episodes to calibrate\n";
    return kExitOk;
}

// --- validate ------------------------------------------------------------------

int run_validate(const Overrides& ov, const std::string& out_path,
                 const std::string& plot_path) {
    const SessionConfig config = load_config(ov);
    const auto [h, cal] = load_geometry_artifacts(config);
    const fs::path gt_path = resolve_path(config, config.ground_truth);
    require_file(gt_path, "ground truth");

    const ParseResult parsed = parse_detection_file(config);
    report_parse_issues(parsed);
    const PipelineResult pipeline = run_speed_pipeline(parsed.records, h, cal,
                                                       pipeline_config(config));

    // which tracks to validate: the configured one, or every track that has
    // both a trace and a profile
    std::vector<std::int64_t> tracks;
    if (config.ground_truth_track) {
        tracks.push_back(*config.ground_truth_track);
    } else {
        tracks = ground_truth_tracks(gt_path);
        if (tracks.empty()) tracks.push_back(-1);  // 2-column file, single trace
    }

    std::vector<std::pair<double, double>> raw_pairs;
    std::vector<std::pair<double, double>> smooth_pairs;
    std::vector<Appearance> appearances;
    std::ofstream plot_file;
    if (!plot_path.empty()) {
        plot_file.open(plot_path, std::ios::binary);
        if (!plot_file) throw ConfigError("cannot open output file: " + plot_path);
        plot_file << provenance_header(make_provenance(config));
        plot_file << "# columns: time_s,true_mps,raw_mps,smoothed_mps\n";
    }

    for (const std::int64_t track : tracks) {
        const std::optional<std::int64_t> selector =
            track >= 0 ? std::optional<std::int64_t>(track) : std::nullopt;
        GroundTruthTrace trace;
        try {
            trace = load_ground_truth(gt_path, selector);
        } catch (const ConfigError&) {
            continue;  // no usable rows for this track
        }
        const auto prof_it =
            track >= 0 ? pipeline.profiles.find(track) : pipeline.profiles.begin();
        if (prof_it == pipeline.profiles.end()) {
            std::cerr << "warning: no speed profile for ground-truth track " << track << "\n";
            continue;
        }
        const SpeedProfile& profile = prof_it->second;

        double offset = config.t0_offset_s;
        if (config.auto_offset)
            offset = estimate_offset(trace, profile, config.fps, 5.0, 1.0 / config.fps);

        std::vector<std::pair<double, double>> raw;
        std::vector<std::pair<double, double>> smoothed;
        try {
            raw = align(trace, profile, config.fps, offset, SpeedKind::Raw);
            smoothed = align(trace, profile, config.fps, offset, SpeedKind::Smoothed);
        } catch (const NoOverlap& e) {
            std::cerr << "warning: track " << track << ": " << e.what() << "\n";
            continue;
        }

        Appearance app;
        app.id = std::to_string(prof_it->first);
        const auto label_it = config.appearance_labels.find(prof_it->first);
        app.label = label_it != config.appearance_labels.end() ? label_it->second : "";
        app.begin = raw_pairs.size();
        app.end = raw_pairs.size() + raw.size();
        appearances.push_back(app);

        raw_pairs.insert(raw_pairs.end(), raw.begin(), raw.end());
        smooth_pairs.insert(smooth_pairs.end(), smoothed.begin(), smoothed.end());

        if (plot_file.is_open()) {
            plot_file << "# track " << prof_it->first << "\n";
            std::size_t i = 0;
            for (const SpeedSample& s : profile.samples) {
                const double t = static_cast<double>(s.frame) / config.fps + offset;
                if (t < trace.samples.front().first || t > trace.samples.back().first) continue;
                char buf[160];
                std::snprintf(buf, sizeof(buf), "%.6f,%.9f,%.9f,%.9f\n", t, raw[i].first,
                              s.raw_speed, s.smoothed_speed.value_or(s.raw_speed));
                plot_file << buf;
                ++i;
            }
        }
    }

    if (raw_pairs.empty()) throw NoOverlap("no ground-truth track overlapped a speed profile");

    const ValidationReport raw_report = validation_report(raw_pairs, appearances);
    const ValidationReport smooth_report = validation_report(smooth_pairs, appearances);
    std::string smooth_label = "smoothed";
    if (config.smoothing_window_s) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "smoothed (%.3g s)", *config.smoothing_window_s);
        smooth_label = buf;
    }
    const std::vector<std::pair<std::string, ValidationReport>> rows = {
        {"raw", raw_report}, {smooth_label, smooth_report}};
    const std::string report = format_validation_report(rows);

    if (out_path.empty() || out_path == "-") {
        std::cout << report;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw ConfigError("cannot open output file: " + out_path);
        out << provenance_header(make_provenance(config)) << report;
    }
    return kExitOk;
}

// --- generate ---------------------------------------------------------------

GeometryConfig derive_geometry_config(const ScenarioSpec& spec) {
    GeometryConfig gc;
    gc.region = {spec.mpp.x_min, spec.mpp.x_max, spec.mpp.y_min, spec.mpp.y_max};
    const double w = spec.mpp.x_max - spec.mpp.x_min;
    const double hspan = spec.mpp.y_max - spec.mpp.y_min;
    const std::vector<Vec2> bev_points = {
        {spec.mpp.x_min, spec.mpp.y_min},
        {spec.mpp.x_max, spec.mpp.y_min},
        {spec.mpp.x_max, spec.mpp.y_max},
        {spec.mpp.x_min, spec.mpp.y_max},
        {spec.mpp.x_min + 0.37 * w, spec.mpp.y_min + 0.59 * hspan},
        {spec.mpp.x_min + 0.71 * w, spec.mpp.y_min + 0.23 * hspan},
    };
    for (const Vec2& bev : bev_points)
        gc.correspondences.push_back({transform_point(spec.birdseye_to_camera, bev), bev});

    // reference segments consistent with the scenario's MPP model: the
    // measured length of a segment centered at p is len_px * W(axis of p)
    const double seg_px = 100.0;
    const double xc = 0.5 * (spec.mpp.x_min + spec.mpp.x_max);
    const double yc = 0.5 * (spec.mpp.y_min + spec.mpp.y_max);
    auto x_segment = [&](double x_center) {
        ReferenceSegment s;
        s.a = {x_center - seg_px / 2.0, yc};
        s.b = {x_center + seg_px / 2.0, yc};
        s.true_length = seg_px * interp_weight(spec.mpp, Axis::X, x_center);
        return s;
    };
    auto y_segment = [&](double y_center) {
        ReferenceSegment s;
        s.a = {xc, y_center - seg_px / 2.0};
        s.b = {xc, y_center + seg_px / 2.0};
        s.true_length = seg_px * interp_weight(spec.mpp, Axis::Y, y_center);
        return s;
    };
    gc.segments_x = {x_segment(spec.mpp.x_min + 0.1 * w), x_segment(spec.mpp.x_max - 0.1 * w)};
    gc.segments_y = {y_segment(spec.mpp.y_min + 0.1 * hspan),
                     y_segment(spec.mpp.y_max - 0.1 * hspan)};
    return gc;
}

int run_generate(const std::string& scenario_path, const std::string& out_dir) {
    const ScenarioSpec spec = load_scenario(scenario_path);
    const ScenarioOutput output = generate(spec);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    Provenance prov;
    prov.config_hash = hex64(fnv1a64(read_file(scenario_path)));
    prov.seed = spec.seed;

    {
        std::ofstream out(dir / "detections.csv", std::ios::binary);
        save_detections(out, output.detections, prov);
    }
    {
        std::ofstream out(dir / "true_speeds.csv", std::ios::binary);
        save_true_speeds(out, output.true_speeds, spec.fps, prov);
    }
    {
        std::ofstream out(dir / "true_episodes.csv", std::ios::binary);
        save_episodes(out, output.true_episodes, prov);
    }
    save_lanes(dir / "lanes.json", spec.lanes);
    save_geometry_config(dir / "geometry.json", derive_geometry_config(spec));

    nlohmann::json session = {
        {"fps", spec.fps},
        {"paths",
         {{"detections", "detections.csv"},
          {"geometry", "geometry.json"},
          {"homography", "homography.json"},
          {"mpp", "mpp.json"},
          {"lanes", "lanes.json"},
          {"ground_truth", "true_speeds.csv"}}},
        {"smoothing_window_s", 1.0},
        {"max_gap_s", 0.5},
        {"min_instances", nlohmann::json::array({30, 45, 60})},
        {"min_episodes", 1},
        {"optimizer", {{"seed", spec.seed}, {"starts", 16}, {"budget", 500}}},
    };
    std::ofstream out(dir / "session.json", std::ios::binary);
    out << session.dump(2) << "\n";

    std::printf("scenario: %zu detections, %zu vehicles scheduled, %zu true episodes\n",
                output.detections.size(), spec.schedule.size(), output.true_episodes.size());
    std::printf("wrote fixture files under %s\n", out_dir.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speedcal: vehicle speed estimation and GHR driver-behavior calibration "
                 "from roadside-camera tracking output"};
    app.require_subcommand(1);

    Overrides ov;

    auto* geo = app.add_subcommand("calibrate-geometry",
                                   "estimate the homography and MPP model from reference data");
    std::string out_homography;
    std::string out_mpp;
    add_common_flags(geo, ov);
    geo->add_option("--out-homography", out_homography, "homography artifact path");
    geo->add_option("--out-mpp", out_mpp, "MPP artifact path");

    auto* est = app.add_subcommand("estimate-speeds",
                                   "frame-by-frame speeds for every tracked vehicle");
    std::string est_out;
    bool stream_mode = false;
    add_common_flags(est, ov);
    est->add_option("-o,--out", est_out, "output CSV path (default stdout)");
    est->add_option("--detections", ov.detections, "detections path, or '-' for stdin");
    est->add_option("--smoothing-window", ov.smoothing_window, "moving-average window, seconds");
    est->add_flag("--no-smoothing", ov.no_smoothing, "emit raw speeds only");
    est->add_option("--max-gap", ov.max_gap, "largest usable detection gap, seconds");
    est->add_option("--confidence-threshold", ov.confidence,
                    "drop detections carrying a lower confidence");
    est->add_option("--class", ov.classes, "keep only these class labels");
    est->add_option("--stationary-clamp", ov.clamp, "zero raw speeds below this, m/s");
    est->add_flag("--stream", stream_mode, "incremental processing (bounded per-track state)");

    auto* ghr_cmd = app.add_subcommand("calibrate-ghr",
                                       "per-phase GHR parameters from car-following episodes");
    std::string ghr_out;
    std::string episodes_out;
    add_common_flags(ghr_cmd, ov);
    ghr_cmd->add_option("-o,--out", ghr_out, "report path (default stdout)");
    ghr_cmd->add_option("--episodes-out", episodes_out, "episode dump path");
    ghr_cmd->add_option("--detections", ov.detections, "detections path, or '-' for stdin");
    ghr_cmd->add_option("--min-instances", ov.min_instances,
                        "episode length thresholds (repeatable)");
    ghr_cmd->add_option("--seed", ov.seed, "optimizer seed");
    ghr_cmd->add_option("--budget", ov.budget, "objective evaluations per start");
    ghr_cmd->add_option("--starts", ov.starts, "multi-start count");
    ghr_cmd->add_option("--smoothing-window", ov.smoothing_window, "moving-average window, seconds");
    ghr_cmd->add_flag("--no-smoothing", ov.no_smoothing, "use raw speeds in episodes");

    auto* val = app.add_subcommand("validate",
                                   "error statistics against an instrumented-vehicle trace");
    std::string val_out;
    std::string plot_out;
    add_common_flags(val, ov);
    val->add_option("-o,--out", val_out, "report path (default stdout)");
    val->add_option("--plot-data", plot_out, "dump (time, truth, raw, smoothed) columns");
    val->add_option("--detections", ov.detections, "detections path, or '-' for stdin");
    val->add_option("--t0-offset", ov.t0_offset, "trace-to-video time offset, seconds");
    val->add_flag("--auto-offset", ov.auto_offset, "estimate the offset by grid search");
    val->add_option("--track", ov.gt_track, "ground-truth track id to validate");
    val->add_option("--smoothing-window", ov.smoothing_window, "moving-average window, seconds");

    auto* gen = app.add_subcommand("generate", "synthetic scenario fixture generator");
    std::string scenario_path;
    std::string gen_out_dir{"."};
    gen->add_option("--scenario", scenario_path, "scenario spec (JSON)")->required();
    gen->add_option("--out-dir", gen_out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (geo->parsed()) return run_calibrate_geometry(ov, out_homography, out_mpp);
        if (est->parsed()) return run_estimate_speeds(ov, est_out, stream_mode);
        if (ghr_cmd->parsed()) return run_calibrate_ghr(ov, ghr_out, episodes_out);
        if (val->parsed()) return run_validate(ov, val_out, plot_out);
        if (gen->parsed()) return run_generate(scenario_path, gen_out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const EmptyInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProcessing;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProcessing;
    }
    return kExitOk;
}
