#include "speedcal/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "speedcal/errors.hpp"

namespace speedcal {

double SpeedProfileSpec::speed_at(double t) const {
    switch (kind) {
        case Kind::Constant:
            return v0;
        case Kind::Step:
            return t < t0 ? v0 : v1;
        case Kind::Ramp: {
            if (t <= t0) return v0;
            if (t >= t1) return v1;
            return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
        }
        case Kind::GhrFollower:
            break;
    }
    throw Error("GhrFollower profiles have no closed-form speed");
}

namespace {

// Position along a centerline, parameterized by segment index and the
// fraction along that segment. t < 0 on segment 0 extrapolates backwards,
// which is how staged platoons start behind the lane.
struct PathCursor {
    std::size_t segment{0};
    double t{0.0};
};

Vec2 path_point(std::span<const Vec2> line, const PathCursor& c) {
    const Vec2 a = line[c.segment];
    const Vec2 b = line[c.segment + 1];
    return a + c.t * (b - a);
}

// Solves for the pixel step along direction u whose weighted metric length
// equals `meters`. Monotone in the step, so bisection converges cleanly.
double solve_pixel_step(const MppCalibration& cal, Vec2 p, Vec2 u, double meters) {
    if (meters <= 0.0) return 0.0;
    auto metric = [&](double step) { return weighted_distance(cal, p, p + step * u); };

    const double wx = interp_weight(cal, Axis::X, p.x);
    const double wy = interp_weight(cal, Axis::Y, p.y);
    const double local_rate = std::sqrt(u.x * wx * u.x * wx + u.y * wy * u.y * wy);
    double hi = local_rate > 0.0 ? 1.5 * meters / local_rate : meters;
    for (int i = 0; i < 64 && metric(hi) < meters; ++i) hi *= 1.5;

    double lo = 0.0;
    for (int i = 0; i < 90; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (metric(mid) < meters)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Advances the cursor by `meters` of weighted metric length along the
// polyline; splits across vertices. Returns false once the path end is
// passed. Negative distances walk backwards within the current segment's
// extension (used only for initial placement).
bool advance_meters(std::span<const Vec2> line, const MppCalibration& cal, PathCursor& c,
                    double meters) {
    if (meters < 0.0) {
        const Vec2 a = line[c.segment];
        const Vec2 b = line[c.segment + 1];
        const double seg_len = pixel_distance(a, b);
        const Vec2 u = (1.0 / seg_len) * (a - b);  // backwards
        const double step = solve_pixel_step(cal, path_point(line, c), u, -meters);
        c.t -= step / seg_len;
        return true;
    }
    double remaining = meters;
    while (remaining > 0.0) {
        const Vec2 a = line[c.segment];
        const Vec2 b = line[c.segment + 1];
        const double seg_len = pixel_distance(a, b);
        const Vec2 p = path_point(line, c);
        const double to_end = weighted_distance(cal, p, b);
        if (remaining <= to_end || c.segment + 2 >= line.size()) {
            const Vec2 u = (1.0 / seg_len) * (b - a);
            const double step = solve_pixel_step(cal, p, u, remaining);
            c.t += step / seg_len;
            return c.t <= 1.0 + 1e-12;
        }
        remaining -= to_end;
        c.segment += 1;
        c.t = 0.0;
    }
    return true;
}

struct VehicleTrace {
    std::int64_t track_id{0};
    std::int64_t entry_frame{0};
    std::vector<double> speeds;      // instantaneous, one per active frame
    std::vector<Vec2> bev_positions; // bird's-eye, one per active frame (may stop early)
};

}  // namespace

ScenarioOutput generate(const ScenarioSpec& spec) {
    if (!(spec.fps > 0.0)) throw SpecError("fps must be positive");
    if (spec.duration_s < 0.0) throw SpecError("duration must be non-negative");
    if (spec.jitter_sigma < 0.0) throw SpecError("jitter sigma must be non-negative");
    validate(spec.birdseye_to_camera);
    validate(spec.mpp);
    for (const VirtualLane& lane : spec.lanes) validate(lane);

    std::map<std::string, const VirtualLane*> lane_by_id;
    for (const VirtualLane& lane : spec.lanes) lane_by_id[lane.lane_id] = &lane;

    const double dt = 1.0 / spec.fps;
    const auto n_frames = static_cast<std::int64_t>(std::floor(spec.duration_s * spec.fps));

    ScenarioOutput out;
    if (n_frames <= 0) return out;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> jitter(0.0, spec.jitter_sigma > 0 ? spec.jitter_sigma : 1.0);

    std::map<std::int64_t, VehicleTrace> traces;  // for GHR leader lookup

    for (std::size_t vi = 0; vi < spec.schedule.size(); ++vi) {
        const ScheduledVehicle& veh = spec.schedule[vi];
        const auto lane_it = lane_by_id.find(veh.lane_id);
        if (lane_it == lane_by_id.end())
            throw SpecError("vehicle " + std::to_string(veh.track_id) +
                            " is assigned to unknown lane '" + veh.lane_id + "'");
        const VirtualLane& lane = *lane_it->second;
        if (traces.count(veh.track_id))
            throw SpecError("duplicate track id " + std::to_string(veh.track_id));

        VehicleTrace trace;
        trace.track_id = veh.track_id;
        double start_offset = veh.start_offset_m;

        if (veh.profile.kind == SpeedProfileSpec::Kind::GhrFollower) {
            // leader = closest preceding schedule entry in the same lane
            const ScheduledVehicle* leader = nullptr;
            for (std::size_t j = vi; j-- > 0;) {
                if (spec.schedule[j].lane_id == veh.lane_id) {
                    leader = &spec.schedule[j];
                    break;
                }
            }
            if (!leader)
                throw SpecError("GHR follower " + std::to_string(veh.track_id) +
                                " has no leader in lane '" + veh.lane_id + "'");
            const VehicleTrace& lead_trace = traces.at(leader->track_id);
            trace.entry_frame = lead_trace.entry_frame;
            start_offset = leader->start_offset_m - veh.profile.initial_spacing;

            const double gen_duration =
                static_cast<double>(n_frames - trace.entry_frame) * dt;
            auto leader_fn = [&lead_trace, &spec](double t) {
                auto idx = static_cast<std::size_t>(std::llround(t * spec.fps));
                idx = std::min(idx, lead_trace.speeds.size() - 1);
                return lead_trace.speeds[idx];
            };
            SyntheticOptions opts;
            opts.initial_spacing = veh.profile.initial_spacing;
            opts.spacing_step = 0.0;
            opts.seed = spec.seed;
            opts.nema_phase = lane.nema_phase;
            opts.lane_id = lane.lane_id;
            std::vector<CarFollowingEpisode> eps = generate_synthetic_episodes(
                veh.profile.ghr, 1, gen_duration, spec.fps, leader_fn, 0.0, opts);
            CarFollowingEpisode ep = std::move(eps.front());
            ep.leader_id = leader->track_id;
            ep.follower_id = veh.track_id;
            for (EpisodeInstance& inst : ep.instances) inst.frame += trace.entry_frame;
            trace.speeds.reserve(ep.instances.size());
            for (const EpisodeInstance& inst : ep.instances)
                trace.speeds.push_back(inst.follower_speed);
            out.true_episodes.push_back(std::move(ep));
        } else {
            trace.entry_frame =
                static_cast<std::int64_t>(std::ceil(veh.entry_time_s * spec.fps - 1e-9));
            if (trace.entry_frame < 0) trace.entry_frame = 0;
            for (std::int64_t f = trace.entry_frame; f < n_frames; ++f) {
                const double t = static_cast<double>(f - trace.entry_frame) * dt;
                const double v = veh.profile.speed_at(t);
                if (!(v >= 0.0))
                    throw SpecError("vehicle " + std::to_string(veh.track_id) +
                                    " has a negative scheduled speed");
                trace.speeds.push_back(v);
            }
        }

        // integrate positions along the centerline (trapezoidal in speed)
        PathCursor cursor;
        if (!advance_meters(lane.centerline, spec.mpp, cursor, start_offset))
            throw SpecError("vehicle " + std::to_string(veh.track_id) +
                            " starts beyond the lane end");
        trace.bev_positions.reserve(trace.speeds.size());
        trace.bev_positions.push_back(path_point(lane.centerline, cursor));
        for (std::size_t k = 1; k < trace.speeds.size(); ++k) {
            const double step_m = 0.5 * (trace.speeds[k - 1] + trace.speeds[k]) * dt;
            if (!advance_meters(lane.centerline, spec.mpp, cursor, step_m)) break;
            trace.bev_positions.push_back(path_point(lane.centerline, cursor));
        }

        traces[veh.track_id] = std::move(trace);
    }

    // emit detections and true speeds; jitter draws follow schedule order
    const Homography bev_to_cam = spec.birdseye_to_camera;
    for (const ScheduledVehicle& veh : spec.schedule) {
        const VehicleTrace& trace = traces.at(veh.track_id);
        Vec2 box{40.0, 30.0};
        const auto box_it = spec.box_sizes.find(veh.class_label);
        if (box_it != spec.box_sizes.end()) box = box_it->second;
        if (!(box.x > 0.0 && box.y > 0.0)) throw SpecError("box sizes must be positive");

        for (std::size_t k = 0; k < trace.bev_positions.size(); ++k) {
            const std::int64_t frame = trace.entry_frame + static_cast<std::int64_t>(k);
            Vec2 cam = transform_point(bev_to_cam, trace.bev_positions[k]);
            if (spec.jitter_sigma > 0.0) {
                cam.x += jitter(rng);
                cam.y += jitter(rng);
            }
            DetectionRecord rec;
            rec.frame = frame;
            rec.track_id = veh.track_id;
            rec.left = cam.x - box.x / 2.0;
            rec.top = cam.y - box.y / 2.0;
            rec.width = box.x;
            rec.height = box.y;
            rec.class_label = veh.class_label;
            out.detections.push_back(rec);
            out.true_speeds.push_back({veh.track_id, frame, trace.speeds[k]});
        }
    }

    std::sort(out.detections.begin(), out.detections.end(),
              [](const DetectionRecord& a, const DetectionRecord& b) {
                  return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
              });
    std::sort(out.true_speeds.begin(), out.true_speeds.end(),
              [](const TrueSpeedSample& a, const TrueSpeedSample& b) {
                  return a.track_id != b.track_id ? a.track_id < b.track_id : a.frame < b.frame;
              });
    return out;
}

}  // namespace speedcal
