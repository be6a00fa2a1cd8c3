#include "speedcal/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "speedcal/errors.hpp"

namespace speedcal {

namespace {

constexpr double kInfinityEps = 1e-12;

Eigen::Matrix3d to_eigen(const Homography& h) {
    Eigen::Matrix3d m;
    m << h.m[0], h.m[1], h.m[2], h.m[3], h.m[4], h.m[5], h.m[6], h.m[7], h.m[8];
    return m;
}

Homography from_eigen(const Eigen::Matrix3d& m) {
    Homography h;
    if (std::abs(m(2, 2)) > kInfinityEps) {
        const Eigen::Matrix3d n = m / m(2, 2);
        h.m = {n(0, 0), n(0, 1), n(0, 2), n(1, 0), n(1, 1), n(1, 2), n(2, 0), n(2, 1), n(2, 2)};
    } else {
        h.m = {m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1), m(2, 2)};
    }
    return h;
}

// Hartley normalization: translate centroid to origin, scale mean distance to sqrt(2).
Eigen::Matrix3d normalizing_transform(std::span<const Vec2> pts) {
    Vec2 centroid{0, 0};
    for (const Vec2& p : pts) centroid = centroid + p;
    centroid = (1.0 / static_cast<double>(pts.size())) * centroid;

    double mean_dist = 0.0;
    for (const Vec2& p : pts) mean_dist += norm(p - centroid);
    mean_dist /= static_cast<double>(pts.size());

    const double s = mean_dist > 0 ? std::sqrt(2.0) / mean_dist : 1.0;
    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 0) = s;
    t(1, 1) = s;
    t(0, 2) = -s * centroid.x;
    t(1, 2) = -s * centroid.y;
    return t;
}

double triangle_area2(Vec2 a, Vec2 b, Vec2 c) {
    return std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

void check_source_degeneracy(std::span<const PointCorrespondence> cs) {
    double diag = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i)
        for (std::size_t j = i + 1; j < cs.size(); ++j)
            diag = std::max(diag, pixel_distance(cs[i].source, cs[j].source));
    if (diag <= 0.0)
        throw DegenerateConfiguration("all source points coincide");

    const double dup_eps = 1e-9 * diag;
    const double area_eps = 1e-9 * diag * diag;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        for (std::size_t j = i + 1; j < cs.size(); ++j) {
            if (pixel_distance(cs[i].source, cs[j].source) < dup_eps)
                throw DegenerateConfiguration("duplicate source points at indices " +
                                              std::to_string(i) + " and " + std::to_string(j));
            for (std::size_t k = j + 1; k < cs.size(); ++k) {
                if (triangle_area2(cs[i].source, cs[j].source, cs[k].source) < area_eps)
                    throw DegenerateConfiguration(
                        "collinear source points at indices " + std::to_string(i) + ", " +
                        std::to_string(j) + ", " + std::to_string(k));
            }
        }
    }
}

struct MppLine {
    double at_min{0.0};
    double at_max{0.0};
};

// Least-squares line through (axis position of segment midpoint, measured MPP),
// evaluated at the region bounds. Exact interpolation for two segments.
MppLine fit_mpp_line(std::span<const ReferenceSegment> segments, Axis axis, double bound_min,
                     double bound_max) {
    const char* axis_name = axis == Axis::X ? "x" : "y";
    if (segments.size() < 2)
        throw InsufficientSegments(std::string("need at least 2 reference segments on the ") +
                                   axis_name + " axis, got " + std::to_string(segments.size()));

    std::vector<double> pos;
    std::vector<double> mpp;
    pos.reserve(segments.size());
    mpp.reserve(segments.size());
    for (const ReferenceSegment& seg : segments) {
        const double len_px = pixel_distance(seg.a, seg.b);
        if (!(len_px > 0.0))
            throw NonPositivePixelLength(std::string("zero-length reference segment on the ") +
                                         axis_name + " axis");
        if (!(seg.true_length > 0.0))
            throw NonPositivePixelLength(std::string("non-positive true length on the ") +
                                         axis_name + " axis");
        const Vec2 mid = midpoint(seg.a, seg.b);
        pos.push_back(axis == Axis::X ? mid.x : mid.y);
        mpp.push_back(seg.true_length / len_px);
    }

    const auto n = static_cast<double>(pos.size());
    double mean_pos = 0.0;
    double mean_mpp = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        mean_pos += pos[i];
        mean_mpp += mpp[i];
    }
    mean_pos /= n;
    mean_mpp /= n;

    double var = 0.0;
    double cov = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        var += (pos[i] - mean_pos) * (pos[i] - mean_pos);
        cov += (pos[i] - mean_pos) * (mpp[i] - mean_mpp);
    }
    const double span = *std::max_element(pos.begin(), pos.end()) -
                        *std::min_element(pos.begin(), pos.end());
    if (!(var > 0.0) || span < 1e-9 * std::max(1.0, std::abs(bound_max - bound_min)))
        throw InsufficientSegments(std::string("reference segments on the ") + axis_name +
                                   " axis share one axis position; need two distinct positions");

    const double slope = cov / var;
    const double intercept = mean_mpp - slope * mean_pos;
    return {intercept + slope * bound_min, intercept + slope * bound_max};
}

}  // namespace

MppCalibration constant_mpp(double mpp, double x_min, double x_max, double y_min, double y_max) {
    MppCalibration cal{mpp, mpp, mpp, mpp, x_min, x_max, y_min, y_max};
    validate(cal);
    return cal;
}

void validate(const Homography& h) {
    for (double v : h.m)
        if (!std::isfinite(v)) throw Error("homography has non-finite entries");
    const double det = to_eigen(h).determinant();
    if (std::abs(det) <= kInfinityEps)
        throw DegenerateConfiguration("homography is not invertible");
}

void validate(const MppCalibration& cal) {
    if (!(cal.mpp_x_min > 0.0 && cal.mpp_x_max > 0.0 && cal.mpp_y_min > 0.0 &&
          cal.mpp_y_max > 0.0))
        throw Error("MPP values must be positive");
    if (!(cal.x_min < cal.x_max) || !(cal.y_min < cal.y_max))
        throw Error("calibrated region bounds must satisfy min < max");
}

Homography estimate_homography(std::span<const PointCorrespondence> correspondences) {
    if (correspondences.size() < 4)
        throw TooFewPoints("homography estimation needs >= 4 correspondences, got " +
                           std::to_string(correspondences.size()));
    for (const PointCorrespondence& c : correspondences)
        if (!finite(c.source) || !finite(c.target))
            throw DegenerateConfiguration("correspondence with non-finite coordinates");
    check_source_degeneracy(correspondences);

    std::vector<Vec2> src;
    std::vector<Vec2> dst;
    src.reserve(correspondences.size());
    dst.reserve(correspondences.size());
    for (const PointCorrespondence& c : correspondences) {
        src.push_back(c.source);
        dst.push_back(c.target);
    }

    const Eigen::Matrix3d t_src = normalizing_transform(src);
    const Eigen::Matrix3d t_dst = normalizing_transform(dst);
    auto apply = [](const Eigen::Matrix3d& t, Vec2 p) -> Vec2 {
        const Eigen::Vector3d q = t * Eigen::Vector3d(p.x, p.y, 1.0);
        return {q(0) / q(2), q(1) / q(2)};
    };

    const auto n = static_cast<Eigen::Index>(correspondences.size());
    Eigen::MatrixXd a(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec2 s = apply(t_src, src[static_cast<std::size_t>(i)]);
        const Vec2 d = apply(t_dst, dst[static_cast<std::size_t>(i)]);
        a.row(2 * i) << -s.x, -s.y, -1, 0, 0, 0, d.x * s.x, d.x * s.y, d.x;
        a.row(2 * i + 1) << 0, 0, 0, -s.x, -s.y, -1, d.y * s.x, d.y * s.y, d.y;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd hv = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);

    const Eigen::Matrix3d h = t_dst.inverse() * hn * t_src;
    Homography result = from_eigen(h);
    validate(result);
    return result;
}

Vec2 transform_point(const Homography& h, Vec2 p) {
    const double w = h.m[6] * p.x + h.m[7] * p.y + h.m[8];
    if (std::abs(w) < kInfinityEps)
        throw PointAtInfinity("point maps to infinity under homography");
    const double x = h.m[0] * p.x + h.m[1] * p.y + h.m[2];
    const double y = h.m[3] * p.x + h.m[4] * p.y + h.m[5];
    return {x / w, y / w};
}

Homography inverse(const Homography& h) {
    validate(h);
    return from_eigen(to_eigen(h).inverse());
}

double reprojection_error(const Homography& h, const PointCorrespondence& c) {
    return pixel_distance(transform_point(h, c.source), c.target);
}

MppCalibration calibrate_mpp(std::span<const ReferenceSegment> segments_x,
                             std::span<const ReferenceSegment> segments_y,
                             const PixelRegion& region) {
    if (!(region.x_min < region.x_max) || !(region.y_min < region.y_max))
        throw Error("calibration region bounds must satisfy min < max");
    const MppLine lx = fit_mpp_line(segments_x, Axis::X, region.x_min, region.x_max);
    const MppLine ly = fit_mpp_line(segments_y, Axis::Y, region.y_min, region.y_max);
    MppCalibration cal{lx.at_min, lx.at_max,   ly.at_min,    ly.at_max,
                       region.x_min, region.x_max, region.y_min, region.y_max};
    validate(cal);
    return cal;
}

double interp_weight(const MppCalibration& cal, Axis axis, double midpoint) {
    if (axis == Axis::X) {
        return (cal.mpp_x_max - cal.mpp_x_min) / (cal.x_max - cal.x_min) *
                   (midpoint - cal.x_min) +
               cal.mpp_x_min;
    }
    return (cal.mpp_y_max - cal.mpp_y_min) / (cal.y_max - cal.y_min) * (midpoint - cal.y_min) +
           cal.mpp_y_min;
}

double weighted_distance(const MppCalibration& cal, Vec2 p1, Vec2 p2) {
    const double wx = interp_weight(cal, Axis::X, 0.5 * (p1.x + p2.x));
    const double wy = interp_weight(cal, Axis::Y, 0.5 * (p1.y + p2.y));
    const double dx = (p2.x - p1.x) * wx;
    const double dy = (p2.y - p1.y) * wy;
    return std::sqrt(dx * dx + dy * dy);
}

bool in_region(const MppCalibration& cal, Vec2 p) {
    return p.x >= cal.x_min && p.x <= cal.x_max && p.y >= cal.y_min && p.y <= cal.y_max;
}

}  // namespace speedcal
