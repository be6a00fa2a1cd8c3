#pragma once

#include <array>
#include <span>
#include <vector>

#include "speedcal/types.hpp"

namespace speedcal {

/// Planar projective map from camera pixels to bird's-eye pixels,
/// stored row-major. Normalized so m[8] == 1 whenever that entry is nonzero.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return {}; }
    double at(int row, int col) const { return m[3 * row + col]; }
};

struct PointCorrespondence {
    Vec2 source;  // camera space
    Vec2 target;  // bird's-eye space
};

enum class Axis { X, Y };

/// Axis-wise meters-per-pixel model: linear in the pixel coordinate,
/// anchored at the region bounds.
struct MppCalibration {
    double mpp_x_min{0.0};
    double mpp_x_max{0.0};
    double mpp_y_min{0.0};
    double mpp_y_max{0.0};
    double x_min{0.0};
    double x_max{0.0};
    double y_min{0.0};
    double y_max{0.0};
};

/// Constant-MPP calibration over a region, handy for flat scenes and tests.
MppCalibration constant_mpp(double mpp, double x_min, double x_max, double y_min, double y_max);

struct PixelRegion {
    double x_min{0.0};
    double x_max{0.0};
    double y_min{0.0};
    double y_max{0.0};
};

/// A reference object of known length used to anchor the MPP model
/// (e.g. a crosswalk marking), given by its endpoints in bird's-eye pixels.
struct ReferenceSegment {
    Vec2 a;
    Vec2 b;
    double true_length{0.0};  // meters
};

void validate(const Homography& h);
void validate(const MppCalibration& cal);

/// Hartley-normalized direct linear transform. Exact for 4 points,
/// least squares for more. Throws TooFewPoints / DegenerateConfiguration.
Homography estimate_homography(std::span<const PointCorrespondence> correspondences);

/// Homogeneous projection with perspective division.
/// Throws PointAtInfinity when the homogeneous w falls below 1e-12.
Vec2 transform_point(const Homography& h, Vec2 p);

Homography inverse(const Homography& h);

/// Pixel distance between h(source) and target for one correspondence.
double reprojection_error(const Homography& h, const PointCorrespondence& c);

/// Fits the per-axis MPP line from reference segments (>= 2 per axis at
/// distinct axis positions) and evaluates it at the region bounds.
MppCalibration calibrate_mpp(std::span<const ReferenceSegment> segments_x,
                             std::span<const ReferenceSegment> segments_y,
                             const PixelRegion& region);

/// Linear interpolation of the axis weight at a coordinate midpoint.
/// Extrapolates linearly outside the calibrated region.
double interp_weight(const MppCalibration& cal, Axis axis, double midpoint);

/// Weighted Euclidean distance in meters between two bird's-eye points;
/// weights are evaluated at the per-axis midpoint of the displacement.
double weighted_distance(const MppCalibration& cal, Vec2 p1, Vec2 p2);

/// Whether a point lies inside the calibrated pixel region (used to flag
/// extrapolated weights in output metadata).
bool in_region(const MppCalibration& cal, Vec2 p);

}  // namespace speedcal
