#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rownav/geometry.hpp"

namespace rownav {

/// One horizontal sweep: 1081 ranges over 270 deg, beam 0 at -135 deg from
/// the robot forward axis. Ranges above max_range encode no-return; the log
/// sentinel is max_range + 1 so lines stay fixed-width.
struct LaserScan {
    static constexpr std::size_t kBeamCount = 1081;

    double timestamp = 0.0;               // seconds
    double rate_hz = 40.0;                // acquisition rate tag
    std::vector<double> ranges;           // meters, kBeamCount entries
    double angular_span = 1.5 * kPi;      // radians
    double angle_of_first_beam = -0.75 * kPi;  // radians from forward axis
    double max_range = 10.0;              // meters

    double sentinel() const { return max_range + 1.0; }

    double beam_angle(std::size_t i) const {
        return angle_of_first_beam +
               static_cast<double>(i) * angular_span / static_cast<double>(ranges.size() - 1);
    }

    bool is_return(double r) const {
        return std::isfinite(r) && r > 0.0 && r <= max_range;
    }
};

/// Forward/lateral crop window applied after rotation into the path frame.
struct RoiBox {
    double forward_min = 0.1;        // meters, drops everything behind the sensor
    double forward_max = 1.9;        // meters
    double lateral_halfwidth = 1.0;  // meters, admits the two adjacent rows only

    bool valid() const {
        return forward_min < forward_max && lateral_halfwidth > 0.0;
    }
};

/// Project finite-range beams to cartesian points in the robot frame.
/// No-return beams are skipped; output order follows beam index.
inline PointSet polar_to_cartesian(const LaserScan& scan) {
    if (scan.ranges.size() != LaserScan::kBeamCount)
        throw std::invalid_argument("LaserScan: expected 1081 ranges, got " +
                                    std::to_string(scan.ranges.size()));
    PointSet out;
    out.reserve(scan.ranges.size());
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        const double r = scan.ranges[i];
        if (!scan.is_return(r)) continue;
        const double th = scan.beam_angle(i);
        out.push_back({r * std::cos(th), r * std::sin(th)});
    }
    return out;
}

/// Rotate every point by -phi. Callers undoing a robot yaw of `phi` pass
/// -phi here (the perception pipeline does), which applies Rot(+phi).
inline PointSet rotate_to_path_frame(const PointSet& points, double phi) {
    if (!std::isfinite(phi)) throw std::invalid_argument("rotate_to_path_frame: phi not finite");
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    PointSet out;
    out.reserve(points.size());
    for (const Point2& p : points)
        out.push_back({p.forward * c + p.lateral * s, -p.forward * s + p.lateral * c});
    return out;
}

/// Keep points with forward in (forward_min, forward_max) and
/// |lateral| < lateral_halfwidth. Order preserved; idempotent.
inline PointSet roi_filter(const PointSet& points, const RoiBox& box) {
    if (!box.valid()) throw std::invalid_argument("RoiBox: invalid bounds");
    PointSet out;
    out.reserve(points.size());
    for (const Point2& p : points) {
        if (p.forward > box.forward_min && p.forward < box.forward_max &&
            std::abs(p.lateral) < box.lateral_halfwidth)
            out.push_back(p);
    }
    return out;
}

/// Partition by sign of lateral. lateral == 0 goes right (deterministic
/// tie-break; measure-zero with real data).
inline std::pair<PointSet, PointSet> split_sides(const PointSet& points) {
    PointSet left, right;
    for (const Point2& p : points) {
        if (p.lateral > 0.0)
            left.push_back(p);
        else
            right.push_back(p);
    }
    return {std::move(left), std::move(right)};
}

}  // namespace rownav
