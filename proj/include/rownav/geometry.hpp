#pragma once

#include <cmath>
#include <vector>

namespace rownav {

constexpr double kPi = 3.14159265358979323846;

/// Planar point in whichever frame is active. `forward` is the along-row
/// axis, `lateral` is positive to the robot's left.
struct Point2 {
    double forward = 0.0;
    double lateral = 0.0;
};

using PointSet = std::vector<Point2>;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wrap an angle to (-pi, pi].
inline double wrap_pi(double a) {
    double w = std::remainder(a, 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    return w;
}

inline double clamp(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

inline double hypot2(double x, double y) { return std::sqrt(x * x + y * y); }

}  // namespace rownav
