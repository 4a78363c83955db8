#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "rownav/geometry.hpp"

namespace rownav {

/// Parameters of the lateral vector field. b, c, e shape the reference
/// trajectory; the deadband and clamp tame its divergence at the lane
/// center so the literal curve is usable in closed loop.
struct GoalParams {
    double b = 3.8;        // curve smoothness
    double c = 0.55;       // curve deadband exponent
    double e = 0.7;        // curve width, meters
    double d_ref = 0.0;    // reference lateral offset, meters
    double deadband = 0.02;            // meters of error treated as centered
    double phi_r_max = deg2rad(45.0);  // clamp on the reference heading
};

/// Heading PID with output clamp and conditional integration.
struct PidState {
    double kp = 2.0;
    double ki = 0.0;
    double kd = 0.1;
    double integral = 0.0;    // rad * s
    double prev_error = 0.0;  // rad
    double omega_max = 1.5;   // rad/s
};

struct Command {
    double v_x_cmd = 0.0;    // m/s, >= 0
    double omega_cmd = 0.0;  // rad/s, |.| <= omega_max
};

struct DriveConfig {
    double v_x = 0.7;        // m/s constant forward speed
    double omega_max = 1.5;  // rad/s, final clamp
};

/// Signed lateral error: zero when centered, negative when the robot sits
/// left of the reference offset.
inline double lateral_error(double dist_left, double dist_right, double d_ref) {
    return d_ref - 0.5 * (dist_right - dist_left);
}

/// Reference-trajectory value at lateral error e_d. Diverges at the origin;
/// callers apply the deadband first.
inline double trajectory_value(double e_d, const GoalParams& p) {
    if (e_d == 0.0) throw std::domain_error("trajectory_value: undefined at e_d = 0");
    return std::pow(p.b / std::abs(e_d / p.e), p.c);
}

/// Reference heading from the vector field: arctangent of the trajectory
/// slope, odd in e_d, zeroed inside the deadband and clamped to
/// [-phi_r_max, phi_r_max]. Positive output points toward increasing e_d.
inline double local_goal(double e_d, const GoalParams& p) {
    if (std::abs(e_d) <= p.deadband) return 0.0;
    const double arg = p.c * (e_d / (p.e * p.e)) * std::pow(p.b, p.c) *
                       std::pow(1.0 / std::abs(e_d / p.e), p.c + 2.0);
    const double raw = -std::atan(arg);
    return clamp(raw, -p.phi_r_max, p.phi_r_max);
}

/// One PID step on the wrapped heading error. The integral freezes while
/// the output saturates and is additionally bounded so it can never demand
/// more than the clamp by itself.
inline std::pair<double, PidState> pid_step(double phi_r, double phi_est, double dt,
                                            const PidState& s) {
    if (!(dt > 0.0)) throw std::invalid_argument("pid_step: dt must be positive");
    PidState next = s;
    const double error = wrap_pi(phi_r - phi_est);

    double integral = s.integral + error * dt;
    if (s.ki > 0.0) {
        const double bound = s.omega_max / s.ki;
        integral = clamp(integral, -bound, bound);
    }

    const double raw = s.kp * error + s.ki * integral + s.kd * (error - s.prev_error) / dt;
    const double omega = clamp(raw, -s.omega_max, s.omega_max);
    next.integral = (omega == raw) ? integral : s.integral;
    next.prev_error = error;
    return {omega, next};
}

/// Pair the angular command with the configured forward speed and apply the
/// final clamps.
inline Command make_command(double omega_cmd, const DriveConfig& cfg) {
    Command cmd;
    cmd.v_x_cmd = std::max(0.0, cfg.v_x);
    cmd.omega_cmd = clamp(omega_cmd, -cfg.omega_max, cfg.omega_max);
    return cmd;
}

}  // namespace rownav
