#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rownav/ekf.hpp"
#include "rownav/geometry.hpp"
#include "rownav/goal_control.hpp"
#include "rownav/perception.hpp"

namespace rownav {

/// Everything the perceive-fuse-steer pipeline is tuned by. Field defaults
/// are the working configuration; every key is overridable from a flat
/// `key = value` file.
struct ControlConfig {
    PerceptionConfig perception;
    ValidationThresholds validate;
    EkfNoise ekf_noise;
    bool ekf_enabled = true;
    GoalParams goal;
    double pid_kp = 2.0;
    double pid_ki = 0.0;
    double pid_kd = 0.1;
    double pid_omega_max = 1.5;
    double drive_v_x = 0.7;

    PidState make_pid_state() const {
        PidState s;
        s.kp = pid_kp;
        s.ki = pid_ki;
        s.kd = pid_kd;
        s.omega_max = pid_omega_max;
        return s;
    }

    DriveConfig drive() const { return {drive_v_x, pid_omega_max}; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad numeric value for " + key + ": '" + value + "'");
    }
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& value,
                                         std::size_t expected) {
    std::string normalized = value;
    for (char& ch : normalized)
        if (ch == ',') ch = ' ';
    std::istringstream in(normalized);
    std::vector<double> out;
    double v = 0.0;
    while (in >> v) out.push_back(v);
    if (!in.eof() || out.size() != expected)
        throw std::invalid_argument("config: " + key + " expects " + std::to_string(expected) +
                                    " numbers, got '" + value + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": '" + value + "'");
}

}  // namespace detail

/// Apply one key/value pair. Unknown keys are rejected so typos fail loudly.
inline void apply_config_entry(ControlConfig& cfg, const std::string& key,
                               const std::string& value) {
    const auto num = [&] { return detail::parse_double(key, value); };

    if (key == "roi.forward_min") cfg.perception.roi.forward_min = num();
    else if (key == "roi.forward_max") cfg.perception.roi.forward_max = num();
    else if (key == "roi.lateral_halfwidth") cfg.perception.roi.lateral_halfwidth = num();
    else if (key == "hist.bin_width") cfg.perception.hist_bin_width = num();
    else if (key == "lane.nominal_width") cfg.perception.nominal_lane_width = num();
    else if (key == "lane.stem_offset") cfg.perception.stem_offset = num();
    else if (key == "validate.min_points") cfg.validate.min_points = static_cast<int>(num());
    else if (key == "validate.min_span") cfg.validate.min_span = num();
    else if (key == "validate.max_residual_std") cfg.validate.max_residual_std = num();
    else if (key == "validate.max_distance_jump") cfg.validate.max_distance_jump = num();
    else if (key == "validate.max_slope_jump") cfg.validate.max_slope_jump = num();
    else if (key == "validate.max_stale_age") cfg.validate.max_stale_age = num();
    else if (key == "ekf.q_diag") {
        const auto v = detail::parse_doubles(key, value, 3);
        cfg.ekf_noise.q_diag = {v[0], v[1], v[2]};
    } else if (key == "ekf.r_diag") {
        const auto v = detail::parse_doubles(key, value, 3);
        cfg.ekf_noise.r_diag = {v[0], v[1], v[2]};
    } else if (key == "ekf.enabled") cfg.ekf_enabled = detail::parse_bool(key, value);
    else if (key == "goal.b") cfg.goal.b = num();
    else if (key == "goal.c") cfg.goal.c = num();
    else if (key == "goal.e") cfg.goal.e = num();
    else if (key == "goal.d_ref") cfg.goal.d_ref = num();
    else if (key == "goal.deadband") cfg.goal.deadband = num();
    else if (key == "goal.phi_r_max") cfg.goal.phi_r_max = num();
    else if (key == "pid.kp") cfg.pid_kp = num();
    else if (key == "pid.ki") cfg.pid_ki = num();
    else if (key == "pid.kd") cfg.pid_kd = num();
    else if (key == "pid.omega_max") cfg.pid_omega_max = num();
    else if (key == "drive.v_x") cfg.drive_v_x = num();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

/// Parse `key = value` lines; '#' starts a comment, blank lines ignored.
inline ControlConfig parse_config(std::istream& in, ControlConfig base = {}) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        apply_config_entry(base, detail::trim(stripped.substr(0, eq)),
                           detail::trim(stripped.substr(eq + 1)));
    }
    return base;
}

inline ControlConfig load_config(const std::string& path, ControlConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    return parse_config(in, base);
}

/// Flat map view of a config, used to echo the effective settings into run
/// logs so replay reproduces the exact pipeline.
inline std::map<std::string, std::string> config_entries(const ControlConfig& cfg) {
    std::map<std::string, std::string> out;
    const auto put = [&out](const std::string& key, double v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        out[key] = s.str();
    };
    put("roi.forward_min", cfg.perception.roi.forward_min);
    put("roi.forward_max", cfg.perception.roi.forward_max);
    put("roi.lateral_halfwidth", cfg.perception.roi.lateral_halfwidth);
    put("hist.bin_width", cfg.perception.hist_bin_width);
    put("lane.nominal_width", cfg.perception.nominal_lane_width);
    put("lane.stem_offset", cfg.perception.stem_offset);
    put("validate.min_points", cfg.validate.min_points);
    put("validate.min_span", cfg.validate.min_span);
    put("validate.max_residual_std", cfg.validate.max_residual_std);
    put("validate.max_distance_jump", cfg.validate.max_distance_jump);
    put("validate.max_slope_jump", cfg.validate.max_slope_jump);
    put("validate.max_stale_age", cfg.validate.max_stale_age);
    {
        std::ostringstream s;
        s.precision(17);
        s << cfg.ekf_noise.q_diag(0) << " " << cfg.ekf_noise.q_diag(1) << " "
          << cfg.ekf_noise.q_diag(2);
        out["ekf.q_diag"] = s.str();
    }
    {
        std::ostringstream s;
        s.precision(17);
        s << cfg.ekf_noise.r_diag(0) << " " << cfg.ekf_noise.r_diag(1) << " "
          << cfg.ekf_noise.r_diag(2);
        out["ekf.r_diag"] = s.str();
    }
    out["ekf.enabled"] = cfg.ekf_enabled ? "true" : "false";
    put("goal.b", cfg.goal.b);
    put("goal.c", cfg.goal.c);
    put("goal.e", cfg.goal.e);
    put("goal.d_ref", cfg.goal.d_ref);
    put("goal.deadband", cfg.goal.deadband);
    put("goal.phi_r_max", cfg.goal.phi_r_max);
    put("pid.kp", cfg.pid_kp);
    put("pid.ki", cfg.pid_ki);
    put("pid.kd", cfg.pid_kd);
    put("pid.omega_max", cfg.pid_omega_max);
    put("drive.v_x", cfg.drive_v_x);
    return out;
}

}  // namespace rownav
