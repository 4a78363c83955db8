#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rownav/ekf.hpp"
#include "rownav/field.hpp"
#include "rownav/perception.hpp"
#include "rownav/scan.hpp"

namespace rownav {

using json = nlohmann::json;

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long line = -1)
        : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

namespace jsonio {

// JSON has no NaN; absent values are encoded as null.
inline json num_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

inline double num_from(const json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

inline void require_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
    }
}

// ---- LaserScan ----

inline json scan_to_json(const LaserScan& scan) {
    return json{{"t", scan.timestamp}, {"rate_hz", scan.rate_hz}, {"ranges", scan.ranges}};
}

inline LaserScan scan_from_json(const json& j) {
    LaserScan scan;
    scan.timestamp = j.at("t").get<double>();
    scan.rate_hz = j.at("rate_hz").get<double>();
    scan.ranges = j.at("ranges").get<std::vector<double>>();
    if (scan.ranges.size() != LaserScan::kBeamCount)
        throw ParseError("scan: expected " + std::to_string(LaserScan::kBeamCount) +
                         " ranges, got " + std::to_string(scan.ranges.size()));
    return scan;
}

// ---- line fits and observations ----

inline json fit_to_json(const LineFit& f) {
    return json{{"slope", f.slope},
                {"intercept", f.intercept},
                {"orth", f.orthogonal_distance},
                {"n", f.point_count},
                {"span", f.span},
                {"residual_std", f.residual_std}};
}

inline LineFit fit_from_json(const json& j) {
    LineFit f;
    f.slope = j.at("slope").get<double>();
    f.intercept = j.at("intercept").get<double>();
    f.orthogonal_distance = j.at("orth").get<double>();
    f.point_count = j.at("n").get<int>();
    f.span = j.at("span").get<double>();
    f.residual_std = j.at("residual_std").get<double>();
    return f;
}

inline json obs_to_json(const RowObservation& o) {
    json j{{"d_l", num_or_null(o.dist_left)},
           {"d_r", num_or_null(o.dist_right)},
           {"phi", num_or_null(o.heading)},
           {"phi_raw", num_or_null(o.heading_raw)},
           {"phi_prior", o.heading_prior},
           {"valid", json::array({o.left_valid, o.right_valid})},
           {"usable", json::array({o.left_usable, o.right_usable, o.heading_usable})},
           {"stale", json::array({o.stale_age_left, o.stale_age_right})}};
    j["fit_l"] = o.left_fit ? fit_to_json(*o.left_fit) : json(nullptr);
    j["fit_r"] = o.right_fit ? fit_to_json(*o.right_fit) : json(nullptr);
    return j;
}

inline RowObservation obs_from_json(const json& j) {
    RowObservation o;
    o.dist_left = num_from(j.at("d_l"));
    o.dist_right = num_from(j.at("d_r"));
    o.heading = num_from(j.at("phi"));
    o.heading_raw = num_from(j.at("phi_raw"));
    o.heading_prior = j.at("phi_prior").get<double>();
    o.left_valid = j.at("valid")[0].get<bool>();
    o.right_valid = j.at("valid")[1].get<bool>();
    o.left_usable = j.at("usable")[0].get<bool>();
    o.right_usable = j.at("usable")[1].get<bool>();
    o.heading_usable = j.at("usable")[2].get<bool>();
    o.stale_age_left = j.at("stale")[0].get<double>();
    o.stale_age_right = j.at("stale")[1].get<double>();
    if (!j.at("fit_l").is_null()) o.left_fit = fit_from_json(j.at("fit_l"));
    if (!j.at("fit_r").is_null()) o.right_fit = fit_from_json(j.at("fit_r"));
    return o;
}

// ---- EKF estimate ----

inline json estimate_to_json(const EkfEstimate& e) {
    json cov = json::array();
    for (int r = 0; r < 3; ++r)
        cov.push_back(json::array({e.covariance(r, 0), e.covariance(r, 1), e.covariance(r, 2)}));
    return json{{"mean", json::array({e.dist_left, e.dist_right, e.heading})}, {"cov", cov}};
}

inline EkfEstimate estimate_from_json(const json& j) {
    EkfEstimate e;
    e.dist_left = j.at("mean")[0].get<double>();
    e.dist_right = j.at("mean")[1].get<double>();
    e.heading = j.at("mean")[2].get<double>();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) e.covariance(r, c) = j.at("cov")[r][c].get<double>();
    return e;
}

// ---- ground truth, command, events ----

inline json truth_to_json(const GroundTruth& g) {
    return json{{"d_l", g.dist_left},     {"d_r", g.dist_right},
                {"phi", g.heading},       {"gap_l", g.in_gap_left},
                {"gap_r", g.in_gap_right},{"in_lane", g.in_lane},
                {"arc", g.arc_m},         {"lat", g.lateral_m}};
}

inline GroundTruth truth_from_json(const json& j) {
    GroundTruth g;
    g.dist_left = j.at("d_l").get<double>();
    g.dist_right = j.at("d_r").get<double>();
    g.heading = j.at("phi").get<double>();
    g.in_gap_left = j.at("gap_l").get<bool>();
    g.in_gap_right = j.at("gap_r").get<bool>();
    g.in_lane = j.at("in_lane").get<bool>();
    g.arc_m = j.at("arc").get<double>();
    g.lateral_m = j.at("lat").get<double>();
    return g;
}

inline json pose_to_json(const RobotPose& p) {
    return json{{"x", p.x}, {"y", p.y}, {"heading", p.heading}, {"arc", p.arc_progress}};
}

inline RobotPose pose_from_json(const json& j) {
    RobotPose p;
    p.x = j.at("x").get<double>();
    p.y = j.at("y").get<double>();
    p.heading = j.at("heading").get<double>();
    p.arc_progress = j.at("arc").get<double>();
    return p;
}

inline json command_to_json(const Command& c) {
    return json::array({c.v_x_cmd, c.omega_cmd});
}

inline Command command_from_json(const json& j) {
    return Command{j.at(0).get<double>(), j.at(1).get<double>()};
}

inline json input_to_json(const ControlInput& u) { return json::array({u.v_x, u.omega}); }

inline ControlInput input_from_json(const json& j) {
    return ControlInput{j.at(0).get<double>(), j.at(1).get<double>()};
}

inline json event_to_json(const InterventionEvent& e) {
    return json{{"kind", to_string(e.kind)}, {"arc", e.at_arc_m}, {"t", e.at_time}};
}

inline InterventionEvent event_from_json(const json& j) {
    InterventionEvent e;
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    e.at_arc_m = j.at("arc").get<double>();
    e.at_time = j.at("t").get<double>();
    return e;
}

// ---- field spec (scenario file) ----

inline json gap_to_json(const GapSpec& g) {
    return json{{"side", to_string(g.side)}, {"start_m", g.start_m}, {"length_m", g.length_m}};
}

inline GapSpec gap_from_json(const json& j, const std::string& where) {
    require_keys(j, {"side", "start_m", "length_m"}, where);
    GapSpec g;
    g.side = row_side_from_string(j.at("side").get<std::string>());
    g.start_m = j.at("start_m").get<double>();
    g.length_m = j.at("length_m").get<double>();
    return g;
}

inline json spec_to_json(const FieldSpec& spec) {
    json j{{"row_spacing", spec.row_spacing},
           {"plant_spacing", spec.plant_spacing},
           {"row_length", spec.row_length},
           {"stem_radius", spec.stem_radius},
           {"clutter_density", spec.clutter_density},
           {"noise",
            {{"range_sigma", spec.noise.range_sigma},
             {"dropout_prob", spec.noise.dropout_prob},
             {"gyro_sigma", spec.noise.gyro_sigma},
             {"odom_frac", spec.noise.odom_frac}}},
           {"seed", spec.seed}};
    json gaps = json::array();
    for (const GapSpec& g : spec.gaps) gaps.push_back(gap_to_json(g));
    j["gaps"] = gaps;
    if (spec.curve)
        j["curve"] = json{{"radius_m", spec.curve->radius_m},
                          {"arc_start_m", spec.curve->arc_start_m}};
    if (!spec.block_leaves.empty()) {
        json leaves = json::array();
        for (const GapSpec& g : spec.block_leaves) leaves.push_back(gap_to_json(g));
        j["block_leaves"] = leaves;
    }
    return j;
}

/// Strict scenario parser: unknown keys are rejected.
inline FieldSpec spec_from_json(const json& j) {
    require_keys(j,
                 {"row_spacing", "plant_spacing", "row_length", "stem_radius", "gaps", "curve",
                  "clutter_density", "block_leaves", "noise", "seed"},
                 "scenario");
    FieldSpec spec;
    if (j.contains("row_spacing")) spec.row_spacing = j.at("row_spacing").get<double>();
    if (j.contains("plant_spacing")) spec.plant_spacing = j.at("plant_spacing").get<double>();
    if (j.contains("row_length")) spec.row_length = j.at("row_length").get<double>();
    if (j.contains("stem_radius")) spec.stem_radius = j.at("stem_radius").get<double>();
    if (j.contains("clutter_density"))
        spec.clutter_density = j.at("clutter_density").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("gaps"))
        for (const json& g : j.at("gaps")) spec.gaps.push_back(gap_from_json(g, "scenario.gaps"));
    if (j.contains("block_leaves"))
        for (const json& g : j.at("block_leaves"))
            spec.block_leaves.push_back(gap_from_json(g, "scenario.block_leaves"));
    if (j.contains("curve") && !j.at("curve").is_null()) {
        const json& c = j.at("curve");
        require_keys(c, {"radius_m", "arc_start_m"}, "scenario.curve");
        spec.curve = CurveSpec{c.at("radius_m").get<double>(), c.at("arc_start_m").get<double>()};
    }
    if (j.contains("noise")) {
        const json& n = j.at("noise");
        require_keys(n, {"range_sigma", "dropout_prob", "gyro_sigma", "odom_frac"},
                     "scenario.noise");
        if (n.contains("range_sigma")) spec.noise.range_sigma = n.at("range_sigma").get<double>();
        if (n.contains("dropout_prob"))
            spec.noise.dropout_prob = n.at("dropout_prob").get<double>();
        if (n.contains("gyro_sigma")) spec.noise.gyro_sigma = n.at("gyro_sigma").get<double>();
        if (n.contains("odom_frac")) spec.noise.odom_frac = n.at("odom_frac").get<double>();
    }
    return spec;
}

}  // namespace jsonio

/// Write scans as JSON Lines: {"t":..., "rate_hz":..., "ranges":[...]}.
/// Doubles serialize in shortest round-trip form, so writer -> reader is
/// bit-exact.
inline void write_scan_log(std::ostream& out, const std::vector<LaserScan>& scans) {
    for (const LaserScan& scan : scans) out << jsonio::scan_to_json(scan).dump() << '\n';
}

inline std::vector<LaserScan> read_scan_log(std::istream& in) {
    std::vector<LaserScan> scans;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            scans.push_back(jsonio::scan_from_json(json::parse(line)));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ParseError(std::string("scan log: ") + ex.what(), line_no);
        }
    }
    return scans;
}

inline FieldSpec load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("scenario: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& ex) {
        throw ParseError(std::string("scenario: ") + ex.what());
    }
    return jsonio::spec_from_json(j);
}

inline void save_scenario(const std::string& path, const FieldSpec& spec) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("scenario: cannot write " + path);
    out << jsonio::spec_to_json(spec).dump(2) << '\n';
}

}  // namespace rownav
