#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rownav/geometry.hpp"
#include "rownav/goal_control.hpp"
#include "rownav/rng.hpp"
#include "rownav/scan.hpp"

namespace rownav {

enum class RowSide { left, right, both };

inline std::string to_string(RowSide s) {
    switch (s) {
        case RowSide::left: return "left";
        case RowSide::right: return "right";
        default: return "both";
    }
}

inline RowSide row_side_from_string(const std::string& s) {
    if (s == "left") return RowSide::left;
    if (s == "right") return RowSide::right;
    if (s == "both") return RowSide::both;
    throw std::invalid_argument("unknown row side: " + s);
}

/// A stretch of row with no plants.
struct GapSpec {
    RowSide side = RowSide::both;
    double start_m = 0.0;   // centerline arc-length
    double length_m = 0.0;
};

struct CurveSpec {
    double radius_m = 8.0;
    double arc_start_m = 0.0;  // centerline arc-length where the turn begins
};

struct SensorNoiseSpec {
    double range_sigma = 0.0;   // meters, additive on each return
    double dropout_prob = 0.0;  // per-beam probability of no-return
    double gyro_sigma = 0.0;    // rad/s, additive on the yaw-rate reading
    double odom_frac = 0.0;     // multiplicative fraction on the speed reading
};

/// Declarative scenario. Identical spec (including seed) realizes a
/// bit-identical field.
struct FieldSpec {
    double row_spacing = 0.75;   // meters between the two rows
    double plant_spacing = 0.1;  // meters between stems along a row
    double row_length = 220.0;   // meters of centerline
    double stem_radius = 0.015;  // meters
    std::vector<GapSpec> gaps;
    std::optional<CurveSpec> curve;
    double clutter_density = 0.0;       // occluders per meter of row, per side
    std::vector<GapSpec> block_leaves;  // continuous occluding walls just inside a row
    SensorNoiseSpec noise;
    std::uint64_t seed = 0;
};

struct Circle {
    double x = 0.0, y = 0.0, r = 0.0;
};

struct Segment {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

/// Reference path: straight from the origin along +x, optionally bending
/// into a constant-radius left turn at arc_start.
class Centerline {
public:
    Centerline() = default;
    Centerline(double length, const std::optional<CurveSpec>& curve) : length_(length) {
        if (curve) {
            straight_ = clamp(curve->arc_start_m, 0.0, length);
            radius_ = curve->radius_m;
            has_arc_ = straight_ < length;
        } else {
            straight_ = length;
        }
    }

    struct PathPose {
        double x = 0.0, y = 0.0, heading = 0.0;
    };

    PathPose at(double s) const {
        if (!has_arc_ || s <= straight_) return {s, 0.0, 0.0};
        const double a = (s - straight_) / radius_;
        return {straight_ + radius_ * std::sin(a), radius_ * (1.0 - std::cos(a)), a};
    }

    /// Arc-length and signed lateral offset (positive left) of the nearest
    /// centerline point.
    struct Projection {
        double s = 0.0;
        double lateral = 0.0;
    };

    Projection project(double x, double y) const {
        if (!has_arc_ || x <= straight_) return {clamp(x, 0.0, length_), y};
        const double vx = x - straight_;
        const double vy = y - radius_;
        double a = std::atan2(vx, -vy);  // angle of the point as seen from the turn center
        const double a_max = (length_ - straight_) / radius_;
        if (a < 0.0) return {straight_, y};  // behind the tangent point
        a = std::min(a, a_max);
        const double radial = std::sqrt(vx * vx + vy * vy);
        return {straight_ + a * radius_, radius_ - radial};
    }

    double curvature(double s) const {
        return (has_arc_ && s > straight_) ? 1.0 / radius_ : 0.0;
    }

    double length() const { return length_; }

    /// Arc length of the parallel curve offset laterally by `off`
    /// (positive left, which is the inside of the turn).
    double offset_length(double off) const {
        if (!has_arc_) return length_;
        return straight_ + (length_ - straight_) * (radius_ - off) / radius_;
    }

    /// Map arc length along the offset curve back to centerline arc length.
    double offset_to_center(double s_off, double off) const {
        if (!has_arc_ || s_off <= straight_) return s_off;
        return straight_ + (s_off - straight_) * radius_ / (radius_ - off);
    }

private:
    double length_ = 0.0;
    double straight_ = 0.0;
    double radius_ = 0.0;
    bool has_arc_ = false;
};

/// Realized world geometry. Immutable after build; safe to share read-only
/// across concurrent episodes.
struct Field {
    FieldSpec spec;
    Centerline centerline;
    double lane_halfwidth = 0.375;
    std::vector<Circle> stems;
    std::vector<Segment> occluders;

    // uniform 1 m grid for range queries
    std::unordered_map<std::int64_t, std::vector<int>> stem_grid;
    std::unordered_map<std::int64_t, std::vector<int>> occluder_grid;

    static std::int64_t cell_key(int cx, int cy) {
        return (static_cast<std::int64_t>(cx) << 32) ^ (static_cast<std::int64_t>(cy) & 0xffffffffLL);
    }
};

struct RobotPose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;       // radians, wrapped
    double arc_progress = 0.0;  // meters along the centerline
};

struct GroundTruth {
    double dist_left = 0.0;
    double dist_right = 0.0;
    double heading = 0.0;  // relative to the local centerline tangent
    bool in_gap_left = false;
    bool in_gap_right = false;
    bool in_lane = true;
    double arc_m = 0.0;
    double lateral_m = 0.0;
};

struct InterventionEvent {
    enum class Kind { collision, lane_departure, bad_start, end_of_lane, gap_loss, time_cap };
    Kind kind = Kind::end_of_lane;
    double at_arc_m = 0.0;
    double at_time = 0.0;
};

inline std::string to_string(InterventionEvent::Kind k) {
    switch (k) {
        case InterventionEvent::Kind::collision: return "collision";
        case InterventionEvent::Kind::lane_departure: return "lane_departure";
        case InterventionEvent::Kind::bad_start: return "bad_start";
        case InterventionEvent::Kind::end_of_lane: return "end_of_lane";
        case InterventionEvent::Kind::gap_loss: return "gap_loss";
        default: return "time_cap";
    }
}

inline InterventionEvent::Kind event_kind_from_string(const std::string& s) {
    using K = InterventionEvent::Kind;
    if (s == "collision") return K::collision;
    if (s == "lane_departure") return K::lane_departure;
    if (s == "bad_start") return K::bad_start;
    if (s == "end_of_lane") return K::end_of_lane;
    if (s == "gap_loss") return K::gap_loss;
    if (s == "time_cap") return K::time_cap;
    throw std::invalid_argument("unknown event kind: " + s);
}

namespace detail {

constexpr double kStemJitterSigma = 0.01;    // meters, per-stem placement noise
constexpr double kBlockLeafInset = 0.08;     // meters inside the row line
constexpr double kFootprintHalfLen = 0.27;   // robot is 0.54 x 0.32 m
constexpr double kFootprintHalfWid = 0.16;
constexpr double kBadStartWindow = 2.0;      // meters of arc
constexpr double kGapLossWindow = 1.0;       // meters of arc since last gap

inline void grid_insert(std::unordered_map<std::int64_t, std::vector<int>>& grid, double x,
                        double y, int index) {
    grid[Field::cell_key(static_cast<int>(std::floor(x)), static_cast<int>(std::floor(y)))]
        .push_back(index);
}

inline bool side_matches(RowSide gap_side, RowSide row) {
    return gap_side == RowSide::both || gap_side == row;
}

inline bool in_gap(const FieldSpec& spec, RowSide row, double s) {
    for (const GapSpec& g : spec.gaps)
        if (side_matches(g.side, row) && s >= g.start_m && s < g.start_m + g.length_m)
            return true;
    return false;
}

}  // namespace detail

inline void validate_spec(const FieldSpec& spec) {
    if (!(spec.row_spacing > 2.0 * spec.stem_radius))
        throw std::invalid_argument("FieldSpec: row_spacing must exceed the stem diameter");
    if (!(spec.plant_spacing > 0.0))
        throw std::invalid_argument("FieldSpec: plant_spacing must be positive");
    if (!(spec.row_length > 0.0))
        throw std::invalid_argument("FieldSpec: row_length must be positive");
    if (spec.curve && !(spec.curve->radius_m >= 8.0))
        throw std::invalid_argument("FieldSpec: curve radius must be at least 8 m");
    if (spec.curve && !(spec.curve->arc_start_m >= 0.0 && spec.curve->arc_start_m <= spec.row_length))
        throw std::invalid_argument("FieldSpec: curve arc_start outside the row");
    const auto bad_prob = [](double p) { return !(p >= 0.0 && p <= 1.0); };
    if (bad_prob(spec.noise.dropout_prob))
        throw std::invalid_argument("FieldSpec: dropout_prob outside [0,1]");
    if (spec.noise.range_sigma < 0.0 || spec.noise.gyro_sigma < 0.0 || spec.noise.odom_frac < 0.0)
        throw std::invalid_argument("FieldSpec: negative noise magnitude");
    if (spec.clutter_density < 0.0)
        throw std::invalid_argument("FieldSpec: negative clutter_density");
    for (const GapSpec& g : spec.gaps)
        if (g.start_m < 0.0 || g.length_m <= 0.0 || g.start_m + g.length_m > spec.row_length)
            throw std::invalid_argument("FieldSpec: gap interval outside the row");
    for (const GapSpec& g : spec.block_leaves)
        if (g.start_m < 0.0 || g.length_m <= 0.0 || g.start_m + g.length_m > spec.row_length ||
            g.side == RowSide::both)
            throw std::invalid_argument("FieldSpec: block leaf must be one-sided and inside the row");
}

/// Realize a spec: stems every plant_spacing along the two offset rows with
/// seeded jitter, gap intervals emptied by nominal position, clutter
/// segments sampled at clutter_density per meter per side.
inline Field build_field(const FieldSpec& spec) {
    validate_spec(spec);

    Field field;
    field.spec = spec;
    field.centerline = Centerline(spec.row_length, spec.curve);
    field.lane_halfwidth = 0.5 * spec.row_spacing;

    const Rng field_rng = Rng(spec.seed);

    for (const RowSide row : {RowSide::left, RowSide::right}) {
        const double off = row == RowSide::left ? field.lane_halfwidth : -field.lane_halfwidth;
        const double row_len = field.centerline.offset_length(off);
        const int count = static_cast<int>(std::floor(row_len / spec.plant_spacing + 1e-9)) + 1;
        const Rng side_rng = field_rng.derive(row == RowSide::left ? 1 : 2);

        for (int i = 0; i < count; ++i) {
            const double s_off = static_cast<double>(i) * spec.plant_spacing;
            const double s = field.centerline.offset_to_center(s_off, off);
            if (detail::in_gap(spec, row, s)) continue;

            const Centerline::PathPose p = field.centerline.at(s);
            Rng stem_rng = side_rng.derive(static_cast<std::uint64_t>(i));
            const double jx = stem_rng.normal(0.0, detail::kStemJitterSigma);
            const double jy = stem_rng.normal(0.0, detail::kStemJitterSigma);
            Circle c;
            c.x = p.x - off * std::sin(p.heading) + jx;
            c.y = p.y + off * std::cos(p.heading) + jy;
            c.r = spec.stem_radius;
            detail::grid_insert(field.stem_grid, c.x, c.y, static_cast<int>(field.stems.size()));
            field.stems.push_back(c);
        }
    }

    // leaf clutter: short segments scattered between lane center and row
    if (spec.clutter_density > 0.0) {
        for (const RowSide row : {RowSide::left, RowSide::right}) {
            const double sign = row == RowSide::left ? 1.0 : -1.0;
            Rng clutter_rng = field_rng.derive(3, row == RowSide::left ? 0 : 1);
            const double expected = spec.clutter_density * spec.row_length;
            int count = static_cast<int>(std::floor(expected));
            if (clutter_rng.bernoulli(expected - std::floor(expected))) ++count;

            for (int i = 0; i < count; ++i) {
                Rng g = clutter_rng.derive(static_cast<std::uint64_t>(i));
                const double s = g.uniform(0.0, spec.row_length);
                const double off = sign * field.lane_halfwidth * g.uniform(0.3, 1.0);
                const double len = g.uniform(0.05, 0.30);
                const double ang = g.uniform(0.0, kPi);
                const Centerline::PathPose p = field.centerline.at(s);
                const double cx = p.x - off * std::sin(p.heading);
                const double cy = p.y + off * std::cos(p.heading);
                Segment seg;
                seg.x0 = cx - 0.5 * len * std::cos(ang);
                seg.y0 = cy - 0.5 * len * std::sin(ang);
                seg.x1 = cx + 0.5 * len * std::cos(ang);
                seg.y1 = cy + 0.5 * len * std::sin(ang);
                const int idx = static_cast<int>(field.occluders.size());
                detail::grid_insert(field.occluder_grid, seg.x0, seg.y0, idx);
                detail::grid_insert(field.occluder_grid, seg.x1, seg.y1, idx);
                field.occluders.push_back(seg);
            }
        }
    }

    // blocking leaves: continuous walls just inside a row, chained in short
    // pieces so they follow the curve
    for (const GapSpec& leaf : spec.block_leaves) {
        const double sign = leaf.side == RowSide::left ? 1.0 : -1.0;
        const double off = sign * (field.lane_halfwidth - detail::kBlockLeafInset);
        double s = leaf.start_m;
        const double s_end = leaf.start_m + leaf.length_m;
        while (s < s_end - 1e-9) {
            const double s2 = std::min(s + 0.5, s_end);
            const Centerline::PathPose a = field.centerline.at(s);
            const Centerline::PathPose b = field.centerline.at(s2);
            Segment seg;
            seg.x0 = a.x - off * std::sin(a.heading);
            seg.y0 = a.y + off * std::cos(a.heading);
            seg.x1 = b.x - off * std::sin(b.heading);
            seg.y1 = b.y + off * std::cos(b.heading);
            const int idx = static_cast<int>(field.occluders.size());
            detail::grid_insert(field.occluder_grid, seg.x0, seg.y0, idx);
            detail::grid_insert(field.occluder_grid, seg.x1, seg.y1, idx);
            field.occluders.push_back(seg);
            s = s2;
        }
    }

    return field;
}

/// FNV-1a over the realized geometry; paired-mode runs assert equality.
inline std::uint64_t field_hash(const Field& field) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto fold = [&h](double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffULL;
            h *= 1099511628211ULL;
        }
    };
    fold(field.lane_halfwidth);
    fold(field.centerline.length());
    for (const Circle& c : field.stems) {
        fold(c.x);
        fold(c.y);
        fold(c.r);
    }
    for (const Segment& s : field.occluders) {
        fold(s.x0);
        fold(s.y0);
        fold(s.x1);
        fold(s.y1);
    }
    return h;
}

namespace detail {

/// Nearest positive ray-circle intersection distance, or +inf.
inline double ray_circle(double px, double py, double dx, double dy, const Circle& c) {
    const double mx = c.x - px;
    const double my = c.y - py;
    const double along = mx * dx + my * dy;
    const double d2 = mx * mx + my * my;
    const double disc = c.r * c.r - (d2 - along * along);
    if (disc < 0.0) return std::numeric_limits<double>::infinity();
    const double root = std::sqrt(disc);
    const double t1 = along - root;
    if (t1 > 0.0) return t1;
    const double t2 = along + root;
    if (t2 > 0.0) return t2;  // ray origin inside the circle
    return std::numeric_limits<double>::infinity();
}

/// Nearest positive ray-segment intersection distance, or +inf.
inline double ray_segment(double px, double py, double dx, double dy, const Segment& s) {
    const double ex = s.x1 - s.x0;
    const double ey = s.y1 - s.y0;
    const double den = dx * ey - dy * ex;
    if (std::abs(den) < 1e-15) return std::numeric_limits<double>::infinity();
    const double qx = s.x0 - px;
    const double qy = s.y0 - py;
    const double t = (qx * ey - qy * ex) / den;   // along the ray
    const double u = (qx * dy - qy * dx) / den;   // along the segment
    if (t <= 0.0 || u < 0.0 || u > 1.0) return std::numeric_limits<double>::infinity();
    return t;
}

}  // namespace detail

/// Cast the 1081-beam sweep from the given pose. Each beam reports the
/// nearest stem/occluder intersection within max_range, then additive range
/// noise and independent dropout are applied. All draws are keyed by beam
/// index, so the realization depends only on the rng stream, never on the
/// hit pattern.
inline LaserScan raycast_scan(const Field& field, const RobotPose& pose, double rate_hz,
                              const Rng& rng) {
    LaserScan scan;
    scan.rate_hz = rate_hz;
    scan.ranges.assign(LaserScan::kBeamCount, scan.sentinel());

    const double step = scan.angular_span / static_cast<double>(LaserScan::kBeamCount - 1);
    const double first = scan.angle_of_first_beam;
    const double last = first + scan.angular_span;

    // candidate indices within sensing range, via the 1 m grid
    const int reach = static_cast<int>(std::ceil(scan.max_range)) + 1;
    const int cx = static_cast<int>(std::floor(pose.x));
    const int cy = static_cast<int>(std::floor(pose.y));

    // beams covering a bearing interval [lo, hi] (robot frame)
    const auto beam_range = [&](double lo, double hi, int& i0, int& i1) {
        i0 = static_cast<int>(std::ceil((lo - first) / step));
        i1 = static_cast<int>(std::floor((hi - first) / step));
        i0 = std::max(i0, 0);
        i1 = std::min(i1, static_cast<int>(LaserScan::kBeamCount) - 1);
    };

    const auto test_circle = [&](const Circle& c) {
        const double mx = c.x - pose.x;
        const double my = c.y - pose.y;
        const double dist = hypot2(mx, my);
        if (dist - c.r > scan.max_range) return;
        if (dist <= c.r) return;  // sensor inside the stem; collision handles this
        const double bearing = wrap_pi(std::atan2(my, mx) - pose.heading);
        const double half = std::asin(std::min(1.0, c.r / dist));
        if (bearing + half < first || bearing - half > last) return;
        int i0, i1;
        beam_range(bearing - half - step, bearing + half + step, i0, i1);
        for (int i = i0; i <= i1; ++i) {
            const double th = pose.heading + scan.beam_angle(static_cast<std::size_t>(i));
            const double t =
                detail::ray_circle(pose.x, pose.y, std::cos(th), std::sin(th), c);
            if (t < scan.ranges[static_cast<std::size_t>(i)])
                scan.ranges[static_cast<std::size_t>(i)] = t;
        }
    };

    const auto test_segment = [&](const Segment& s) {
        const double b0 = wrap_pi(std::atan2(s.y0 - pose.y, s.x0 - pose.x) - pose.heading);
        const double b1 = wrap_pi(std::atan2(s.y1 - pose.y, s.x1 - pose.x) - pose.heading);
        double lo = std::min(b0, b1);
        double hi = std::max(b0, b1);
        if (hi - lo > kPi) {  // interval crosses the rear wrap; split it
            const double lo2 = hi;
            hi = lo + 2.0 * kPi;
            lo = lo2;
        }
        for (double shift : {0.0, -2.0 * kPi}) {
            int i0, i1;
            beam_range(lo + shift - step, hi + shift + step, i0, i1);
            for (int i = i0; i <= i1; ++i) {
                const double th = pose.heading + scan.beam_angle(static_cast<std::size_t>(i));
                const double t =
                    detail::ray_segment(pose.x, pose.y, std::cos(th), std::sin(th), s);
                if (t <= scan.max_range && t < scan.ranges[static_cast<std::size_t>(i)])
                    scan.ranges[static_cast<std::size_t>(i)] = t;
            }
        }
    };

    std::vector<char> seg_seen(field.occluders.size(), 0);
    for (int gx = cx - reach; gx <= cx + reach; ++gx) {
        for (int gy = cy - reach; gy <= cy + reach; ++gy) {
            const std::int64_t key = Field::cell_key(gx, gy);
            if (auto it = field.stem_grid.find(key); it != field.stem_grid.end())
                for (int idx : it->second) test_circle(field.stems[static_cast<std::size_t>(idx)]);
            if (auto it = field.occluder_grid.find(key); it != field.occluder_grid.end())
                for (int idx : it->second) {
                    if (seg_seen[static_cast<std::size_t>(idx)]) continue;
                    seg_seen[static_cast<std::size_t>(idx)] = 1;
                    test_segment(field.occluders[static_cast<std::size_t>(idx)]);
                }
        }
    }

    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        if (scan.ranges[i] > scan.max_range) {
            scan.ranges[i] = scan.sentinel();
            continue;
        }
        const SensorNoiseSpec& n = field.spec.noise;
        if (n.dropout_prob > 0.0 || n.range_sigma > 0.0) {
            Rng beam_rng = rng.derive(i);
            if (n.dropout_prob > 0.0 && beam_rng.bernoulli(n.dropout_prob)) {
                scan.ranges[i] = scan.sentinel();
                continue;
            }
            if (n.range_sigma > 0.0)
                scan.ranges[i] =
                    clamp(scan.ranges[i] + beam_rng.normal(0.0, n.range_sigma), 1e-3, scan.max_range);
        }
    }
    return scan;
}

/// Exact unicycle integration over one step: straight when the turn rate is
/// negligible, otherwise the circular arc of radius v/omega.
inline RobotPose unicycle_step(const RobotPose& pose, const Command& cmd, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("unicycle_step: dt must be positive");
    RobotPose out = pose;
    const double v = cmd.v_x_cmd;
    const double w = cmd.omega_cmd;
    if (std::abs(w) < 1e-9) {
        out.x += v * dt * std::cos(pose.heading);
        out.y += v * dt * std::sin(pose.heading);
        // heading preserved exactly
    } else {
        const double h1 = pose.heading + w * dt;
        out.x += (v / w) * (std::sin(h1) - std::sin(pose.heading));
        out.y += (v / w) * (std::cos(pose.heading) - std::cos(h1));
        out.heading = wrap_pi(h1);
    }
    return out;
}

/// Unicycle step plus arc-progress update by projection onto the centerline.
inline RobotPose robot_step(const Field& field, const RobotPose& pose, const Command& cmd,
                            double dt) {
    RobotPose out = unicycle_step(pose, cmd, dt);
    out.arc_progress = field.centerline.project(out.x, out.y).s;
    return out;
}

/// Noisy odometry/gyro readings of the true body velocities. Draw order is
/// fixed: speed factor first, then yaw-rate offset.
inline ControlInput sensor_readings(double true_v, double true_omega, Rng rng,
                                    const SensorNoiseSpec& noise) {
    const double n1 = rng.normal();
    const double n2 = rng.normal();
    ControlInput u;
    u.v_x = true_v * (1.0 + noise.odom_frac * n1);
    u.omega = true_omega + noise.gyro_sigma * n2;
    return u;
}

/// True row-relative state at a pose: perpendicular distances to the two
/// idealized walls, heading against the local tangent, gap membership of
/// the perpendicular foot.
inline GroundTruth ground_truth(const Field& field, const RobotPose& pose) {
    const Centerline::Projection proj = field.centerline.project(pose.x, pose.y);
    const Centerline::PathPose ref = field.centerline.at(proj.s);

    GroundTruth gt;
    gt.arc_m = proj.s;
    gt.lateral_m = proj.lateral;
    gt.dist_left = field.lane_halfwidth - proj.lateral;
    gt.dist_right = field.lane_halfwidth + proj.lateral;
    gt.heading = wrap_pi(pose.heading - ref.heading);
    gt.in_gap_left = detail::in_gap(field.spec, RowSide::left, proj.s);
    gt.in_gap_right = detail::in_gap(field.spec, RowSide::right, proj.s);
    gt.in_lane = std::abs(proj.lateral) < field.lane_halfwidth;
    return gt;
}

/// Per-tick context the intervention detector needs beyond the pose.
struct TickContext {
    double time_s = 0.0;
    double last_gap_arc = -std::numeric_limits<double>::infinity();
};

/// Classify the current pose into at most one event. Collisions test the
/// robot footprint rectangle against stems; departure tests the robot
/// center against the wall lines. Within the first 2 m either failure is a
/// bad start; a departure within 1 m of leaving a gap is a gap loss.
inline std::optional<InterventionEvent> detect_intervention(const Field& field,
                                                            const RobotPose& pose,
                                                            const TickContext& ctx) {
    InterventionEvent ev;
    ev.at_arc_m = pose.arc_progress;
    ev.at_time = ctx.time_s;

    if (pose.arc_progress >= field.centerline.length()) {
        ev.kind = InterventionEvent::Kind::end_of_lane;
        return ev;
    }

    bool collision = false;
    const double ch = std::cos(pose.heading);
    const double sh = std::sin(pose.heading);
    // footprint corners reach at most hypot(0.27, 0.16) ~= 0.314 m from center
    const double probe = 0.33;
    const int cx = static_cast<int>(std::floor(pose.x));
    const int cy = static_cast<int>(std::floor(pose.y));
    for (int gx = cx - 1; gx <= cx + 1 && !collision; ++gx) {
        for (int gy = cy - 1; gy <= cy + 1 && !collision; ++gy) {
            auto it = field.stem_grid.find(Field::cell_key(gx, gy));
            if (it == field.stem_grid.end()) continue;
            for (int idx : it->second) {
                const Circle& c = field.stems[static_cast<std::size_t>(idx)];
                const double rx = c.x - pose.x;
                const double ry = c.y - pose.y;
                if (std::abs(rx) > probe + c.r || std::abs(ry) > probe + c.r) continue;
                // circle center in the robot frame, clamped to the footprint
                const double bx = rx * ch + ry * sh;
                const double by = -rx * sh + ry * ch;
                const double qx = clamp(bx, -detail::kFootprintHalfLen, detail::kFootprintHalfLen);
                const double qy = clamp(by, -detail::kFootprintHalfWid, detail::kFootprintHalfWid);
                if (hypot2(bx - qx, by - qy) <= c.r) {
                    collision = true;
                    break;
                }
            }
        }
    }

    const GroundTruth gt = ground_truth(field, pose);
    const bool departed = !gt.in_lane;

    if (!collision && !departed) return std::nullopt;

    if (pose.arc_progress < detail::kBadStartWindow) {
        ev.kind = InterventionEvent::Kind::bad_start;
    } else if (collision) {
        ev.kind = InterventionEvent::Kind::collision;
    } else if (pose.arc_progress - ctx.last_gap_arc <= detail::kGapLossWindow) {
        ev.kind = InterventionEvent::Kind::gap_loss;
    } else {
        ev.kind = InterventionEvent::Kind::lane_departure;
    }
    return ev;
}

}  // namespace rownav
