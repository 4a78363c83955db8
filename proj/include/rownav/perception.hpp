#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "rownav/geometry.hpp"
#include "rownav/scan.hpp"

namespace rownav {

/// Least-squares line lateral = slope * forward + intercept, plus the
/// diagnostics the validation heuristic consumes.
struct LineFit {
    double slope = 0.0;                // lateral per forward
    double intercept = 0.0;            // meters at forward = 0
    double orthogonal_distance = 0.0;  // |intercept| / sqrt(1 + slope^2)
    int point_count = 0;
    double span = 0.0;                 // forward extent of supporting points
    double residual_std = 0.0;         // std of lateral residuals
};

/// Per-scan row measurement after validation. A side can be freshly valid,
/// held at its last valid value (usable while the stale age stays under the
/// threshold), or absent.
struct RowObservation {
    double dist_left = std::numeric_limits<double>::quiet_NaN();
    double dist_right = std::numeric_limits<double>::quiet_NaN();
    double heading = std::numeric_limits<double>::quiet_NaN();      // used downstream, may be held
    double heading_raw = std::numeric_limits<double>::quiet_NaN();  // this scan's fresh measurement, NaN if none
    double heading_prior = 0.0;                                     // prior used for pre-rotation

    bool left_valid = false;   // fresh fit passed all thresholds
    bool right_valid = false;
    bool left_usable = false;  // valid, or held within staleness
    bool right_usable = false;
    bool heading_usable = false;

    std::optional<LineFit> left_fit;   // fresh fit, or carried last-valid fit while held
    std::optional<LineFit> right_fit;

    double stale_age_left = 0.0;   // seconds since last fresh-valid fit
    double stale_age_right = 0.0;

    bool has_left() const { return !std::isnan(dist_left); }
    bool has_right() const { return !std::isnan(dist_right); }
    bool has_heading() const { return !std::isnan(heading); }
};

/// Gates a fresh fit before it may feed the filter.
struct ValidationThresholds {
    int min_points = 8;
    double min_span = 0.3;              // meters
    double max_residual_std = 0.05;     // meters
    double max_distance_jump = 0.1;     // meters vs last valid
    double max_slope_jump = deg2rad(15.0);  // radians vs last valid
    double max_stale_age = 0.5;         // seconds a held value stays usable
};

struct PerceptionConfig {
    RoiBox roi{};
    double hist_bin_width = 0.05;       // meters
    double nominal_lane_width = 0.75;   // meters, sanity bounds only
    double stem_offset = 0.01;          // meters from the visible stem surface
                                        // to the row center line (crop characteristic)
};

struct HistogramPeak {
    double interval_lo = 0.0;   // meters, inclusive
    double interval_hi = 0.0;   // meters, exclusive
    PointSet selected;          // points in the peak bin and its two neighbors
    bool found = false;
};

/// Histogram over |lateral| with bins anchored at 0. Returns the densest bin
/// (ties go to the bin nearer the robot) and the points falling in that bin
/// or its immediate neighbors.
inline HistogramPeak histogram_peak(const PointSet& points, double bin_width) {
    HistogramPeak out;
    if (points.empty() || !(bin_width > 0.0)) return out;

    std::map<long, int> counts;
    for (const Point2& p : points)
        counts[static_cast<long>(std::floor(std::abs(p.lateral) / bin_width))]++;

    long peak = 0;
    int best = -1;
    for (const auto& [bin, count] : counts) {
        if (count > best) {  // map iterates ascending, so ties keep the nearer bin
            best = count;
            peak = bin;
        }
    }

    out.interval_lo = static_cast<double>(peak) * bin_width;
    out.interval_hi = static_cast<double>(peak + 1) * bin_width;
    for (const Point2& p : points) {
        const long bin = static_cast<long>(std::floor(std::abs(p.lateral) / bin_width));
        if (bin >= peak - 1 && bin <= peak + 1) out.selected.push_back(p);
    }
    out.found = true;
    return out;
}

/// Ordinary least squares of lateral on forward. Rows are near-parallel to
/// the forward axis after pre-rotation, so vertical-offset regression is
/// well conditioned. Returns nullopt when fewer than two points or the
/// forward coordinates carry no spread.
inline std::optional<LineFit> fit_line(const PointSet& points) {
    const std::size_t n = points.size();
    if (n < 2) return std::nullopt;

    double mx = 0.0, my = 0.0;
    for (const Point2& p : points) {
        mx += p.forward;
        my += p.lateral;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0;
    double fmin = points[0].forward, fmax = points[0].forward;
    for (const Point2& p : points) {
        const double dx = p.forward - mx;
        sxx += dx * dx;
        sxy += dx * (p.lateral - my);
        fmin = std::min(fmin, p.forward);
        fmax = std::max(fmax, p.forward);
    }
    if (sxx < 1e-12) return std::nullopt;

    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.orthogonal_distance = std::abs(fit.intercept) / std::sqrt(1.0 + fit.slope * fit.slope);
    fit.point_count = static_cast<int>(n);
    fit.span = fmax - fmin;

    double ss = 0.0;
    for (const Point2& p : points) {
        const double r = p.lateral - (fit.intercept + fit.slope * p.forward);
        ss += r * r;
    }
    fit.residual_std = std::sqrt(ss / static_cast<double>(n));
    return fit;
}

/// One pass of the row estimator: project, pre-rotate by the heading prior,
/// crop, split, pick each side's densest band, fit lines. Emits fresh
/// per-side distances plus the heading measurement taken from the better
/// defined line (lower residual std, ties to the longer span). Validation
/// happens separately.
inline RowObservation estimate(const LaserScan& scan, double heading_prior,
                               const PerceptionConfig& config) {
    RowObservation obs;
    obs.heading_prior = heading_prior;

    PointSet pts = polar_to_cartesian(scan);
    pts = rotate_to_path_frame(pts, -heading_prior);
    pts = roi_filter(pts, config.roi);
    auto [left_pts, right_pts] = split_sides(pts);

    const HistogramPeak left_peak = histogram_peak(left_pts, config.hist_bin_width);
    const HistogramPeak right_peak = histogram_peak(right_pts, config.hist_bin_width);
    if (left_peak.found) obs.left_fit = fit_line(left_peak.selected);
    if (right_peak.found) obs.right_fit = fit_line(right_peak.selected);

    // returns come from the stem surface facing the robot; the row center
    // line sits one configured surface offset beyond the fitted wall
    if (obs.left_fit) {
        obs.dist_left = obs.left_fit->orthogonal_distance + config.stem_offset;
        obs.left_valid = true;
    }
    if (obs.right_fit) {
        obs.dist_right = obs.right_fit->orthogonal_distance + config.stem_offset;
        obs.right_valid = true;
    }

    const LineFit* best = nullptr;
    if (obs.left_fit && obs.right_fit) {
        if (obs.left_fit->residual_std < obs.right_fit->residual_std)
            best = &*obs.left_fit;
        else if (obs.right_fit->residual_std < obs.left_fit->residual_std)
            best = &*obs.right_fit;
        else
            best = obs.left_fit->span >= obs.right_fit->span ? &*obs.left_fit : &*obs.right_fit;
    } else if (obs.left_fit) {
        best = &*obs.left_fit;
    } else if (obs.right_fit) {
        best = &*obs.right_fit;
    }
    if (best) {
        obs.heading = wrap_pi(heading_prior - std::atan(best->slope));
        obs.heading_raw = obs.heading;
        obs.heading_usable = true;
    }
    return obs;
}

namespace detail {

struct SideView {
    double RowObservation::*dist;
    bool RowObservation::*valid;
    bool RowObservation::*usable;
    std::optional<LineFit> RowObservation::*fit;
    double RowObservation::*stale;
};

inline constexpr SideView kLeft{&RowObservation::dist_left, &RowObservation::left_valid,
                                &RowObservation::left_usable, &RowObservation::left_fit,
                                &RowObservation::stale_age_left};
inline constexpr SideView kRight{&RowObservation::dist_right, &RowObservation::right_valid,
                                 &RowObservation::right_usable, &RowObservation::right_fit,
                                 &RowObservation::stale_age_right};

inline void validate_side(const SideView& v, const RowObservation& raw,
                          const RowObservation& prev, const ValidationThresholds& thr,
                          double dt, RowObservation& out) {
    const std::optional<LineFit>& fit = raw.*(v.fit);
    bool ok = fit.has_value() && fit->point_count >= thr.min_points &&
              fit->span >= thr.min_span && fit->residual_std <= thr.max_residual_std;

    // Jump gates only apply when there is a previous usable value to jump
    // from; otherwise any statically sound fit is accepted (first scan,
    // recovery after a long outage).
    if (ok && prev.*(v.usable) && (prev.*(v.fit)).has_value()) {
        const LineFit& pf = *(prev.*(v.fit));
        if (std::abs(fit->orthogonal_distance - pf.orthogonal_distance) > thr.max_distance_jump)
            ok = false;
        if (std::abs(std::atan(fit->slope) - std::atan(pf.slope)) > thr.max_slope_jump)
            ok = false;
    }

    if (ok) {
        out.*(v.dist) = raw.*(v.dist);
        out.*(v.valid) = true;
        out.*(v.usable) = true;
        out.*(v.fit) = fit;
        out.*(v.stale) = 0.0;
    } else {
        out.*(v.valid) = false;
        if (!std::isnan(prev.*(v.dist))) {
            // hold-last-valid: keep feeding the previous value until it goes stale
            out.*(v.dist) = prev.*(v.dist);
            out.*(v.fit) = prev.*(v.fit);
            out.*(v.stale) = prev.*(v.stale) + dt;
            out.*(v.usable) = out.*(v.stale) <= thr.max_stale_age;
        } else {
            out.*(v.usable) = false;
        }
    }
}

}  // namespace detail

/// Validate a fresh observation against the previous emitted one. Sides that
/// fail a gate carry their last valid value forward with a growing stale
/// age; past max_stale_age the side stops being usable. The heading is
/// re-derived from the best fresh-valid side so a rejected line can never
/// steer the filter.
inline RowObservation validate(const RowObservation& raw, const RowObservation& prev,
                               const ValidationThresholds& thr, double dt) {
    RowObservation out;
    out.heading_prior = raw.heading_prior;
    out.heading_raw = raw.heading_raw;

    detail::validate_side(detail::kLeft, raw, prev, thr, dt, out);
    detail::validate_side(detail::kRight, raw, prev, thr, dt, out);

    const LineFit* best = nullptr;
    if (out.left_valid && out.right_valid) {
        const LineFit& lf = *out.left_fit;
        const LineFit& rf = *out.right_fit;
        if (lf.residual_std < rf.residual_std)
            best = &lf;
        else if (rf.residual_std < lf.residual_std)
            best = &rf;
        else
            best = lf.span >= rf.span ? &lf : &rf;
    } else if (out.left_valid) {
        best = &*out.left_fit;
    } else if (out.right_valid) {
        best = &*out.right_fit;
    }

    if (best) {
        out.heading = wrap_pi(raw.heading_prior - std::atan(best->slope));
        out.heading_usable = true;
    } else if (!std::isnan(prev.heading)) {
        out.heading = prev.heading;
        const double inf = std::numeric_limits<double>::infinity();
        const double stale_l = out.has_left() ? out.stale_age_left : inf;
        const double stale_r = out.has_right() ? out.stale_age_right : inf;
        out.heading_usable = std::min(stale_l, stale_r) <= thr.max_stale_age;
    }
    return out;
}

}  // namespace rownav
