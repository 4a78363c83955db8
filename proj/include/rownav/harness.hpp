#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rownav/config.hpp"
#include "rownav/ekf.hpp"
#include "rownav/field.hpp"
#include "rownav/goal_control.hpp"
#include "rownav/log_io.hpp"
#include "rownav/perception.hpp"
#include "rownav/rng.hpp"
#include "rownav/scan.hpp"

namespace rownav {

enum class Mode { pl, pl_ekf };

inline std::string to_string(Mode m) { return m == Mode::pl ? "PL" : "PL+EKF"; }

inline Mode mode_from_string(const std::string& s) {
    if (s == "PL" || s == "pl") return Mode::pl;
    if (s == "PL+EKF" || s == "pl+ekf" || s == "pl-ekf" || s == "ekf") return Mode::pl_ekf;
    throw std::invalid_argument("unknown mode: " + s);
}

constexpr double kSimRateHz = 40.0;  // dynamics always integrate at the scan base rate

/// Cross-track error: signed lateral deviation from the lane center.
inline double cte(double dist_left, double dist_right) {
    return 0.5 * (dist_right - dist_left);
}

/// Measured navigable space between the two fitted walls.
inline double lane_width(double dist_left, double dist_right) {
    return dist_left + dist_right;
}

/// Headline reliability metric: autonomous meters per relevant
/// intervention. Zero interventions yields the censored lower bound.
inline std::pair<double, bool> distance_per_intervention(double total_m, int relevant_count) {
    if (total_m < 0.0 || relevant_count < 0)
        throw std::invalid_argument("distance_per_intervention: negative input");
    if (relevant_count == 0) return {total_m, true};
    return {total_m / static_cast<double>(relevant_count), false};
}

inline bool is_relevant(InterventionEvent::Kind k) {
    using K = InterventionEvent::Kind;
    return k == K::collision || k == K::lane_departure || k == K::bad_start || k == K::gap_loss;
}

/// One control tick of an episode log.
struct Tick {
    double t = 0.0;
    RobotPose pose;       // at scan time
    GroundTruth truth;    // at scan time
    ControlInput input;   // measured odometry/gyro over the preceding interval
    RowObservation obs;   // validated perception output
    EkfEstimate est;      // fused state (PL mode: held raw values, zero covariance)
    Command cmd;
    std::optional<InterventionEvent> event;  // detected during the following interval
};

struct RunTotals {
    double distance_m = 0.0;
    double duration_s = 0.0;
};

struct RunRecord {
    FieldSpec scenario;
    Mode mode = Mode::pl_ekf;
    std::uint64_t seed = 0;
    double rate_hz = kSimRateHz;
    std::uint64_t field_hash = 0;
    std::map<std::string, std::string> config;
    std::vector<Tick> ticks;
    std::vector<InterventionEvent> events;
    RunTotals totals;

    int relevant_interventions() const {
        int n = 0;
        for (const InterventionEvent& e : events)
            if (is_relevant(e.kind)) ++n;
        return n;
    }
};

struct MetricsSummary {
    double mean_abs_cte = 0.0;   // from the estimates control consumed
    double max_abs_cte = 0.0;
    double lw_mean = 0.0;
    double lw_within_005 = 0.0;  // fraction of used ticks
    double lw_within_010 = 0.0;
    double dpi = 0.0;            // meters per relevant intervention
    bool dpi_censored = false;
    std::map<std::string, int> intervention_counts;

    // ground-truth tracking quality, start-up transient (first 2 m) excluded
    double mean_abs_cte_truth = 0.0;
    double max_abs_cte_truth = 0.0;

    long n_ticks = 0;
    long n_ticks_used = 0;   // both sides usable
    long n_ticks_truth = 0;  // past the 2 m start-up window
    int relevant_interventions = 0;
    double distance_m = 0.0;
    double duration_s = 0.0;
};

/// Threads the perception, filter, and controller through one episode.
/// Holds exactly the state that must survive between ticks, so a log replay
/// can rebuild the very same sequence.
class PipelineState {
public:
    PipelineState(const ControlConfig& cfg, Mode mode, double dt)
        : cfg_(cfg), mode_(mode), dt_(dt) {
        reset();
    }

    struct StepResult {
        RowObservation obs;
        EkfEstimate est;
        Command cmd;
    };

    StepResult step(const LaserScan& scan, const ControlInput& u) {
        StepResult out;

        if (mode_ == Mode::pl_ekf) {
            EkfEstimate predicted =
                first_ ? ekf_ : predict(ekf_, u, dt_, cfg_.ekf_noise.q_diag);
            const double prior = predicted.heading;
            const RowObservation raw = estimate(scan, prior, cfg_.perception);
            out.obs = validate(raw, prev_obs_, cfg_.validate, dt_);
            ekf_ = update(predicted, out.obs, cfg_.ekf_noise.r_diag).estimate;
            out.est = ekf_;
        } else {
            const double prior = held_.heading;
            const RowObservation raw = estimate(scan, prior, cfg_.perception);
            out.obs = validate(raw, prev_obs_, cfg_.validate, dt_);
            // perception-only: control sees the latest usable value, frozen
            // while a side is absent
            if (out.obs.left_usable) held_.dist_left = out.obs.dist_left;
            if (out.obs.right_usable) held_.dist_right = out.obs.dist_right;
            if (out.obs.heading_usable) held_.heading = out.obs.heading;
            out.est = held_;
        }
        prev_obs_ = out.obs;
        first_ = false;

        const double e_d =
            lateral_error(out.est.dist_left, out.est.dist_right, cfg_.goal.d_ref);
        // The vector field is expressed over the cross-track error axis,
        // which runs opposite to the leftward heading convention of the
        // filter and the plant; negate to couple them.
        const double phi_ref = -local_goal(e_d, cfg_.goal);
        const auto [omega, pid_next] = pid_step(phi_ref, out.est.heading, dt_, pid_);
        pid_ = pid_next;
        out.cmd = make_command(omega, cfg_.drive());
        return out;
    }

    /// Operator recovery: fresh filter, controller, and hold state.
    void reset() {
        const double half = 0.5 * cfg_.perception.nominal_lane_width;
        ekf_ = EkfEstimate{};
        ekf_.dist_left = half;
        ekf_.dist_right = half;
        ekf_.heading = 0.0;
        ekf_.covariance = Eigen::Matrix3d::Identity() * 1e-2;
        held_ = EkfEstimate{};
        held_.dist_left = half;
        held_.dist_right = half;
        held_.heading = 0.0;
        held_.covariance = Eigen::Matrix3d::Zero();
        pid_ = cfg_.make_pid_state();
        prev_obs_ = RowObservation{};
        first_ = true;
    }

    const EkfEstimate& fused() const { return ekf_; }

private:
    ControlConfig cfg_;
    Mode mode_;
    double dt_;
    EkfEstimate ekf_;
    EkfEstimate held_;  // PL-mode control state, zero covariance
    PidState pid_;
    RowObservation prev_obs_;
    bool first_ = true;
};

struct RunOptions {
    Mode mode = Mode::pl_ekf;
    std::uint64_t seed = 1;
    double rate_hz = kSimRateHz;   // perception/control rate; dynamics stay at 40 Hz
    double time_cap_s = 0.0;       // 0: derived from lane length and speed
    std::ostream* log = nullptr;   // optional JSON Lines run log
    std::ostream* scan_log = nullptr;  // optional scan-only JSON Lines log
};

namespace detail {

constexpr double kResetAdvance = 0.5;  // meters past the event after recovery

inline int ticks_per_scan(double rate_hz) {
    const double k = kSimRateHz / rate_hz;
    const int ki = static_cast<int>(std::lround(k));
    if (!(rate_hz > 0.0) || std::abs(k - ki) > 1e-9 || ki < 1)
        throw std::invalid_argument("rate_hz must divide the 40 Hz base rate");
    return ki;
}

inline RobotPose centered_pose(const Field& field, double arc) {
    const Centerline::PathPose p = field.centerline.at(arc);
    RobotPose pose;
    pose.x = p.x;
    pose.y = p.y;
    pose.heading = p.heading;
    pose.arc_progress = arc;
    return pose;
}

inline json tick_to_json(const Tick& tick, const LaserScan* scan) {
    json j;
    j["t"] = tick.t;
    if (scan) j["scan"] = jsonio::scan_to_json(*scan);
    j["u"] = jsonio::input_to_json(tick.input);
    j["pose"] = jsonio::pose_to_json(tick.pose);
    j["truth"] = jsonio::truth_to_json(tick.truth);
    j["obs"] = jsonio::obs_to_json(tick.obs);
    j["est"] = jsonio::estimate_to_json(tick.est);
    j["cmd"] = jsonio::command_to_json(tick.cmd);
    if (tick.event) j["event"] = jsonio::event_to_json(*tick.event);
    return j;
}

}  // namespace detail

/// Serialize the in-memory record (scans excluded; those live in the run
/// log). Key order is deterministic, so equal records give equal bytes.
inline json record_to_json(const RunRecord& record) {
    json j;
    j["schema_version"] = 1;
    j["scenario"] = jsonio::spec_to_json(record.scenario);
    j["mode"] = to_string(record.mode);
    j["seed"] = record.seed;
    j["rate_hz"] = record.rate_hz;
    j["field_hash"] = record.field_hash;
    j["config"] = record.config;
    json ticks = json::array();
    for (const Tick& tick : record.ticks) ticks.push_back(detail::tick_to_json(tick, nullptr));
    j["ticks"] = ticks;
    json events = json::array();
    for (const InterventionEvent& e : record.events) events.push_back(jsonio::event_to_json(e));
    j["events"] = events;
    j["totals"] = {{"distance_m", record.totals.distance_m},
                   {"duration_s", record.totals.duration_s}};
    return j;
}

/// Closed-loop episode: scan, perceive, validate, fuse (or hold), steer,
/// integrate. Collisions and departures recenter the robot half a meter
/// past the event and count as interventions; reaching the end of the lane
/// or the time cap terminates.
inline RunRecord run_episode(const Field& field, const ControlConfig& cfg,
                             const RunOptions& opts) {
    const FieldSpec& spec = field.spec;
    const int substeps = detail::ticks_per_scan(opts.rate_hz);
    const double sim_dt = 1.0 / kSimRateHz;
    const double tick_dt = substeps * sim_dt;
    const double cap =
        opts.time_cap_s > 0.0
            ? opts.time_cap_s
            : std::max(120.0, 3.0 * spec.row_length / std::max(0.05, cfg.drive_v_x));

    RunRecord record;
    record.scenario = spec;
    record.mode = opts.mode;
    record.seed = opts.seed;
    record.rate_hz = opts.rate_hz;
    record.field_hash = field_hash(field);
    record.config = config_entries(cfg);

    if (opts.log) {
        json header;
        header["schema_version"] = 1;
        header["scenario"] = jsonio::spec_to_json(spec);
        header["mode"] = to_string(opts.mode);
        header["seed"] = opts.seed;
        header["rate_hz"] = opts.rate_hz;
        header["field_hash"] = record.field_hash;
        header["config"] = record.config;
        *opts.log << header.dump() << '\n';
    }

    PipelineState pipeline(cfg, opts.mode, tick_dt);
    const Rng rng(opts.seed);
    RobotPose pose = detail::centered_pose(field, 0.0);
    Command prev_cmd;
    TickContext ctx;
    double t = 0.0;
    double distance = 0.0;
    bool done = false;

    for (std::uint64_t i = 0; !done; ++i) {
        if (t >= cap) {
            InterventionEvent capped;
            capped.kind = InterventionEvent::Kind::time_cap;
            capped.at_arc_m = pose.arc_progress;
            capped.at_time = t;
            record.events.push_back(capped);
            break;
        }

        LaserScan scan = raycast_scan(field, pose, opts.rate_hz, rng.derive(1, i));
        scan.timestamp = t;
        if (opts.scan_log) *opts.scan_log << jsonio::scan_to_json(scan).dump() << '\n';

        const ControlInput u =
            sensor_readings(prev_cmd.v_x_cmd, prev_cmd.omega_cmd, rng.derive(2, i), spec.noise);

        Tick tick;
        tick.t = t;
        tick.pose = pose;
        tick.truth = ground_truth(field, pose);
        tick.input = u;
        const PipelineState::StepResult res = pipeline.step(scan, u);
        tick.obs = res.obs;
        tick.est = res.est;
        tick.cmd = res.cmd;

        if (tick.truth.in_gap_left || tick.truth.in_gap_right)
            ctx.last_gap_arc = pose.arc_progress;

        bool reset = false;
        for (int s = 0; s < substeps; ++s) {
            const RobotPose next = robot_step(field, pose, res.cmd, sim_dt);
            distance += hypot2(next.x - pose.x, next.y - pose.y);
            pose = next;
            t += sim_dt;
            const GroundTruth sub = ground_truth(field, pose);
            if (sub.in_gap_left || sub.in_gap_right) ctx.last_gap_arc = pose.arc_progress;
            ctx.time_s = t;
            if (auto ev = detect_intervention(field, pose, ctx)) {
                tick.event = ev;
                record.events.push_back(*ev);
                if (ev->kind == InterventionEvent::Kind::end_of_lane) {
                    done = true;
                } else {
                    pose = detail::centered_pose(field, ev->at_arc_m + detail::kResetAdvance);
                    pipeline.reset();
                    prev_cmd = Command{};
                    reset = true;
                }
                break;
            }
        }
        if (!reset && !done) prev_cmd = res.cmd;

        record.ticks.push_back(tick);
        if (opts.log) *opts.log << detail::tick_to_json(tick, &scan).dump() << '\n';
    }

    record.totals.distance_m = distance;
    record.totals.duration_s = t;

    if (opts.log) {
        json footer;
        footer["totals"] = {{"distance_m", distance}, {"duration_s", t}};
        json events = json::array();
        for (const InterventionEvent& e : record.events)
            events.push_back(jsonio::event_to_json(e));
        footer["events"] = events;
        *opts.log << footer.dump() << '\n';
    }
    return record;
}

inline RunRecord run_episode(const FieldSpec& spec, const ControlConfig& cfg,
                             const RunOptions& opts) {
    return run_episode(build_field(spec), cfg, opts);
}

/// Tick statistics and the intervention tally of one episode.
inline MetricsSummary summarize(const RunRecord& record) {
    if (record.ticks.empty()) throw std::invalid_argument("summarize: empty record");

    double nominal = 0.75;
    if (auto it = record.config.find("lane.nominal_width"); it != record.config.end())
        nominal = std::stod(it->second);

    MetricsSummary m;
    m.n_ticks = static_cast<long>(record.ticks.size());
    m.distance_m = record.totals.distance_m;
    m.duration_s = record.totals.duration_s;

    double sum_cte = 0.0, sum_lw = 0.0;
    long within5 = 0, within10 = 0;
    double sum_cte_truth = 0.0;
    long n_truth = 0;
    for (const Tick& tick : record.ticks) {
        if (tick.obs.left_usable && tick.obs.right_usable) {
            const double c = cte(tick.est.dist_left, tick.est.dist_right);
            const double w = lane_width(tick.est.dist_left, tick.est.dist_right);
            sum_cte += std::abs(c);
            m.max_abs_cte = std::max(m.max_abs_cte, std::abs(c));
            sum_lw += w;
            if (std::abs(w - nominal) <= 0.05) ++within5;
            if (std::abs(w - nominal) <= 0.10) ++within10;
            ++m.n_ticks_used;
        }
        if (tick.truth.arc_m > 2.0) {
            const double c = cte(tick.truth.dist_left, tick.truth.dist_right);
            sum_cte_truth += std::abs(c);
            m.max_abs_cte_truth = std::max(m.max_abs_cte_truth, std::abs(c));
            ++n_truth;
        }
    }
    if (m.n_ticks_used > 0) {
        m.mean_abs_cte = sum_cte / static_cast<double>(m.n_ticks_used);
        m.lw_mean = sum_lw / static_cast<double>(m.n_ticks_used);
        m.lw_within_005 = static_cast<double>(within5) / static_cast<double>(m.n_ticks_used);
        m.lw_within_010 = static_cast<double>(within10) / static_cast<double>(m.n_ticks_used);
    }
    m.n_ticks_truth = n_truth;
    if (n_truth > 0) m.mean_abs_cte_truth = sum_cte_truth / static_cast<double>(n_truth);

    for (const InterventionEvent& e : record.events) m.intervention_counts[to_string(e.kind)]++;
    m.relevant_interventions = record.relevant_interventions();
    const auto [dpi, censored] = distance_per_intervention(m.distance_m, m.relevant_interventions);
    m.dpi = dpi;
    m.dpi_censored = censored;
    return m;
}

/// Pool per-episode summaries into one (tick stats weighted by used ticks,
/// interventions and distance summed).
inline MetricsSummary pool_summaries(const std::vector<MetricsSummary>& parts) {
    if (parts.empty()) throw std::invalid_argument("pool_summaries: nothing to pool");
    MetricsSummary m;
    double sum_cte = 0.0, sum_lw = 0.0, w5 = 0.0, w10 = 0.0, sum_ct = 0.0;
    long n_truth = 0;
    for (const MetricsSummary& p : parts) {
        sum_cte += p.mean_abs_cte * static_cast<double>(p.n_ticks_used);
        sum_lw += p.lw_mean * static_cast<double>(p.n_ticks_used);
        w5 += p.lw_within_005 * static_cast<double>(p.n_ticks_used);
        w10 += p.lw_within_010 * static_cast<double>(p.n_ticks_used);
        m.max_abs_cte = std::max(m.max_abs_cte, p.max_abs_cte);
        m.max_abs_cte_truth = std::max(m.max_abs_cte_truth, p.max_abs_cte_truth);
        sum_ct += p.mean_abs_cte_truth * static_cast<double>(p.n_ticks_truth);
        n_truth += p.n_ticks_truth;
        m.n_ticks += p.n_ticks;
        m.n_ticks_used += p.n_ticks_used;
        m.relevant_interventions += p.relevant_interventions;
        m.distance_m += p.distance_m;
        m.duration_s += p.duration_s;
        for (const auto& [kind, count] : p.intervention_counts)
            m.intervention_counts[kind] += count;
    }
    if (m.n_ticks_used > 0) {
        m.mean_abs_cte = sum_cte / static_cast<double>(m.n_ticks_used);
        m.lw_mean = sum_lw / static_cast<double>(m.n_ticks_used);
        m.lw_within_005 = w5 / static_cast<double>(m.n_ticks_used);
        m.lw_within_010 = w10 / static_cast<double>(m.n_ticks_used);
    }
    m.n_ticks_truth = n_truth;
    if (n_truth > 0) m.mean_abs_cte_truth = sum_ct / static_cast<double>(n_truth);
    const auto [dpi, censored] = distance_per_intervention(m.distance_m, m.relevant_interventions);
    m.dpi = dpi;
    m.dpi_censored = censored;
    return m;
}

inline json metrics_to_json(const MetricsSummary& m) {
    json j;
    j["mean_abs_cte"] = m.mean_abs_cte;
    j["max_abs_cte"] = m.max_abs_cte;
    j["lw_mean"] = m.lw_mean;
    j["lw_within_005"] = m.lw_within_005;
    j["lw_within_010"] = m.lw_within_010;
    j["dpi"] = m.dpi;
    j["dpi_censored"] = m.dpi_censored;
    j["intervention_counts"] = m.intervention_counts;
    j["mean_abs_cte_truth"] = m.mean_abs_cte_truth;
    j["max_abs_cte_truth"] = m.max_abs_cte_truth;
    j["n_ticks"] = m.n_ticks;
    j["n_ticks_used"] = m.n_ticks_used;
    j["relevant_interventions"] = m.relevant_interventions;
    j["distance_m"] = m.distance_m;
    j["duration_s"] = m.duration_s;
    return j;
}

inline std::string metrics_csv_header() {
    return "mean_abs_cte,max_abs_cte,lw_mean,lw_within_005,lw_within_010,dpi,dpi_censored,"
           "relevant_interventions,distance_m,duration_s,n_ticks,n_ticks_used,"
           "mean_abs_cte_truth,max_abs_cte_truth";
}

inline std::string metrics_csv_row(const MetricsSummary& m) {
    std::ostringstream s;
    s.precision(10);
    s << m.mean_abs_cte << ',' << m.max_abs_cte << ',' << m.lw_mean << ',' << m.lw_within_005
      << ',' << m.lw_within_010 << ',' << m.dpi << ',' << (m.dpi_censored ? 1 : 0) << ','
      << m.relevant_interventions << ',' << m.distance_m << ',' << m.duration_s << ','
      << m.n_ticks << ',' << m.n_ticks_used << ',' << m.mean_abs_cte_truth << ','
      << m.max_abs_cte_truth;
    return s.str();
}

/// Paired PL vs PL+EKF comparison over a seed list. Both modes of a seed
/// run against the identical field and the identical per-tick noise
/// realization (draws are keyed, not sequential).
struct ComparisonRow {
    std::uint64_t seed = 0;
    int pl_relevant = 0;
    int ekf_relevant = 0;
};

struct ComparisonReport {
    FieldSpec scenario;
    double rate_hz = kSimRateHz;
    std::uint64_t field_hash = 0;
    std::vector<ComparisonRow> rows;
    MetricsSummary pl;
    MetricsSummary ekf;
};

inline ComparisonReport compare_modes(const FieldSpec& spec, const std::vector<std::uint64_t>& seeds,
                                      const ControlConfig& cfg, double rate_hz = kSimRateHz) {
    if (seeds.size() < 2) throw std::invalid_argument("compare_modes: need at least 2 seeds");

    const Field field = build_field(spec);
    const std::uint64_t hash = field_hash(field);

    ComparisonReport report;
    report.scenario = spec;
    report.rate_hz = rate_hz;
    report.field_hash = hash;

    std::vector<MetricsSummary> pl_parts, ekf_parts;
    for (std::uint64_t seed : seeds) {
        RunOptions opts;
        opts.seed = seed;
        opts.rate_hz = rate_hz;

        opts.mode = Mode::pl;
        const RunRecord pl_rec = run_episode(field, cfg, opts);
        opts.mode = Mode::pl_ekf;
        const RunRecord ekf_rec = run_episode(field, cfg, opts);
        if (pl_rec.field_hash != ekf_rec.field_hash)
            throw std::logic_error("compare_modes: paired runs saw different fields");

        ComparisonRow row;
        row.seed = seed;
        row.pl_relevant = pl_rec.relevant_interventions();
        row.ekf_relevant = ekf_rec.relevant_interventions();
        report.rows.push_back(row);
        pl_parts.push_back(summarize(pl_rec));
        ekf_parts.push_back(summarize(ekf_rec));
    }
    report.pl = pool_summaries(pl_parts);
    report.ekf = pool_summaries(ekf_parts);
    return report;
}

inline json comparison_to_json(const ComparisonReport& report) {
    json j;
    j["scenario"] = jsonio::spec_to_json(report.scenario);
    j["rate_hz"] = report.rate_hz;
    j["field_hash"] = report.field_hash;
    json rows = json::array();
    for (const ComparisonRow& r : report.rows)
        rows.push_back(json{{"seed", r.seed},
                            {"pl_relevant", r.pl_relevant},
                            {"ekf_relevant", r.ekf_relevant}});
    j["seeds"] = rows;
    j["pl"] = metrics_to_json(report.pl);
    j["pl_ekf"] = metrics_to_json(report.ekf);
    return j;
}

inline std::string comparison_csv(const ComparisonReport& report) {
    std::ostringstream s;
    s << "seed,pl_relevant,ekf_relevant\n";
    for (const ComparisonRow& r : report.rows)
        s << r.seed << ',' << r.pl_relevant << ',' << r.ekf_relevant << '\n';
    return s.str();
}

struct ReplayResult {
    RunRecord record;
    bool mode_mismatch = false;   // log mode differed from the requested one
    long estimate_mismatches = 0; // ticks whose recomputed estimate differs from the log
};

/// Rebuild a run from its log: perception, filter, and commands are
/// recomputed from the logged scans and sensor inputs; poses, truth, and
/// events are taken from the log. For a log produced by this build with the
/// same mode, the recomputation is bit-identical.
inline ReplayResult replay(std::istream& in, std::optional<Mode> requested_mode = std::nullopt,
                           std::ostream* warnings = nullptr) {
    std::string line;
    long line_no = 0;

    const auto next_json = [&](bool required) -> std::optional<json> {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                return json::parse(line);
            } catch (const std::exception& ex) {
                throw ParseError(std::string("run log: ") + ex.what(), line_no);
            }
        }
        if (required) throw ParseError("run log: unexpected end of file", line_no);
        return std::nullopt;
    };

    const auto header_opt = next_json(true);
    const json& header = *header_opt;
    if (!header.contains("schema_version") || header.at("schema_version").get<int>() != 1)
        throw ParseError("run log: missing or unsupported schema_version", line_no);

    ReplayResult result;
    RunRecord& record = result.record;
    try {
        record.scenario = jsonio::spec_from_json(header.at("scenario"));
        record.mode = mode_from_string(header.at("mode").get<std::string>());
        record.seed = header.at("seed").get<std::uint64_t>();
        record.rate_hz = header.at("rate_hz").get<double>();
        record.field_hash = header.at("field_hash").get<std::uint64_t>();
        record.config = header.at("config").get<std::map<std::string, std::string>>();
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ParseError(std::string("run log header: ") + ex.what(), line_no);
    }

    Mode mode = record.mode;
    if (requested_mode && *requested_mode != record.mode) {
        result.mode_mismatch = true;
        mode = *requested_mode;
        if (warnings)
            *warnings << "warning: log was recorded in mode " << to_string(record.mode)
                      << " but replay was requested in mode " << to_string(*requested_mode)
                      << "; recomputing under the requested mode\n";
        record.mode = mode;
    }

    ControlConfig cfg;
    for (const auto& [key, value] : record.config) apply_config_entry(cfg, key, value);
    const double tick_dt =
        static_cast<double>(detail::ticks_per_scan(record.rate_hz)) / kSimRateHz;
    PipelineState pipeline(cfg, mode, tick_dt);

    bool saw_footer = false;
    double last_t = -std::numeric_limits<double>::infinity();
    while (auto j_opt = next_json(false)) {
        const json& j = *j_opt;
        if (j.contains("totals")) {  // footer
            try {
                record.totals.distance_m = j.at("totals").at("distance_m").get<double>();
                record.totals.duration_s = j.at("totals").at("duration_s").get<double>();
                record.events.clear();
                for (const json& e : j.at("events"))
                    record.events.push_back(jsonio::event_from_json(e));
            } catch (const std::exception& ex) {
                throw ParseError(std::string("run log footer: ") + ex.what(), line_no);
            }
            saw_footer = true;
            continue;
        }
        Tick tick;
        LaserScan scan;
        try {
            tick.t = j.at("t").get<double>();
            scan = jsonio::scan_from_json(j.at("scan"));
            tick.input = jsonio::input_from_json(j.at("u"));
            tick.pose = jsonio::pose_from_json(j.at("pose"));
            tick.truth = jsonio::truth_from_json(j.at("truth"));
            if (j.contains("event")) tick.event = jsonio::event_from_json(j.at("event"));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ParseError(std::string("run log tick: ") + ex.what(), line_no);
        }
        if (!(tick.t > last_t)) throw ParseError("run log: timestamps not increasing", line_no);
        last_t = tick.t;

        const PipelineState::StepResult res = pipeline.step(scan, tick.input);
        tick.obs = res.obs;
        tick.est = res.est;
        tick.cmd = res.cmd;

        if (j.contains("est") &&
            jsonio::estimate_to_json(res.est).dump() != j.at("est").dump())
            ++result.estimate_mismatches;

        if (tick.event && tick.event->kind != InterventionEvent::Kind::end_of_lane &&
            tick.event->kind != InterventionEvent::Kind::time_cap)
            pipeline.reset();

        record.ticks.push_back(std::move(tick));
    }
    if (!saw_footer) throw ParseError("run log: missing footer", line_no);
    if (record.ticks.empty()) throw ParseError("run log: no ticks", line_no);
    return result;
}

inline ReplayResult replay_file(const std::string& path,
                                std::optional<Mode> requested_mode = std::nullopt,
                                std::ostream* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("run log: cannot open " + path);
    return replay(in, requested_mode, warnings);
}

/// Canonical benchmark scenarios.
namespace scenarios {

/// Straight continuous rows, zero sensor noise. The closed-loop baseline.
inline FieldSpec clean_straight(double length = 100.0, std::uint64_t seed = 1) {
    FieldSpec spec;
    spec.row_length = length;
    spec.seed = seed;
    return spec;
}

inline SensorNoiseSpec research_field_noise() {
    SensorNoiseSpec n;
    n.range_sigma = 0.008;
    n.dropout_prob = 0.02;
    n.gyro_sigma = 0.005;
    n.odom_frac = 0.02;
    return n;
}

/// 220 m continuous straight lane with realistic sensor noise.
inline FieldSpec lane_a(std::uint64_t seed = 11) {
    FieldSpec spec;
    spec.row_length = 220.0;
    spec.noise = research_field_noise();
    spec.seed = seed;
    return spec;
}

/// Lane A plus 12 two-sided gaps of 0.5..1.0 m and one 2 m gap, with light
/// leaf clutter so gap edges also return points that are not stems.
inline FieldSpec lane_b(std::uint64_t seed = 12) {
    FieldSpec spec = lane_a(seed);
    const double lengths[12] = {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0, 0.5};
    for (int i = 0; i < 12; ++i)
        spec.gaps.push_back({RowSide::both, 15.0 + 15.0 * static_cast<double>(i), lengths[i]});
    spec.gaps.push_back({RowSide::both, 197.0, 2.0});
    spec.clutter_density = 0.15;
    return spec;
}

/// 300 m production lane bending into an 8 m radius turn, with clutter.
inline FieldSpec curve_production(std::uint64_t seed = 13) {
    FieldSpec spec;
    spec.row_length = 300.0;
    spec.curve = CurveSpec{8.0, 150.0};
    spec.clutter_density = 0.15;
    spec.noise = research_field_noise();
    spec.seed = seed;
    return spec;
}

}  // namespace scenarios

}  // namespace rownav
