#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "rownav/harness.hpp"

using namespace rownav;

TEST_CASE("cte and lane width definitions") {
    CHECK(cte(0.375, 0.375) == Catch::Approx(0.0));
    CHECK(cte(0.35, 0.40) == Catch::Approx(0.025));
    CHECK(cte(0.40, 0.35) == Catch::Approx(-cte(0.35, 0.40)));

    CHECK(lane_width(0.375, 0.375) == Catch::Approx(0.75));
    CHECK(lane_width(0.35, 0.40) == Catch::Approx(0.75));
    CHECK(lane_width(0.40, 0.35) == Catch::Approx(lane_width(0.35, 0.40)));
}

TEST_CASE("distance per intervention arithmetic and censoring") {
    auto [v1, c1] = distance_per_intervention(6551.0, 138);
    CHECK(v1 == Catch::Approx(47.471014492753625).margin(1e-9));
    CHECK_FALSE(c1);

    auto [v2, c2] = distance_per_intervention(28245.670, 73);
    CHECK(v2 == Catch::Approx(386.9269863013698).margin(1e-9));
    CHECK_FALSE(c2);

    auto [v3, c3] = distance_per_intervention(100.0, 0);
    CHECK(v3 == Catch::Approx(100.0));
    CHECK(c3);

    CHECK_THROWS_AS(distance_per_intervention(-1.0, 2), std::invalid_argument);

    // dpi * n == total exactly for n >= 1
    for (int n = 1; n <= 9; ++n) {
        auto [v, c] = distance_per_intervention(220.0, n);
        CHECK(v * n == Catch::Approx(220.0).margin(1e-9));
    }
}

namespace {

RunRecord synthetic_record(const std::vector<double>& lane_widths, double nominal = 0.75) {
    RunRecord record;
    record.config = config_entries(ControlConfig{});
    double t = 0.0;
    for (double w : lane_widths) {
        Tick tick;
        tick.t = t;
        t += 0.025;
        tick.obs.left_usable = tick.obs.right_usable = true;
        tick.est.dist_left = nominal / 2.0;
        tick.est.dist_right = w - nominal / 2.0;
        tick.truth.arc_m = t;
        tick.truth.dist_left = tick.truth.dist_right = nominal / 2.0;
        record.ticks.push_back(tick);
    }
    record.totals.distance_m = 220.0;
    record.totals.duration_s = t;
    return record;
}

}  // namespace

TEST_CASE("summarize on a constant record") {
    RunRecord record = synthetic_record(std::vector<double>(40, 0.75));
    const MetricsSummary m = summarize(record);
    CHECK(m.lw_mean == Catch::Approx(0.75));
    CHECK(m.lw_within_005 == Catch::Approx(1.0));
    CHECK(m.lw_within_010 == Catch::Approx(1.0));
    CHECK(m.mean_abs_cte == Catch::Approx(0.0).margin(1e-12));
    CHECK(m.n_ticks_used == 40);
}

TEST_CASE("summarize counts lane-width tolerance bands by hand") {
    // deviations {0, 0.04, 0.11}: two inside 0.05, two inside 0.10
    RunRecord record = synthetic_record({0.75, 0.79, 0.86});
    MetricsSummary m = summarize(record);
    CHECK(m.lw_within_005 == Catch::Approx(2.0 / 3.0));
    CHECK(m.lw_within_010 == Catch::Approx(2.0 / 3.0));

    // deviations {0, 0.07, 0.11} separate the two bands
    record = synthetic_record({0.75, 0.82, 0.86});
    m = summarize(record);
    CHECK(m.lw_within_005 == Catch::Approx(1.0 / 3.0));
    CHECK(m.lw_within_010 == Catch::Approx(2.0 / 3.0));
    CHECK(m.lw_within_005 <= m.lw_within_010);
}

TEST_CASE("summarize excludes end-of-lane from the dpi denominator") {
    RunRecord record = synthetic_record(std::vector<double>(10, 0.75));
    record.events.push_back({InterventionEvent::Kind::end_of_lane, 220.0, 314.0});
    record.events.push_back({InterventionEvent::Kind::gap_loss, 110.0, 150.0});
    const MetricsSummary m = summarize(record);
    CHECK(m.relevant_interventions == 1);
    CHECK(m.dpi == Catch::Approx(220.0));
    CHECK_FALSE(m.dpi_censored);

    RunRecord clean = synthetic_record(std::vector<double>(10, 0.75));
    clean.events.push_back({InterventionEvent::Kind::end_of_lane, 220.0, 314.0});
    const MetricsSummary mc = summarize(clean);
    CHECK(mc.relevant_interventions == 0);
    CHECK(mc.dpi_censored);

    CHECK_THROWS_AS(summarize(RunRecord{}), std::invalid_argument);
}

TEST_CASE("summarize is insensitive to tick order for orderless statistics") {
    RunRecord fwd = synthetic_record({0.71, 0.75, 0.80, 0.66, 0.74});
    RunRecord rev = fwd;
    std::reverse(rev.ticks.begin(), rev.ticks.end());
    for (std::size_t i = 0; i < rev.ticks.size(); ++i)
        rev.ticks[i].t = 0.025 * static_cast<double>(i);  // keep timestamps increasing
    const MetricsSummary a = summarize(fwd);
    const MetricsSummary b = summarize(rev);
    CHECK(a.lw_mean == Catch::Approx(b.lw_mean));
    CHECK(a.lw_within_005 == Catch::Approx(b.lw_within_005));
    CHECK(a.lw_within_010 == Catch::Approx(b.lw_within_010));
}

TEST_CASE("clean straight episode reaches the end without interventions") {
    const FieldSpec spec = scenarios::clean_straight(30.0, 4);
    RunOptions opts;
    opts.mode = Mode::pl_ekf;
    opts.seed = 1;
    const RunRecord record = run_episode(spec, ControlConfig{}, opts);

    REQUIRE(record.events.size() == 1);
    CHECK(record.events[0].kind == InterventionEvent::Kind::end_of_lane);
    CHECK(record.relevant_interventions() == 0);
    CHECK(record.totals.distance_m == Catch::Approx(30.0).epsilon(0.1));

    // tick timestamps strictly increase
    for (std::size_t i = 1; i < record.ticks.size(); ++i)
        CHECK(record.ticks[i].t > record.ticks[i - 1].t);
}

TEST_CASE("same seed twice gives byte-identical records") {
    const FieldSpec spec = scenarios::lane_b(21);
    RunOptions opts;
    opts.mode = Mode::pl;
    opts.seed = 5;
    opts.time_cap_s = 30.0;  // shorten for test speed
    const RunRecord a = run_episode(spec, ControlConfig{}, opts);
    const RunRecord b = run_episode(spec, ControlConfig{}, opts);
    CHECK(record_to_json(a).dump() == record_to_json(b).dump());
}

TEST_CASE("pl mode integrates without the filter") {
    const FieldSpec spec = scenarios::clean_straight(20.0, 4);
    RunOptions opts;
    opts.mode = Mode::pl;
    opts.seed = 2;
    const RunRecord record = run_episode(spec, ControlConfig{}, opts);
    REQUIRE_FALSE(record.ticks.empty());
    // PL mode logs a zero covariance control state
    CHECK(record.ticks.back().est.covariance.cwiseAbs().maxCoeff() == 0.0);
    CHECK(record.events.back().kind == InterventionEvent::Kind::end_of_lane);
}

TEST_CASE("time cap stops a non-terminating run with a cap event") {
    FieldSpec spec = scenarios::clean_straight(50.0, 4);
    ControlConfig cfg;
    cfg.drive_v_x = 0.0;  // never reaches the end
    RunOptions opts;
    opts.time_cap_s = 5.0;
    const RunRecord record = run_episode(spec, cfg, opts);
    REQUIRE_FALSE(record.events.empty());
    CHECK(record.events.back().kind == InterventionEvent::Kind::time_cap);
    CHECK(record.totals.duration_s >= 5.0);
}

TEST_CASE("run log replays into the identical record and metrics") {
    const FieldSpec spec = scenarios::lane_b(31);
    RunOptions opts;
    opts.mode = Mode::pl_ekf;
    opts.seed = 9;
    opts.time_cap_s = 25.0;

    std::ostringstream log;
    opts.log = &log;
    const RunRecord original = run_episode(spec, ControlConfig{}, opts);

    std::istringstream in(log.str());
    const ReplayResult result = replay(in);
    CHECK_FALSE(result.mode_mismatch);
    CHECK(result.estimate_mismatches == 0);
    CHECK(record_to_json(result.record).dump() == record_to_json(original).dump());
    CHECK(metrics_to_json(summarize(result.record)).dump() ==
          metrics_to_json(summarize(original)).dump());
}

TEST_CASE("replay on a truncated log names the line") {
    const FieldSpec spec = scenarios::clean_straight(10.0, 4);
    RunOptions opts;
    opts.seed = 3;
    std::ostringstream log;
    opts.log = &log;
    run_episode(spec, ControlConfig{}, opts);

    std::string text = log.str();
    text.resize(text.size() / 2);  // chop mid-line
    std::istringstream in(text);
    try {
        replay(in);
        FAIL("expected ParseError");
    } catch (const ParseError& ex) {
        CHECK(ex.line() > 0);
    }
}

TEST_CASE("replay under a different mode warns and proceeds") {
    const FieldSpec spec = scenarios::clean_straight(10.0, 4);
    RunOptions opts;
    opts.mode = Mode::pl;
    opts.seed = 3;
    std::ostringstream log;
    opts.log = &log;
    run_episode(spec, ControlConfig{}, opts);

    std::istringstream in(log.str());
    std::ostringstream warnings;
    const ReplayResult result = replay(in, Mode::pl_ekf, &warnings);
    CHECK(result.mode_mismatch);
    CHECK(warnings.str().find("mode") != std::string::npos);
    CHECK(result.record.mode == Mode::pl_ekf);
    REQUIRE_FALSE(result.record.ticks.empty());
}

TEST_CASE("paired comparison uses one field and reports per-seed counts") {
    const FieldSpec spec = scenarios::clean_straight(15.0, 4);
    const ComparisonReport report = compare_modes(spec, {1, 2, 3}, ControlConfig{});
    CHECK(report.rows.size() == 3);
    CHECK(report.field_hash == field_hash(build_field(spec)));
    for (const ComparisonRow& row : report.rows) {
        CHECK(row.pl_relevant == 0);  // clean short lane: no relevant interventions
        CHECK(row.ekf_relevant == 0);
    }
    CHECK(report.ekf.dpi_censored);
    CHECK_THROWS_AS(compare_modes(spec, {1}, ControlConfig{}), std::invalid_argument);
}
