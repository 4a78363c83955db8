// Command-line front end: run episodes, compare PL vs PL+EKF, replay logs,
// and sweep scan rates over a scenario.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rownav/rownav.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;

const char* const kConfigKeyHelp = R"(Config file: flat `key = value` lines, `#` comments. Keys:
  roi.forward_min            forward ROI lower bound, m (default 0.1)
  roi.forward_max            forward ROI upper bound, m (default 1.9)
  roi.lateral_halfwidth      lateral ROI half width, m (default 1.0)
  hist.bin_width             row histogram bin, m (default 0.05)
  lane.nominal_width         nominal lane width, m (default 0.75)
  lane.stem_offset           stem surface to row center offset, m (default 0.01)
  validate.min_points        min points behind a line fit (default 8)
  validate.min_span          min forward extent of a fit, m (default 0.3)
  validate.max_residual_std  max residual std of a fit, m (default 0.05)
  validate.max_distance_jump max wall distance jump between scans, m (default 0.1)
  validate.max_slope_jump    max line angle jump between scans, rad (default 0.2618)
  validate.max_stale_age     how long a held value stays usable, s (default 0.5)
  ekf.q_diag                 process covariance diagonal, 3 numbers (default 0.001 0.001 0.01)
  ekf.r_diag                 measurement covariance diagonal, 3 numbers (default 0.05 0.05 0.5)
  ekf.enabled                default mode switch when --mode is not given (default true)
  goal.b                     vector-field smoothness constant (default 3.8)
  goal.c                     vector-field exponent constant (default 0.55)
  goal.e                     vector-field width constant, m (default 0.7)
  goal.d_ref                 reference lateral offset, m (default 0)
  goal.deadband              lateral error treated as centered, m (default 0.02)
  goal.phi_r_max             clamp on the reference heading, rad (default 0.7854)
  pid.kp pid.ki pid.kd       heading PID gains (default 2.0 / 0.0 / 0.1)
  pid.omega_max              angular command clamp, rad/s (default 1.5)
  drive.v_x                  constant forward speed, m/s (default 0.7)
)";

struct CommonArgs {
    std::string scenario_path;
    std::string config_path;
    std::uint64_t seed = 1;
    double rate_hz = 40.0;
};

rownav::ControlConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return {};
    return rownav::load_config(path);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

int run_command(const CommonArgs& common, const std::string& mode_str,
                const std::string& out_path, const std::string& metrics_path,
                const std::string& csv_path, const std::string& scan_log_path) {
    const rownav::FieldSpec spec = rownav::load_scenario(common.scenario_path);
    const rownav::ControlConfig cfg = load_config_or_default(common.config_path);

    rownav::RunOptions opts;
    opts.mode = mode_str.empty() ? (cfg.ekf_enabled ? rownav::Mode::pl_ekf : rownav::Mode::pl)
                                 : rownav::mode_from_string(mode_str);
    opts.seed = common.seed;
    opts.rate_hz = common.rate_hz;

    std::ofstream log_stream, scan_stream;
    if (!out_path.empty()) {
        log_stream.open(out_path);
        if (!log_stream) throw std::runtime_error("cannot write " + out_path);
        opts.log = &log_stream;
    }
    if (!scan_log_path.empty()) {
        scan_stream.open(scan_log_path);
        if (!scan_stream) throw std::runtime_error("cannot write " + scan_log_path);
        opts.scan_log = &scan_stream;
    }

    const rownav::RunRecord record = rownav::run_episode(spec, cfg, opts);
    const rownav::MetricsSummary metrics = rownav::summarize(record);

    std::cout << rownav::metrics_to_json(metrics).dump(2) << '\n';
    if (!metrics_path.empty()) write_text(metrics_path, rownav::metrics_to_json(metrics).dump(2) + "\n");
    if (!csv_path.empty())
        write_text(csv_path, rownav::metrics_csv_header() + "\n" + rownav::metrics_csv_row(metrics) + "\n");
    return kExitOk;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, int count) {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < count; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
    return seeds;
}

int compare_command(const CommonArgs& common, int n_seeds, const std::string& out_path,
                    const std::string& csv_path) {
    const rownav::FieldSpec spec = rownav::load_scenario(common.scenario_path);
    const rownav::ControlConfig cfg = load_config_or_default(common.config_path);
    const rownav::ComparisonReport report =
        rownav::compare_modes(spec, seed_list(common.seed, n_seeds), cfg, common.rate_hz);

    std::cout << rownav::comparison_to_json(report).dump(2) << '\n';
    if (!out_path.empty()) write_text(out_path, rownav::comparison_to_json(report).dump(2) + "\n");
    if (!csv_path.empty()) write_text(csv_path, rownav::comparison_csv(report));
    return kExitOk;
}

int replay_command(const std::string& log_path, const std::string& mode_str,
                   const std::string& metrics_path, const std::string& csv_path, bool strict) {
    std::optional<rownav::Mode> mode;
    if (!mode_str.empty()) mode = rownav::mode_from_string(mode_str);

    const rownav::ReplayResult result = rownav::replay_file(log_path, mode, &std::cerr);
    if (result.estimate_mismatches > 0) {
        std::cerr << "warning: " << result.estimate_mismatches
                  << " tick(s) recomputed differently than logged\n";
        if (strict && !result.mode_mismatch) return kExitParse;
    }

    const rownav::MetricsSummary metrics = rownav::summarize(result.record);
    std::cout << rownav::metrics_to_json(metrics).dump(2) << '\n';
    if (!metrics_path.empty()) write_text(metrics_path, rownav::metrics_to_json(metrics).dump(2) + "\n");
    if (!csv_path.empty())
        write_text(csv_path, rownav::metrics_csv_header() + "\n" + rownav::metrics_csv_row(metrics) + "\n");
    return kExitOk;
}

int sweep_command(const CommonArgs& common, const std::vector<double>& rates, int n_seeds,
                  const std::string& out_path, const std::string& csv_path) {
    const rownav::FieldSpec spec = rownav::load_scenario(common.scenario_path);
    const rownav::ControlConfig cfg = load_config_or_default(common.config_path);
    const auto seeds = seed_list(common.seed, n_seeds);

    rownav::json out = rownav::json::array();
    std::ostringstream csv;
    csv << "rate_hz,seed,pl_relevant,ekf_relevant\n";
    for (double rate : rates) {
        const rownav::ComparisonReport report = rownav::compare_modes(spec, seeds, cfg, rate);
        rownav::json entry = rownav::comparison_to_json(report);
        out.push_back(entry);
        for (const rownav::ComparisonRow& row : report.rows)
            csv << rate << ',' << row.seed << ',' << row.pl_relevant << ',' << row.ekf_relevant
                << '\n';
        std::cout << "rate " << rate << " Hz: PL relevant " << report.pl.relevant_interventions
                  << ", PL+EKF relevant " << report.ekf.relevant_interventions << '\n';
    }
    if (!out_path.empty()) write_text(out_path, out.dump(2) + "\n");
    if (!csv_path.empty()) write_text(csv_path, csv.str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Row-following navigation benchmark"};
    app.footer(kConfigKeyHelp);
    app.require_subcommand(1);

    CommonArgs common;
    std::string mode_str, out_path, metrics_path, csv_path, scan_log_path, log_path;
    std::string rates_str = "40,10,5";
    int n_seeds = 10;
    bool strict = false;

    CLI::App* run = app.add_subcommand("run", "Run one closed-loop episode");
    run->add_option("scenario", common.scenario_path, "Scenario JSON file")->required();
    run->add_option("--mode", mode_str, "PL or PL+EKF (default: ekf.enabled from config)");
    run->add_option("--seed", common.seed, "Episode seed (sensor noise streams)");
    run->add_option("--rate-hz", common.rate_hz, "Scan/control rate; must divide 40");
    run->add_option("--config", common.config_path, "Flat key=value config file");
    run->add_option("--out", out_path, "Write the run log (JSON Lines)");
    run->add_option("--metrics", metrics_path, "Write the metrics summary (JSON)");
    run->add_option("--csv", csv_path, "Write the metrics summary (CSV)");
    run->add_option("--scan-log", scan_log_path, "Write the raw scan log (JSON Lines)");

    CLI::App* compare = app.add_subcommand("compare", "Paired PL vs PL+EKF over several seeds");
    compare->add_option("scenario", common.scenario_path, "Scenario JSON file")->required();
    compare->add_option("--seeds", n_seeds, "Number of paired seeds")->check(CLI::Range(2, 10000));
    compare->add_option("--seed-base", common.seed, "First seed of the list");
    compare->add_option("--rate-hz", common.rate_hz, "Scan/control rate; must divide 40");
    compare->add_option("--config", common.config_path, "Flat key=value config file");
    compare->add_option("--out", out_path, "Write the comparison report (JSON)");
    compare->add_option("--csv", csv_path, "Write the per-seed table (CSV)");

    CLI::App* replay = app.add_subcommand("replay", "Recompute a run from its log");
    replay->add_option("log", log_path, "Run log (JSON Lines)")->required();
    replay->add_option("--mode", mode_str, "Recompute under this mode (warns on mismatch)");
    replay->add_option("--metrics", metrics_path, "Write the metrics summary (JSON)");
    replay->add_option("--csv", csv_path, "Write the metrics summary (CSV)");
    replay->add_flag("--strict", strict, "Fail if recomputed estimates differ from the log");

    CLI::App* sweep = app.add_subcommand("sweep", "Rate ablation over a scenario");
    sweep->add_option("scenario", common.scenario_path, "Scenario JSON file")->required();
    sweep->add_option("--rates", rates_str, "Comma-separated rates in Hz (default 40,10,5)");
    sweep->add_option("--seeds", n_seeds, "Number of paired seeds")->check(CLI::Range(2, 10000));
    sweep->add_option("--seed-base", common.seed, "First seed of the list");
    sweep->add_option("--config", common.config_path, "Flat key=value config file");
    sweep->add_option("--out", out_path, "Write the sweep report (JSON)");
    sweep->add_option("--csv", csv_path, "Write the per-rate table (CSV)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return run_command(common, mode_str, out_path, metrics_path, csv_path, scan_log_path);
        if (compare->parsed()) return compare_command(common, n_seeds, out_path, csv_path);
        if (replay->parsed())
            return replay_command(log_path, mode_str, metrics_path, csv_path, strict);
        if (sweep->parsed()) {
            std::vector<double> rates;
            std::string token;
            std::istringstream in(rates_str);
            while (std::getline(in, token, ',')) rates.push_back(std::stod(token));
            if (rates.empty()) throw std::invalid_argument("sweep: empty rate list");
            return sweep_command(common, rates, n_seeds, out_path, csv_path);
        }
    } catch (const rownav::ParseError& ex) {
        std::cerr << "parse error: " << ex.what() << '\n';
        return kExitParse;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "config error: " << ex.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}
