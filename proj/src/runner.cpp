#include "macal/runner.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace macal {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string render_csv(const RunConfig& config, const SweepResult& result) {
    std::ostringstream out;
    for (const auto& [key, value] : describe_config(config)) {
        out << "# " << key << " = " << value << "\n";
    }
    out << result.variable << ",method,rmse_deg,success_rate,n_trials,n_trimmed\n";
    for (const PointAggregate& point : result.points) {
        out << format_double(point.x) << ',' << method_name(point.method) << ',';
        if (point.feasible) out << format_double(point.rmse_deg);
        out << ',' << format_double(point.success) << ',' << point.n_trials << ','
            << point.n_trimmed << "\n";
    }
    return out.str();
}

std::string render_json(const RunConfig& config, const SweepResult& result) {
    ordered_json root;
    root["experiment"] = experiment_name(config.kind);
    ordered_json echo;
    for (const auto& [key, value] : describe_config(config)) echo[key] = value;
    root["config"] = echo;
    ordered_json rows = ordered_json::array();
    for (const PointAggregate& point : result.points) {
        ordered_json row;
        row[result.variable] = point.x;
        row["method"] = method_name(point.method);
        if (point.feasible) {
            row["rmse_deg"] = point.rmse_deg;
            row["rmse_rad"] = point.rmse_rad;
        } else {
            row["rmse_deg"] = nullptr;
            row["rmse_rad"] = nullptr;
        }
        row["success_rate"] = point.success;
        row["n_trials"] = point.n_trials;
        row["n_trimmed"] = point.n_trimmed;
        rows.push_back(row);
    }
    root["results"] = rows;
    return root.dump(2) + "\n";
}

void write_artifact(const RunConfig& config, const std::string& artifact) {
    if (config.out_path.empty()) {
        std::cout << artifact;
        std::cout.flush();
        return;
    }
    std::ofstream file(config.out_path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw std::invalid_argument("out: cannot write '" + config.out_path + "'");
    }
    file << artifact;
    file.flush();
    if (!file) {
        throw std::invalid_argument("out: write failed for '" + config.out_path + "'");
    }
}

void log_sweep(const SweepResult& result, std::ostream& log) {
    const std::size_t methods = result.grid.empty() ? 0 : result.points.size() / result.grid.size();
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
        log << result.variable << '=' << format_double(result.grid[i]) << ':';
        for (std::size_t j = 0; j < methods; ++j) {
            const PointAggregate& point = result.points[i * methods + j];
            log << ' ' << method_name(point.method) << " rmse_deg="
                << (point.feasible ? format_double(point.rmse_deg) : "-")
                << " success=" << format_double(point.success) << ';';
        }
        log << "\n";
    }
}

ordered_json ape_rows(const Eigen::MatrixXd& ape) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index m = 0; m < ape.rows(); ++m) {
        rows.push_back({ape(m, 0), ape(m, 1)});
    }
    return rows;
}

ordered_json degrees_of(const Eigen::VectorXd& radians) {
    ordered_json values = ordered_json::array();
    for (Eigen::Index i = 0; i < radians.size(); ++i) values.push_back(rad2deg(radians[i]));
    return values;
}

int run_debug(const RunConfig& config, std::ostream& log) {
    const SimulationConfig& sim = config.simulation;
    const std::uint64_t seed = derive_seed(config.master_seed, 0, 0);
    const TrialData data =
        make_trial_data(sim, sim.num_sources, noise_power_from_snr_db(sim.snr_db), seed);
    const CalibrationState state =
        ao_calibrate(data.z_xy, sim.geometry.wavelength, data.geometry_xy.nominal_positions(),
                     sim.geometry.num_calibrated, sim.num_sources, sim.ao);
    const Eigen::VectorXd errors = pair_errors(state.theta, data.scenario.doas);

    Eigen::MatrixXd ape_true(data.geometry_xy.size(), 2);
    ape_true.col(0) = data.geometry_xy.ape_x;
    ape_true.col(1) = data.geometry_xy.ape_y;

    ordered_json root;
    root["experiment"] = experiment_name(config.kind);
    ordered_json echo;
    for (const auto& [key, value] : describe_config(config)) echo[key] = value;
    root["config"] = echo;
    root["trial_seed"] = seed;
    root["theta_true_deg"] = degrees_of(data.scenario.doas);
    root["theta_est_deg"] = degrees_of(state.theta);
    root["theta_error_deg"] = degrees_of(errors);
    root["ape_true"] = ape_rows(ape_true);
    root["ape_est"] = ape_rows(state.ape);
    root["converged"] = state.converged;
    root["iterations"] = state.iterations;
    root["degraded_peaks"] = state.degraded_peaks;
    ordered_json history = ordered_json::array();
    for (std::size_t l = 0; l < state.history.size(); ++l) {
        const IterationRecord& record = state.history[l];
        ordered_json row;
        row["iteration"] = static_cast<int>(l + 1);
        row["theta_deg"] = degrees_of(record.theta);
        if (std::isfinite(record.theta_change_sq)) {
            row["theta_change_sq"] = record.theta_change_sq;
        } else {
            row["theta_change_sq"] = nullptr;
        }
        row["ape_est"] = ape_rows(record.ape);
        history.push_back(row);
    }
    root["history"] = history;
    write_artifact(config, root.dump(2) + "\n");

    log << "seed=" << seed << ": converged=" << (state.converged ? "yes" : "no")
        << " iterations=" << state.iterations
        << " max_theta_error_deg=" << format_double(rad2deg(errors.cwiseAbs().maxCoeff()))
        << "\n";
    return state.converged ? 0 : 4;
}

}  // namespace

std::string render_sweep(const RunConfig& config, const SweepResult& result) {
    return config.format == OutputFormat::Csv ? render_csv(config, result)
                                              : render_json(config, result);
}

int run_experiment(const RunConfig& config, std::ostream& log) {
    if (config.kind == ExperimentKind::DebugScenario) {
        return run_debug(config, log);
    }
    SweepResult result;
    switch (config.kind) {
        case ExperimentKind::SweepSnr:
            result = sweep_snr(config.simulation, config.master_seed);
            break;
        case ExperimentKind::SweepIterations:
            result = sweep_iterations(config.simulation, config.master_seed);
            break;
        case ExperimentKind::SweepSources:
            result = sweep_sources(config.simulation, config.master_seed);
            break;
        case ExperimentKind::DebugScenario:
            break;
    }
    write_artifact(config, render_sweep(config, result));
    log_sweep(result, log);
    if (result.proposed_runs > 0 && result.converged_runs == 0) {
        return 4;
    }
    return 0;
}

}  // namespace macal
