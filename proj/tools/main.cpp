#include <iostream>
#include <stdexcept>

#include <CLI11.hpp>

#include "macal/errors.hpp"
#include "macal/runner.hpp"

namespace {

void add_shared_options(CLI::App* sub, macal::CliOverrides& flags) {
    sub->add_option("--config", flags.config_path, "config file of key = value lines");
    sub->add_option("--seed", flags.seed, "master seed for the trial streams");
    sub->add_option("--out", flags.out, "artifact path (stdout when omitted)");
    sub->add_option("--format", flags.format, "csv or json");
    sub->add_option("--trials", flags.trials, "Monte Carlo trials per sweep point");
    sub->add_option("--methods", flags.methods,
                    "comma list: proposed-xy,proposed-x,proposed-y,music-all,music-calibrated");
    sub->add_option("--m", flags.m, "antenna count");
    sub->add_option("--mc", flags.mc, "calibrated antenna count");
    sub->add_option("--t", flags.t, "snapshots per trial");
    sub->add_option("--k", flags.k, "source count");
    sub->add_option("--snr-grid", flags.snr_grid, "comma list of SNR points in dB");
    sub->add_option("--snr-db", flags.snr_db, "SNR for single-point sweeps");
    sub->add_option("--k-min", flags.k_min, "smallest source count for sweep-sources");
    sub->add_option("--k-max", flags.k_max, "largest source count for sweep-sources");
    sub->add_option("--sigma-x", flags.sigma_x, "position-error scale along x (wavelengths)");
    sub->add_option("--sigma-y", flags.sigma_y, "position-error scale along y (wavelengths)");
    sub->add_option("--grid-points", flags.grid_points, "spectrum search grid size");
    sub->add_option("--epsilon", flags.epsilon, "relative ridge for the stage-two solve");
    sub->add_option("--delta", flags.delta, "squared-change stop in rad^2, or auto");
    sub->add_option("--max-iters", flags.max_iters, "iteration cap for self-calibration");
    sub->add_option("--threads", flags.threads, "trial workers, 0 = hardware");
    sub->add_option("--stage2", flags.stage2, "fixed-nominal or track-estimate");
    sub->add_option("--layout", flags.layout, "uniform or random-min-spacing");
    sub->add_option("--min-spacing", flags.min_spacing, "minimum gap for the random layout");
    sub->add_option("--region", flags.region, "movement region length (wavelengths)");
    sub->add_option("--wavelength", flags.wavelength, "carrier wavelength (internal unit)");
    sub->add_option("--trim", flags.trim, "fraction of worst trials dropped from the RMSE");
    sub->add_option("--success-threshold-deg", flags.success_threshold_deg,
                    "per-source success threshold");
    sub->add_option("--min-separation-deg", flags.min_separation_deg,
                    "minimum gap between drawn directions");
    sub->add_option("--theta-min-deg", flags.theta_min_deg, "lower scan/draw bound");
    sub->add_option("--theta-max-deg", flags.theta_max_deg, "upper scan/draw bound");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-calibrating DOA estimation for movable-antenna arrays"};
    app.require_subcommand(1);

    macal::CliOverrides flags;
    CLI::App* snr = app.add_subcommand("sweep-snr", "RMSE and success rate across an SNR grid");
    CLI::App* iters = app.add_subcommand("sweep-iterations",
                                         "error per self-calibration pass at one SNR");
    CLI::App* sources =
        app.add_subcommand("sweep-sources", "success rate across source counts at one SNR");
    CLI::App* debug =
        app.add_subcommand("debug-scenario", "single trial dumped as JSON with history");
    for (CLI::App* sub : {snr, iters, sources, debug}) add_shared_options(sub, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    macal::ExperimentKind kind = macal::ExperimentKind::SweepSnr;
    if (iters->parsed()) kind = macal::ExperimentKind::SweepIterations;
    if (sources->parsed()) kind = macal::ExperimentKind::SweepSources;
    if (debug->parsed()) kind = macal::ExperimentKind::DebugScenario;

    try {
        const macal::RunConfig config = macal::parse_config(kind, flags);
        return macal::run_experiment(config, std::cerr);
    } catch (const macal::NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const macal::DegenerateGeometry& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const macal::UnsupportedConfiguration& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
}
