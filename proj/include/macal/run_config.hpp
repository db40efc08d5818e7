#ifndef MACAL_RUN_CONFIG_HPP
#define MACAL_RUN_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "macal/eval.hpp"

namespace macal {

enum class ExperimentKind { SweepSnr, SweepIterations, SweepSources, DebugScenario };

std::string experiment_name(ExperimentKind kind);

enum class OutputFormat { Csv, Json };

struct RunConfig {
    ExperimentKind kind = ExperimentKind::SweepSnr;
    SimulationConfig simulation;
    std::uint64_t master_seed = 1;
    std::string out_path;  ///< empty writes the artifact to stdout
    OutputFormat format = OutputFormat::Csv;
};

/// Values collected from the command line; unset fields fall back to the
/// config file and then to the built-in defaults.
struct CliOverrides {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<int> trials;
    std::optional<std::string> methods;
    std::optional<int> m;
    std::optional<int> mc;
    std::optional<int> t;
    std::optional<int> k;
    std::optional<std::string> snr_grid;
    std::optional<double> snr_db;
    std::optional<int> k_min;
    std::optional<int> k_max;
    std::optional<double> sigma_x;
    std::optional<double> sigma_y;
    std::optional<int> grid_points;
    std::optional<double> epsilon;
    std::optional<double> delta;
    std::optional<int> max_iters;
    std::optional<int> threads;
    std::optional<std::string> stage2;
    std::optional<std::string> layout;
    std::optional<double> min_spacing;
    std::optional<double> region;
    std::optional<double> wavelength;
    std::optional<double> trim;
    std::optional<double> success_threshold_deg;
    std::optional<double> min_separation_deg;
    std::optional<double> theta_min_deg;
    std::optional<double> theta_max_deg;
};

/// Layered assembly: per-experiment defaults, then `key = value` lines from
/// the config file, then the flags. Throws std::invalid_argument naming the
/// offending key on unknown keys or out-of-range values.
RunConfig parse_config(ExperimentKind kind, const CliOverrides& overrides);

/// Applies one config key; shared by the file parser and flag merging so the
/// two spellings cannot drift apart.
void apply_config_key(RunConfig& config, const std::string& key, const std::string& value);

/// Effective configuration as ordered key/value text, embedded in output
/// artifacts so a result file is reproducible on its own.
std::vector<std::pair<std::string, std::string>> describe_config(const RunConfig& config);

/// Shortest round-trip decimal text; keeps artifacts byte-stable.
std::string format_double(double value);

}  // namespace macal

#endif
