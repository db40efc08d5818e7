#include "macal/run_config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <system_error>

namespace macal {

namespace {

std::string trimmed(const std::string& text) {
    const std::size_t begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const std::size_t end = text.find_last_not_of(" \t\r\n");
    return text.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::invalid_argument(key + ": cannot parse '" + value + "'");
}

double parse_num(const std::string& key, const std::string& value) {
    const std::string token = trimmed(value);
    double parsed = 0.0;
    const char* end = token.data() + token.size();
    const auto result = std::from_chars(token.data(), end, parsed);
    if (result.ec != std::errc() || result.ptr != end || token.empty()) bad_value(key, value);
    return parsed;
}

int parse_int(const std::string& key, const std::string& value) {
    const std::string token = trimmed(value);
    long long parsed = 0;
    const char* end = token.data() + token.size();
    const auto result = std::from_chars(token.data(), end, parsed);
    if (result.ec != std::errc() || result.ptr != end || token.empty()) bad_value(key, value);
    if (parsed < std::numeric_limits<int>::min() || parsed > std::numeric_limits<int>::max()) {
        bad_value(key, value);
    }
    return static_cast<int>(parsed);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    const std::string token = trimmed(value);
    std::uint64_t parsed = 0;
    const char* end = token.data() + token.size();
    const auto result = std::from_chars(token.data(), end, parsed);
    if (result.ec != std::errc() || result.ptr != end || token.empty()) bad_value(key, value);
    return parsed;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= value.size()) {
        const std::size_t comma = value.find(',', start);
        const std::size_t end = comma == std::string::npos ? value.size() : comma;
        items.push_back(trimmed(value.substr(start, end - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return items;
}

void apply_config_file(RunConfig& config, const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        throw std::invalid_argument("config: cannot open '" + path + "'");
    }
    std::string line;
    int number = 0;
    while (std::getline(file, line)) {
        number += 1;
        const std::string text = trimmed(line);
        if (text.empty() || text[0] == '#') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(number) +
                                        " is not 'key = value'");
        }
        const std::string key = trimmed(text.substr(0, eq));
        const std::string value = trimmed(text.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument("config: line " + std::to_string(number) +
                                        " has an empty key");
        }
        apply_config_key(config, key, value);
    }
}

}  // namespace

std::string experiment_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::SweepSnr: return "sweep-snr";
        case ExperimentKind::SweepIterations: return "sweep-iterations";
        case ExperimentKind::SweepSources: return "sweep-sources";
        case ExperimentKind::DebugScenario: return "debug-scenario";
    }
    throw std::invalid_argument("unknown experiment kind");
}

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

void apply_config_key(RunConfig& config, const std::string& key, const std::string& value) {
    SimulationConfig& sim = config.simulation;
    if (key == "seed") {
        config.master_seed = parse_u64(key, value);
    } else if (key == "out") {
        config.out_path = value;
    } else if (key == "format") {
        if (value == "csv") {
            config.format = OutputFormat::Csv;
        } else if (value == "json") {
            config.format = OutputFormat::Json;
        } else {
            throw std::invalid_argument("format: expected csv or json");
        }
    } else if (key == "trials") {
        sim.trials = parse_int(key, value);
    } else if (key == "methods") {
        std::vector<Method> methods;
        for (const std::string& name : split_list(value)) {
            methods.push_back(parse_method(name));
        }
        sim.methods = methods;
    } else if (key == "m") {
        sim.geometry.num_antennas = parse_int(key, value);
    } else if (key == "mc") {
        sim.geometry.num_calibrated = parse_int(key, value);
    } else if (key == "t") {
        sim.snapshots = parse_int(key, value);
    } else if (key == "k") {
        sim.num_sources = parse_int(key, value);
    } else if (key == "snr-grid") {
        std::vector<double> grid;
        for (const std::string& item : split_list(value)) {
            grid.push_back(parse_num(key, item));
        }
        sim.snr_grid_db = grid;
    } else if (key == "snr-db") {
        sim.snr_db = parse_num(key, value);
    } else if (key == "k-min") {
        sim.k_min = parse_int(key, value);
    } else if (key == "k-max") {
        sim.k_max = parse_int(key, value);
    } else if (key == "sigma-x") {
        sim.geometry.sigma_x = parse_num(key, value);
    } else if (key == "sigma-y") {
        sim.geometry.sigma_y = parse_num(key, value);
    } else if (key == "grid-points") {
        sim.ao.grid.points = parse_int(key, value);
    } else if (key == "epsilon") {
        sim.ao.epsilon_rel = parse_num(key, value);
    } else if (key == "delta") {
        sim.ao.delta_sq = value == "auto" ? -1.0 : parse_num(key, value);
    } else if (key == "max-iters") {
        sim.ao.max_iterations = parse_int(key, value);
    } else if (key == "threads") {
        sim.threads = parse_int(key, value);
    } else if (key == "stage2") {
        if (value == "fixed-nominal") {
            sim.ao.stage2 = Stage2Reference::FixedNominal;
        } else if (value == "track-estimate") {
            sim.ao.stage2 = Stage2Reference::TrackEstimate;
        } else {
            throw std::invalid_argument("stage2: expected fixed-nominal or track-estimate");
        }
    } else if (key == "layout") {
        if (value == "uniform") {
            sim.geometry.layout = LayoutPolicy::Uniform;
        } else if (value == "random-min-spacing") {
            sim.geometry.layout = LayoutPolicy::RandomMinSpacing;
        } else {
            throw std::invalid_argument("layout: expected uniform or random-min-spacing");
        }
    } else if (key == "min-spacing") {
        sim.geometry.min_spacing = parse_num(key, value);
    } else if (key == "region") {
        sim.geometry.region_length = parse_num(key, value);
    } else if (key == "wavelength") {
        sim.geometry.wavelength = parse_num(key, value);
    } else if (key == "trim") {
        sim.trim = parse_num(key, value);
    } else if (key == "success-threshold-deg") {
        sim.success_threshold_deg = parse_num(key, value);
    } else if (key == "min-separation-deg") {
        sim.min_separation_deg = parse_num(key, value);
    } else if (key == "theta-min-deg") {
        sim.theta_min = deg2rad(parse_num(key, value));
        sim.ao.grid.theta_min = sim.theta_min;
    } else if (key == "theta-max-deg") {
        sim.theta_max = deg2rad(parse_num(key, value));
        sim.ao.grid.theta_max = sim.theta_max;
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

RunConfig parse_config(ExperimentKind kind, const CliOverrides& overrides) {
    RunConfig config;
    config.kind = kind;
    switch (kind) {
        case ExperimentKind::SweepSnr:
            break;
        case ExperimentKind::SweepIterations:
            config.simulation.ao.max_iterations = 40;
            config.simulation.snr_db = 10.0;
            break;
        case ExperimentKind::SweepSources:
            config.simulation.snr_db = 15.0;
            break;
        case ExperimentKind::DebugScenario:
            config.simulation.snr_db = 10.0;
            config.simulation.trials = 1;
            config.format = OutputFormat::Json;
            break;
    }

    if (overrides.config_path) apply_config_file(config, *overrides.config_path);

    const auto flag_s = [&](const char* key, const std::optional<std::string>& v) {
        if (v) apply_config_key(config, key, *v);
    };
    const auto flag_i = [&](const char* key, const std::optional<int>& v) {
        if (v) apply_config_key(config, key, std::to_string(*v));
    };
    const auto flag_d = [&](const char* key, const std::optional<double>& v) {
        if (v) apply_config_key(config, key, format_double(*v));
    };
    if (overrides.seed) apply_config_key(config, "seed", std::to_string(*overrides.seed));
    flag_s("out", overrides.out);
    flag_s("format", overrides.format);
    flag_i("trials", overrides.trials);
    flag_s("methods", overrides.methods);
    flag_i("m", overrides.m);
    flag_i("mc", overrides.mc);
    flag_i("t", overrides.t);
    flag_i("k", overrides.k);
    flag_s("snr-grid", overrides.snr_grid);
    flag_d("snr-db", overrides.snr_db);
    flag_i("k-min", overrides.k_min);
    flag_i("k-max", overrides.k_max);
    flag_d("sigma-x", overrides.sigma_x);
    flag_d("sigma-y", overrides.sigma_y);
    flag_i("grid-points", overrides.grid_points);
    flag_d("epsilon", overrides.epsilon);
    flag_d("delta", overrides.delta);
    flag_i("max-iters", overrides.max_iters);
    flag_i("threads", overrides.threads);
    flag_s("stage2", overrides.stage2);
    flag_s("layout", overrides.layout);
    flag_d("min-spacing", overrides.min_spacing);
    flag_d("region", overrides.region);
    flag_d("wavelength", overrides.wavelength);
    flag_d("trim", overrides.trim);
    flag_d("success-threshold-deg", overrides.success_threshold_deg);
    flag_d("min-separation-deg", overrides.min_separation_deg);
    flag_d("theta-min-deg", overrides.theta_min_deg);
    flag_d("theta-max-deg", overrides.theta_max_deg);

    config.simulation.validate();
    if (kind == ExperimentKind::DebugScenario && config.format != OutputFormat::Json) {
        throw std::invalid_argument("format: debug-scenario emits json only");
    }
    return config;
}

std::vector<std::pair<std::string, std::string>> describe_config(const RunConfig& config) {
    const SimulationConfig& sim = config.simulation;
    std::vector<std::pair<std::string, std::string>> echo;
    echo.emplace_back("experiment", experiment_name(config.kind));
    echo.emplace_back("seed", std::to_string(config.master_seed));

    std::string methods;
    for (Method method : sim.methods) {
        if (!methods.empty()) methods += ",";
        methods += method_name(method);
    }
    echo.emplace_back("methods", methods);

    echo.emplace_back("m", std::to_string(sim.geometry.num_antennas));
    echo.emplace_back("mc", std::to_string(sim.geometry.num_calibrated));
    echo.emplace_back("t", std::to_string(sim.snapshots));
    echo.emplace_back("k", std::to_string(sim.num_sources));
    echo.emplace_back("k-min", std::to_string(sim.k_min));
    echo.emplace_back("k-max", std::to_string(sim.k_max));

    std::string grid;
    for (double snr : sim.snr_grid_db) {
        if (!grid.empty()) grid += ",";
        grid += format_double(snr);
    }
    echo.emplace_back("snr-grid", grid);
    echo.emplace_back("snr-db", format_double(sim.snr_db));

    echo.emplace_back("trials", std::to_string(sim.trials));
    echo.emplace_back("trim", format_double(sim.trim));
    echo.emplace_back("success-threshold-deg", format_double(sim.success_threshold_deg));
    echo.emplace_back("min-separation-deg", format_double(sim.min_separation_deg));
    echo.emplace_back("theta-min-deg", format_double(rad2deg(sim.theta_min)));
    echo.emplace_back("theta-max-deg", format_double(rad2deg(sim.theta_max)));

    echo.emplace_back("wavelength", format_double(sim.geometry.wavelength));
    echo.emplace_back("region", format_double(sim.geometry.region_length));
    echo.emplace_back("layout", sim.geometry.layout == LayoutPolicy::Uniform
                                    ? "uniform"
                                    : "random-min-spacing");
    echo.emplace_back("min-spacing", format_double(sim.geometry.min_spacing));
    echo.emplace_back("sigma-x", format_double(sim.geometry.sigma_x));
    echo.emplace_back("sigma-y", format_double(sim.geometry.sigma_y));

    echo.emplace_back("grid-points", std::to_string(sim.ao.grid.points));
    echo.emplace_back("epsilon", format_double(sim.ao.epsilon_rel));
    echo.emplace_back("delta",
                      sim.ao.delta_sq < 0.0 ? "auto" : format_double(sim.ao.delta_sq));
    echo.emplace_back("max-iters", std::to_string(sim.ao.max_iterations));
    echo.emplace_back("stage2", sim.ao.stage2 == Stage2Reference::FixedNominal
                                    ? "fixed-nominal"
                                    : "track-estimate");
    echo.emplace_back("threads", std::to_string(sim.threads));
    return echo;
}

}  // namespace macal
