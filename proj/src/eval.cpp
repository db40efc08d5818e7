#include "macal/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "macal/errors.hpp"

namespace macal {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

/// Runs body(0..count-1) on up to `threads` workers. Trials derive their own
/// seeds, so the result is independent of scheduling.
void for_each_index(int count, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        threads = hw == 0 ? 1 : static_cast<int>(hw);
    }
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::string method_name(Method method) {
    switch (method) {
        case Method::ProposedXY: return "proposed-xy";
        case Method::ProposedX: return "proposed-x";
        case Method::ProposedY: return "proposed-y";
        case Method::MusicAll: return "music-all";
        case Method::MusicCalibrated: return "music-calibrated";
    }
    throw std::invalid_argument("methods: unknown method tag");
}

Method parse_method(const std::string& name) {
    for (Method method : default_methods()) {
        if (method_name(method) == name) return method;
    }
    throw std::invalid_argument("methods: unknown method '" + name + "'");
}

std::vector<Method> default_methods() {
    return {Method::ProposedXY, Method::ProposedX, Method::ProposedY, Method::MusicAll,
            Method::MusicCalibrated};
}

bool is_proposed(Method method) {
    return method == Method::ProposedXY || method == Method::ProposedX ||
           method == Method::ProposedY;
}

Eigen::VectorXcd oracle_constrained_qp(const Eigen::MatrixXcd& regularized, int num_calibrated) {
    const int m = static_cast<int>(regularized.rows());
    require(regularized.cols() == m, "oracle: matrix must be square");
    require(num_calibrated >= 1 && num_calibrated <= m, "oracle: bad constraint count");

    const int n = m + num_calibrated;
    Eigen::MatrixXcd kkt = Eigen::MatrixXcd::Zero(n, n);
    kkt.topLeftCorner(m, m) = 2.0 * regularized;
    const Eigen::MatrixXcd w = constraint_matrix(m, num_calibrated);
    kkt.topRightCorner(m, num_calibrated) = w;
    kkt.bottomLeftCorner(num_calibrated, m) = w.adjoint();
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    rhs.tail(num_calibrated).setOnes();

    Eigen::FullPivLU<Eigen::MatrixXcd> lu(kkt);
    if (!lu.isInvertible()) {
        throw NumericalFailure("oracle: singular KKT system");
    }
    Eigen::VectorXcd solution = lu.solve(rhs);
    solution += lu.solve((rhs - kkt * solution).eval());
    return solution.head(m);
}

Eigen::VectorXd pair_errors(const Eigen::VectorXd& estimates, const Eigen::VectorXd& truths) {
    require(estimates.size() == truths.size(), "pairing: size mismatch");
    std::vector<double> est(estimates.data(), estimates.data() + estimates.size());
    std::vector<double> tru(truths.data(), truths.data() + truths.size());
    std::sort(est.begin(), est.end());
    std::sort(tru.begin(), tru.end());
    Eigen::VectorXd errors(estimates.size());
    for (int i = 0; i < errors.size(); ++i) errors[i] = est[i] - tru[i];
    return errors;
}

TrimmedRmse trimmed_rmse(const std::vector<Eigen::VectorXd>& errors, double trim) {
    const int n = static_cast<int>(errors.size());
    require(n >= 1, "rmse: no trials");
    require(trim >= 0.0 && trim < 1.0, "trim: must lie in [0, 1)");

    std::vector<double> totals(n);
    for (int i = 0; i < n; ++i) totals[i] = errors[i].squaredNorm();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&totals](int a, int b) { return totals[a] > totals[b]; });

    // ceil with a tiny slack so e.g. 0.05 * 20 counts as exactly one trial
    // despite the product rounding just above 1.0 in binary.
    int drop = trim > 0.0 ? static_cast<int>(std::ceil(trim * n - 1e-9)) : 0;
    drop = std::min(drop, n - 1);

    double sum_sq = 0.0;
    long entries = 0;
    for (int r = drop; r < n; ++r) {
        sum_sq += totals[order[r]];
        entries += errors[order[r]].size();
    }
    require(entries > 0, "rmse: kept trials carry no error entries");

    TrimmedRmse result;
    result.rmse = std::sqrt(sum_sq / static_cast<double>(entries));
    result.n_trimmed = drop;
    result.n_kept = n - drop;
    return result;
}

double success_rate(const std::vector<Eigen::VectorXd>& errors, double threshold) {
    require(threshold > 0.0, "success-threshold: must be positive");
    long hits = 0;
    long total = 0;
    for (const Eigen::VectorXd& trial : errors) {
        for (int i = 0; i < trial.size(); ++i) {
            total += 1;
            if (std::abs(trial[i]) <= threshold) hits += 1;
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(hits) / static_cast<double>(total);
}

double noise_power_from_snr_db(double snr_db) {
    return std::pow(10.0, -snr_db / 10.0);
}

BaselineResult baseline_music(const SnapshotMatrix& snapshots, const ArrayGeometry& geometry,
                              int num_sources, BaselineMode mode, const GridSpec& grid) {
    geometry.validate();
    require(num_sources >= 1, "k: need at least one source");
    require(snapshots.samples.rows() == geometry.size(), "baseline: snapshot row mismatch");

    BaselineResult result;
    if (mode == BaselineMode::Calibrated) {
        const int mc = geometry.num_calibrated;
        if (num_sources >= mc) {
            result.feasible = false;
            return result;
        }
        SnapshotMatrix head;
        head.samples = snapshots.samples.topRows(mc);
        head.seed = snapshots.seed;
        const Positions positions{geometry.nominal_x.head(mc),
                                  Eigen::VectorXd::Zero(mc)};
        const Eigen::MatrixXcd noise = decompose(sample_covariance(head), num_sources).noise;
        const Pseudospectrum spectrum =
            music_spectrum(noise, geometry.wavelength, positions, grid);
        const PeakSelection peaks = pick_peaks(spectrum, num_sources);
        result.angles = peaks.angles;
        result.degraded = peaks.degraded;
        return result;
    }

    require(num_sources < geometry.size(), "k: need K < M");
    const Eigen::MatrixXcd noise = decompose(sample_covariance(snapshots), num_sources).noise;
    const Pseudospectrum spectrum =
        music_spectrum(noise, geometry.wavelength, geometry.nominal_positions(), grid);
    const PeakSelection peaks = pick_peaks(spectrum, num_sources);
    result.angles = peaks.angles;
    result.degraded = peaks.degraded;
    return result;
}

void SimulationConfig::validate() const {
    require(geometry.wavelength > 0.0, "wavelength: must be positive");
    require(geometry.region_length > 0.0, "region: must be positive");
    require(geometry.num_antennas >= 2, "m: need at least two antennas");
    require(geometry.num_calibrated >= 1 && geometry.num_calibrated < geometry.num_antennas,
            "mc: must satisfy 1 <= mc < m");
    require(geometry.min_spacing >= 0.0, "min-spacing: must be nonnegative");
    if (geometry.layout == LayoutPolicy::RandomMinSpacing) {
        require(geometry.region_length > (geometry.num_antennas - 1) * geometry.min_spacing,
                "min-spacing: region too small for this antenna count");
    }
    require(geometry.sigma_x >= 0.0, "sigma-x: must be nonnegative");
    require(geometry.sigma_y >= 0.0, "sigma-y: must be nonnegative");
    require(geometry.sigma_x < 2.0 * geometry.wavelength,
            "sigma-x: position errors must stay below one wavelength");
    require(geometry.sigma_y < 2.0 * geometry.wavelength,
            "sigma-y: position errors must stay below one wavelength");

    require(num_sources >= 1 && num_sources < geometry.num_antennas, "k: need 1 <= k < m");
    require(snapshots >= 1, "t: need at least one snapshot");
    require(std::isfinite(theta_min) && std::isfinite(theta_max) && theta_min < theta_max,
            "theta-min-deg/theta-max-deg: empty interval");
    require(min_separation_deg >= 0.0, "min-separation-deg: must be nonnegative");
    require(trials >= 1, "trials: need at least one trial");
    require(trim >= 0.0 && trim < 1.0, "trim: must lie in [0, 1)");
    require(success_threshold_deg > 0.0, "success-threshold-deg: must be positive");
    require(!snr_grid_db.empty(), "snr-grid: must not be empty");
    require(k_min >= 1 && k_min <= k_max && k_max < geometry.num_antennas,
            "k-min/k-max: need 1 <= k-min <= k-max < m");
    require(ao.epsilon_rel > 0.0, "epsilon: must be positive");
    require(ao.delta_sq < 0.0 || ao.delta_sq > 0.0, "delta: must be positive");
    require(ao.max_iterations >= 1, "max-iters: need at least one iteration");
    require(ao.grid.points >= 2, "grid-points: need at least two points");
    require(threads >= 0, "threads: must be nonnegative");
    require(!methods.empty(), "methods: must not be empty");
    for (std::size_t i = 0; i < methods.size(); ++i) {
        for (std::size_t j = i + 1; j < methods.size(); ++j) {
            require(methods[i] != methods[j], "methods: duplicate entry");
        }
    }
    const bool any_proposed =
        std::any_of(methods.begin(), methods.end(), [](Method m) { return is_proposed(m); });
    if (any_proposed) {
        require(num_sources >= 2, "k: self-calibration needs at least two sources");
        require(k_min >= 2, "k-min: self-calibration needs at least two sources");
    }
    const double span = theta_max - theta_min;
    require((std::max(num_sources, k_max) - 1) * deg2rad(min_separation_deg) < span,
            "min-separation-deg: interval too narrow for this source count");
}

Eigen::VectorXd draw_doas(int count, double theta_min, double theta_max, double min_separation,
                          Rng& rng) {
    require(count >= 1, "k: need at least one source");
    require(theta_min < theta_max, "theta-min-deg/theta-max-deg: empty interval");
    require(min_separation >= 0.0, "min-separation-deg: must be nonnegative");

    std::uniform_real_distribution<double> uniform(theta_min, theta_max);
    std::vector<double> draw(count);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        for (double& v : draw) v = uniform(rng);
        std::sort(draw.begin(), draw.end());
        bool ok = draw.front() > theta_min && draw.back() < theta_max;
        for (int i = 1; ok && i < count; ++i) {
            ok = draw[i] - draw[i - 1] >= min_separation;
        }
        if (ok) {
            return Eigen::Map<const Eigen::VectorXd>(draw.data(), count);
        }
    }
    throw NumericalFailure("doa draw: separation constraint unmet after 10000 attempts");
}

TrialData make_trial_data(const SimulationConfig& config, int num_sources, double noise_power,
                          std::uint64_t seed) {
    require(num_sources >= 1 && num_sources < config.geometry.num_antennas,
            "k: need 1 <= k < m");
    require(noise_power >= 0.0, "snr-grid: produced a negative noise power");

    TrialData data;
    data.seed = seed;
    data.noise_power = noise_power;

    Rng rng(seed);
    const Eigen::VectorXd layout = draw_nominal_layout(config.geometry, rng);
    const ApeDraw ape = draw_ape_factors(config.geometry.num_antennas, rng);
    data.geometry_xy = assemble_geometry(config.geometry, layout, ape, config.geometry.sigma_x,
                                         config.geometry.sigma_y);
    data.geometry_x =
        assemble_geometry(config.geometry, layout, ape, config.geometry.sigma_x, 0.0);
    data.geometry_y =
        assemble_geometry(config.geometry, layout, ape, 0.0, config.geometry.sigma_y);

    data.scenario.num_sources = num_sources;
    data.scenario.doas = draw_doas(num_sources, config.theta_min, config.theta_max,
                                   deg2rad(config.min_separation_deg), rng);
    data.scenario.source_powers = Eigen::VectorXd::Ones(num_sources);
    data.scenario.noise_power = noise_power;
    data.scenario.snapshots = config.snapshots;
    data.scenario.theta_min = config.theta_min;
    data.scenario.theta_max = config.theta_max;

    const Eigen::MatrixXcd sources = draw_source_signals(data.scenario, rng);
    const Eigen::MatrixXcd noise = draw_noise(config.geometry.num_antennas, config.snapshots,
                                              noise_power, rng);
    data.z_xy = compose_snapshots(data.geometry_xy, data.scenario, sources, noise, seed);
    data.z_x = compose_snapshots(data.geometry_x, data.scenario, sources, noise, seed);
    data.z_y = compose_snapshots(data.geometry_y, data.scenario, sources, noise, seed);
    return data;
}

namespace {

MethodOutcome run_proposed(const SimulationConfig& config, const TrialData& data,
                           const SnapshotMatrix& z, bool keep_history) {
    const CalibrationState state =
        ao_calibrate(z, config.geometry.wavelength, data.geometry_xy.nominal_positions(),
                     config.geometry.num_calibrated, data.scenario.num_sources, config.ao);
    MethodOutcome outcome;
    outcome.converged = state.converged;
    outcome.degraded = state.degraded_peaks;
    outcome.iterations = state.iterations;
    outcome.errors = pair_errors(state.theta, data.scenario.doas);
    if (keep_history) {
        outcome.iteration_errors.reserve(state.history.size());
        for (const IterationRecord& record : state.history) {
            outcome.iteration_errors.push_back(pair_errors(record.theta, data.scenario.doas));
        }
    }
    return outcome;
}

MethodOutcome run_baseline(const SimulationConfig& config, const TrialData& data,
                           BaselineMode mode) {
    const BaselineResult baseline = baseline_music(data.z_xy, data.geometry_xy,
                                                   data.scenario.num_sources, mode,
                                                   config.ao.grid);
    MethodOutcome outcome;
    outcome.feasible = baseline.feasible;
    outcome.degraded = baseline.degraded;
    if (baseline.feasible) {
        outcome.errors = pair_errors(baseline.angles, data.scenario.doas);
    }
    return outcome;
}

}  // namespace

TrialOutcome run_trial(const SimulationConfig& config, int num_sources, double noise_power,
                       std::uint64_t seed, bool keep_history) {
    const TrialData data = make_trial_data(config, num_sources, noise_power, seed);
    TrialOutcome outcome;
    outcome.seed = seed;
    outcome.by_method.reserve(config.methods.size());
    for (Method method : config.methods) {
        switch (method) {
            case Method::ProposedXY:
                outcome.by_method.push_back(run_proposed(config, data, data.z_xy, keep_history));
                break;
            case Method::ProposedX:
                outcome.by_method.push_back(run_proposed(config, data, data.z_x, keep_history));
                break;
            case Method::ProposedY:
                outcome.by_method.push_back(run_proposed(config, data, data.z_y, keep_history));
                break;
            case Method::MusicAll:
                outcome.by_method.push_back(run_baseline(config, data, BaselineMode::All));
                break;
            case Method::MusicCalibrated:
                outcome.by_method.push_back(run_baseline(config, data, BaselineMode::Calibrated));
                break;
        }
    }
    return outcome;
}

namespace {

std::vector<TrialOutcome> run_point(const SimulationConfig& config, int num_sources,
                                    double noise_power, std::uint64_t master_seed,
                                    std::uint64_t point_index, bool keep_history) {
    std::vector<TrialOutcome> outcomes(config.trials);
    for_each_index(config.trials, config.threads, [&](int trial) {
        const std::uint64_t seed = derive_seed(master_seed, point_index, trial);
        outcomes[trial] = run_trial(config, num_sources, noise_power, seed, keep_history);
    });
    return outcomes;
}

PointAggregate finish_aggregate(const SimulationConfig& config, double x, Method method,
                                const std::vector<Eigen::VectorXd>& errors, bool feasible,
                                int n_trials) {
    PointAggregate aggregate;
    aggregate.x = x;
    aggregate.method = method;
    aggregate.feasible = feasible;
    aggregate.n_trials = n_trials;
    if (!feasible) {
        return aggregate;
    }
    const TrimmedRmse trimmed = trimmed_rmse(errors, config.trim);
    aggregate.rmse_rad = trimmed.rmse;
    aggregate.rmse_deg = rad2deg(trimmed.rmse);
    aggregate.n_trimmed = trimmed.n_trimmed;
    aggregate.success = success_rate(errors, deg2rad(config.success_threshold_deg));
    return aggregate;
}

void count_convergence(const SimulationConfig& config, const std::vector<TrialOutcome>& outcomes,
                       SweepResult& result) {
    for (std::size_t j = 0; j < config.methods.size(); ++j) {
        if (!is_proposed(config.methods[j])) continue;
        for (const TrialOutcome& outcome : outcomes) {
            result.proposed_runs += 1;
            if (outcome.by_method[j].converged) result.converged_runs += 1;
        }
    }
}

}  // namespace

SweepResult sweep_snr(const SimulationConfig& config, std::uint64_t master_seed) {
    config.validate();
    SweepResult result;
    result.variable = "snr_db";
    result.grid = config.snr_grid_db;
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
        const double snr_db = result.grid[i];
        const std::vector<TrialOutcome> outcomes = run_point(
            config, config.num_sources, noise_power_from_snr_db(snr_db), master_seed, i, false);
        count_convergence(config, outcomes, result);
        for (std::size_t j = 0; j < config.methods.size(); ++j) {
            bool feasible = true;
            std::vector<Eigen::VectorXd> errors;
            errors.reserve(outcomes.size());
            for (const TrialOutcome& outcome : outcomes) {
                feasible = feasible && outcome.by_method[j].feasible;
                if (outcome.by_method[j].feasible) {
                    errors.push_back(outcome.by_method[j].errors);
                }
            }
            result.points.push_back(finish_aggregate(config, snr_db, config.methods[j], errors,
                                                     feasible, config.trials));
        }
    }
    return result;
}

SweepResult sweep_iterations(const SimulationConfig& config, std::uint64_t master_seed) {
    config.validate();
    SweepResult result;
    result.variable = "iteration";
    result.grid.reserve(config.ao.max_iterations);
    for (int l = 1; l <= config.ao.max_iterations; ++l) {
        result.grid.push_back(static_cast<double>(l));
    }
    const std::vector<TrialOutcome> outcomes =
        run_point(config, config.num_sources, noise_power_from_snr_db(config.snr_db), master_seed,
                  0, true);
    count_convergence(config, outcomes, result);
    for (int l = 1; l <= config.ao.max_iterations; ++l) {
        for (std::size_t j = 0; j < config.methods.size(); ++j) {
            bool feasible = true;
            std::vector<Eigen::VectorXd> errors;
            errors.reserve(outcomes.size());
            for (const TrialOutcome& outcome : outcomes) {
                const MethodOutcome& run = outcome.by_method[j];
                feasible = feasible && run.feasible;
                if (!run.feasible) continue;
                if (is_proposed(config.methods[j])) {
                    // estimates freeze once the loop stopped, so read the
                    // last recorded pass when l runs beyond it
                    const std::size_t index =
                        std::min<std::size_t>(l, run.iteration_errors.size()) - 1;
                    errors.push_back(run.iteration_errors[index]);
                } else {
                    errors.push_back(run.errors);
                }
            }
            result.points.push_back(finish_aggregate(config, static_cast<double>(l),
                                                     config.methods[j], errors, feasible,
                                                     config.trials));
        }
    }
    return result;
}

SweepResult sweep_sources(const SimulationConfig& config, std::uint64_t master_seed) {
    config.validate();
    SweepResult result;
    result.variable = "num_sources";
    result.grid.reserve(config.k_max - config.k_min + 1);
    for (int k = config.k_min; k <= config.k_max; ++k) {
        result.grid.push_back(static_cast<double>(k));
    }
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
        const int k = config.k_min + static_cast<int>(i);
        const std::vector<TrialOutcome> outcomes = run_point(
            config, k, noise_power_from_snr_db(config.snr_db), master_seed, i, false);
        count_convergence(config, outcomes, result);
        for (std::size_t j = 0; j < config.methods.size(); ++j) {
            bool feasible = true;
            std::vector<Eigen::VectorXd> errors;
            errors.reserve(outcomes.size());
            for (const TrialOutcome& outcome : outcomes) {
                feasible = feasible && outcome.by_method[j].feasible;
                if (outcome.by_method[j].feasible) {
                    errors.push_back(outcome.by_method[j].errors);
                }
            }
            result.points.push_back(finish_aggregate(config, static_cast<double>(k),
                                                     config.methods[j], errors, feasible,
                                                     config.trials));
        }
    }
    return result;
}

}  // namespace macal
