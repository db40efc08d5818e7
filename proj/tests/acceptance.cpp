#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "macal/eval.hpp"
#include "macal/rng.hpp"

// Release gate for the simulator. Each criterion prints one PASS/FAIL line
// with its key numbers; the process exits 0 only when all of them hold.
// Tolerances and seeds are pinned here on purpose: a change in behaviour
// should show up as a diff in this file, not as silent drift.

using namespace macal;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string num(double value, int precision = 4) {
    std::ostringstream out;
    out << std::setprecision(precision) << value;
    return out.str();
}

Eigen::MatrixXcd random_gaussian(int rows, int cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXcd g(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            g(i, j) = std::complex<double>(normal(rng), normal(rng)) / std::sqrt(2.0);
        }
    }
    return g;
}

// --- criterion 1: closed-form solver agrees with the KKT oracle ------------

bool criterion1(std::string& detail) {
    const auto start = Clock::now();
    Rng rng(9001);
    double worst_rel = 0.0;
    double worst_constraint = 0.0;
    for (int i = 0; i < 500; ++i) {
        const int m = 4 + static_cast<int>(rng() % 9);
        const int mc = 1 + static_cast<int>(rng() % (m - 1));
        const int k = 2 + static_cast<int>(rng() % (m - 3));
        const Eigen::MatrixXcd g = random_gaussian(m, m - k, rng);
        const Eigen::MatrixXcd quadratic = g * g.adjoint();
        const Eigen::MatrixXcd regularized = regularize(quadratic, 1e-6);

        const Eigen::VectorXcd fast = solve_error_steering(regularized, mc);
        const Eigen::VectorXcd slow = oracle_constrained_qp(regularized, mc);
        worst_rel = std::max(worst_rel, (fast - slow).norm() / slow.norm());
        const Eigen::VectorXcd gap =
            fast.head(mc) - Eigen::VectorXcd::Ones(mc);
        worst_constraint = std::max(worst_constraint, gap.lpNorm<Eigen::Infinity>());
    }
    const double elapsed = seconds_since(start);
    detail = "500 instances, worst rel diff " + num(worst_rel, 3) + ", worst constraint " +
             num(worst_constraint, 3) + ", " + num(elapsed, 3) + "s";
    return worst_rel <= 1e-8 && worst_constraint <= 1e-10 && elapsed < 10.0;
}

// --- criterion 2: the error-steering quadratic has rank M - K ---------------

bool criterion2(std::string& detail) {
    const auto start = Clock::now();
    Rng rng(9002);
    std::uniform_real_distribution<double> theta_draw(kPi / 6.0, 5.0 * kPi / 6.0);
    double worst_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i) {
        const int k = 2 + i % 3;
        const GeometryConfig config;
        const ArrayGeometry geometry = build_geometry(config, rng);
        const Eigen::VectorXd doas =
            draw_doas(k, kPi / 6.0, 5.0 * kPi / 6.0, deg2rad(2.0), rng);
        Scenario scenario;
        scenario.num_sources = k;
        scenario.doas = doas;
        scenario.source_powers = Eigen::VectorXd::Ones(k);
        scenario.noise_power = 0.5;
        scenario.snapshots = 100;
        const SubspaceDecomposition split = decompose(exact_covariance(geometry, scenario), k);

        const Eigen::MatrixXcd quadratic = error_steering_quadratic(
            geometry.wavelength, geometry.nominal_positions(), theta_draw(rng), split.noise);
        const Eigen::VectorXd ev =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(quadratic).eigenvalues();
        const double kept_min = ev[k];
        const double discarded_max = std::max(std::abs(ev[k - 1]), 1e-300);
        worst_ratio = std::min(worst_ratio, kept_min / discarded_max);
    }
    const double elapsed = seconds_since(start);
    detail = "100 instances, worst kept/discarded gap " + num(worst_ratio, 3) + ", " +
             num(elapsed, 3) + "s";
    return worst_ratio >= 1e6 && elapsed < 5.0;
}

// --- criterion 3: exact-covariance recovery of directions and positions -----

bool criterion3(std::string& detail) {
    const auto start = Clock::now();
    int good = 0;
    for (int s = 0; s < 50; ++s) {
        Rng rng(derive_seed(2026, 0, static_cast<std::uint64_t>(s)));
        const GeometryConfig config;
        const ArrayGeometry geometry = build_geometry(config, rng);
        const Eigen::VectorXd doas =
            draw_doas(3, kPi / 6.0, 5.0 * kPi / 6.0, deg2rad(2.0), rng);
        Scenario scenario;
        scenario.num_sources = 3;
        scenario.doas = doas;
        scenario.source_powers = Eigen::VectorXd::Ones(3);
        scenario.noise_power = 0.5;
        scenario.snapshots = 100;

        const CalibrationState state =
            ao_calibrate(exact_covariance(geometry, scenario), geometry.wavelength,
                         geometry.nominal_positions(), geometry.num_calibrated, 3, AOConfig{});
        const Eigen::VectorXd errors = pair_errors(state.theta, doas);
        bool ok = rad2deg(errors.cwiseAbs().maxCoeff()) <= 0.05;
        for (int m = geometry.num_calibrated; m < geometry.size(); ++m) {
            ok = ok && std::abs(state.ape(m, 0) - geometry.ape_x[m]) <= 1e-3;
            ok = ok && std::abs(state.ape(m, 1) - geometry.ape_y[m]) <= 1e-3;
        }
        if (ok) ++good;
    }
    const double elapsed = seconds_since(start);
    detail = std::to_string(good) + "/50 seeds within 0.05 deg and 1e-3 wavelengths, " +
             num(elapsed, 3) + "s";
    return good >= 48 && elapsed < 60.0;
}

// --- criterion 4: RMSE against SNR behaves like the reference curves --------

bool criterion4(std::string& detail) {
    const auto start = Clock::now();
    SimulationConfig config;
    config.methods = {Method::ProposedXY, Method::MusicAll, Method::MusicCalibrated};
    config.threads = 0;
    const SweepResult sweep = sweep_snr(config, 99);

    const auto rmse = [&](int point, int method) {
        return sweep.points[3 * point + method].rmse_deg;
    };
    const double ratio = rmse(0, 0) / rmse(4, 0);
    const bool improves = ratio >= 3.0;

    bool dominates = true;
    std::string worst_point;
    for (int i = 0; i < 5; ++i) {
        if (!(rmse(i, 0) < rmse(i, 2))) {
            dominates = false;
            worst_point = " at " + num(sweep.grid[i], 3) + " dB";
        }
    }

    SimulationConfig probe = config;
    probe.methods = {Method::MusicAll};
    std::vector<double> maxima;
    for (int t = 0; t < probe.trials; ++t) {
        const TrialOutcome outcome =
            run_trial(probe, probe.num_sources, noise_power_from_snr_db(20.0),
                      derive_seed(99, 4, static_cast<std::uint64_t>(t)), false);
        maxima.push_back(rad2deg(outcome.by_method[0].errors.cwiseAbs().maxCoeff()));
    }
    const double uncal_median = median_of(maxima);

    const double elapsed = seconds_since(start);
    detail = "rmse 0dB/20dB = " + num(ratio, 3) + " (need >= 3), beats calibrated scan at all 5 points: " +
             (dominates ? std::string("yes") : "no" + worst_point) +
             ", uncalibrated scan median max error " + num(uncal_median, 3) + " deg, " +
             num(elapsed, 3) + "s";
    return improves && dominates && uncal_median > 0.5 && elapsed < 600.0;
}

// --- criterion 5: convergence happens, and mostly within tens of passes -----

bool criterion5(std::string& detail) {
    const auto start = Clock::now();
    SimulationConfig config;
    config.methods = {Method::ProposedXY};
    const double noise = noise_power_from_snr_db(10.0);

    std::vector<double> converged_at;
    std::vector<Eigen::VectorXd> pass1, pass40;
    for (int t = 0; t < 100; ++t) {
        const TrialOutcome outcome = run_trial(config, config.num_sources, noise,
                                               derive_seed(123, 0, static_cast<std::uint64_t>(t)),
                                               true);
        const MethodOutcome& run = outcome.by_method[0];
        if (run.converged) converged_at.push_back(static_cast<double>(run.iterations));
        pass1.push_back(run.iteration_errors.front());
        const std::size_t at40 = std::min<std::size_t>(40, run.iteration_errors.size()) - 1;
        pass40.push_back(run.iteration_errors[at40]);
    }

    const double median_iters = median_of(converged_at);
    const double rmse1 = rad2deg(trimmed_rmse(pass1, config.trim).rmse);
    const double rmse40 = rad2deg(trimmed_rmse(pass40, config.trim).rmse);
    const double elapsed = seconds_since(start);
    detail = std::to_string(converged_at.size()) + "/100 converged, median pass " +
             num(median_iters, 3) + ", rmse pass40/pass1 = " + num(rmse40, 3) + "/" +
             num(rmse1, 3) + ", " + num(elapsed, 3) + "s";
    return converged_at.size() >= 50 && median_iters >= 5.0 && median_iters <= 60.0 &&
           rmse40 <= 0.5 * rmse1;
}

// --- criterion 6: success against source count --------------------------------

bool criterion6(std::string& detail) {
    const auto start = Clock::now();
    SimulationConfig config;
    config.methods = {Method::ProposedXY, Method::MusicCalibrated};
    config.snr_db = 15.0;
    config.k_min = 2;
    config.k_max = 7;
    config.threads = 0;
    const SweepResult sweep = sweep_sources(config, 99);

    const auto at = [&](int k, int method) -> const PointAggregate& {
        return sweep.points[2 * (k - 2) + method];
    };

    bool proposed_ok = true;
    for (int k = 2; k <= 6; ++k) {
        proposed_ok = proposed_ok && at(k, 0).success >= 0.9;
    }
    const bool infeasible_ok = !at(7, 1).feasible && at(7, 1).success == 0.0;
    bool strictly_below = true;
    std::ostringstream rates;
    for (int k = 2; k <= 7; ++k) {
        strictly_below = strictly_below && at(k, 1).success < at(k, 0).success;
        rates << (k > 2 ? " " : "") << "K" << k << ":" << num(at(k, 0).success, 3) << "/"
              << num(at(k, 1).success, 3);
    }

    const double elapsed = seconds_since(start);
    detail = "success proposed/calibrated " + rates.str() +
             "; proposed >= 0.9 up to K=6: " + (proposed_ok ? "yes" : "no") +
             "; calibrated K=7 exactly 0: " + (infeasible_ok ? "yes" : "no") +
             "; calibrated below proposed at every K: " + (strictly_below ? "yes" : "no") + ", " +
             num(elapsed, 3) + "s";
    // The last clause does not hold on this design: with seven clean antennas
    // spread over the aperture the calibrated scan saturates near 1.0 for
    // small K at 15 dB, so only K >= 6 shows the collapse. Kept red rather
    // than tuned away; see the sweep-sources artifacts for the full picture.
    return proposed_ok && infeasible_ok && strictly_below;
}

// --- criterion 7: randomized invariant suites --------------------------------

bool criterion7(std::string& detail) {
    const auto start = Clock::now();
    Rng rng(9007);
    std::uniform_real_distribution<double> theta_draw(kPi / 6.0, 5.0 * kPi / 6.0);
    std::uniform_real_distribution<double> coord(-20.0, 20.0);
    std::uniform_real_distribution<double> angle(0.0, kPi);
    std::normal_distribution<double> normal(0.0, 1.0);
    int cases = 0;
    int failures = 0;

    // factorization of the perturbed response into nominal and error parts
    for (int i = 0; i < 3000; ++i, ++cases) {
        GeometryConfig config;
        config.num_antennas = 6 + static_cast<int>(rng() % 10);
        config.num_calibrated = 1 + static_cast<int>(rng() % (config.num_antennas - 1));
        const ArrayGeometry geometry = build_geometry(config, rng);
        const double theta = theta_draw(rng);
        const Eigen::VectorXcd whole = steering_vector(geometry, PositionSet::Actual, theta);
        const Eigen::VectorXcd split =
            steering_vector(geometry, PositionSet::Nominal, theta)
                .cwiseProduct(steering_vector(geometry, PositionSet::ErrorOnly, theta));
        if ((whole - split).lpNorm<Eigen::Infinity>() > 1e-12 * geometry.size()) ++failures;
    }

    // steering entries stay on the unit circle
    for (int i = 0; i < 2000; ++i, ++cases) {
        const int m = 2 + static_cast<int>(rng() % 14);
        Positions positions;
        positions.x.resize(m);
        positions.y.resize(m);
        for (int j = 0; j < m; ++j) {
            positions.x[j] = coord(rng);
            positions.y[j] = coord(rng);
        }
        const Eigen::VectorXcd a = steering_vector(1.0, positions, angle(rng));
        if ((a.cwiseAbs().array() - 1.0).abs().maxCoeff() > 1e-12) ++failures;
    }

    // the eigen-split stacks to a unitary basis
    for (int i = 0; i < 1500; ++i, ++cases) {
        const int m = 4 + static_cast<int>(rng() % 9);
        const int t = m + static_cast<int>(rng() % 40);
        SnapshotMatrix z;
        z.samples = random_gaussian(m, t, rng);
        const int k = 1 + static_cast<int>(rng() % (m - 1));
        const SubspaceDecomposition split = decompose(sample_covariance(z), k);
        Eigen::MatrixXcd basis(m, m);
        basis << split.signal, split.noise;
        const Eigen::MatrixXcd gram = basis.adjoint() * basis;
        if ((gram - Eigen::MatrixXcd::Identity(m, m)).lpNorm<Eigen::Infinity>() > 1e-8) {
            ++failures;
        }
    }

    // trimmed pooled RMSE against a direct reference computation
    for (int i = 0; i < 2500; ++i, ++cases) {
        const int n = 1 + static_cast<int>(rng() % 40);
        std::vector<Eigen::VectorXd> errors(n);
        std::vector<double> totals(n);
        long total_entries = 0;
        for (int j = 0; j < n; ++j) {
            const int k = 1 + static_cast<int>(rng() % 6);
            errors[j].resize(k);
            for (int e = 0; e < k; ++e) errors[j][e] = normal(rng);
            totals[j] = errors[j].squaredNorm();
            total_entries += k;
        }
        const double trim = (rng() % 4) * 0.08;
        const TrimmedRmse fast = trimmed_rmse(errors, trim);

        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&totals](int a, int b) { return totals[a] < totals[b]; });
        int keep = n - (trim > 0.0 ? static_cast<int>(std::ceil(trim * n - 1e-9)) : 0);
        keep = std::max(keep, 1);
        double sum = 0.0;
        long entries = 0;
        for (int r = 0; r < keep; ++r) {
            sum += totals[order[r]];
            entries += errors[order[r]].size();
        }
        const double reference = std::sqrt(sum / static_cast<double>(entries));
        const bool same = std::abs(fast.rmse - reference) <= 1e-12 * (1.0 + reference) &&
                          fast.n_kept == keep && fast.n_trimmed == n - keep;
        if (!same) ++failures;
    }

    // trial synthesis is byte-reproducible
    for (int i = 0; i < 1000; ++i, ++cases) {
        SimulationConfig config;
        config.snapshots = 25;
        const int k = 2 + i % 4;
        const double noise = noise_power_from_snr_db(static_cast<double>(10 * (i % 3)));
        const std::uint64_t seed = derive_seed(777, static_cast<std::uint64_t>(i), 1);
        const TrialData a = make_trial_data(config, k, noise, seed);
        const TrialData b = make_trial_data(config, k, noise, seed);
        const auto same_matrix = [](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
            return x.rows() == y.rows() && x.cols() == y.cols() &&
                   std::memcmp(x.data(), y.data(),
                               sizeof(std::complex<double>) * x.size()) == 0;
        };
        const auto same_vector = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
            return x.size() == y.size() &&
                   std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0;
        };
        const bool same = same_matrix(a.z_xy.samples, b.z_xy.samples) &&
                          same_matrix(a.z_x.samples, b.z_x.samples) &&
                          same_matrix(a.z_y.samples, b.z_y.samples) &&
                          same_vector(a.geometry_xy.nominal_x, b.geometry_xy.nominal_x) &&
                          same_vector(a.geometry_xy.ape_x, b.geometry_xy.ape_x) &&
                          same_vector(a.geometry_xy.ape_y, b.geometry_xy.ape_y) &&
                          same_vector(a.scenario.doas, b.scenario.doas);
        if (!same) ++failures;
    }

    const double elapsed = seconds_since(start);
    detail = std::to_string(cases) + " cases, " + std::to_string(failures) + " failures, " +
             num(elapsed, 3) + "s";
    return cases == 10000 && failures == 0 && elapsed < 60.0;
}

// --- criterion 8: pinned-seed sweep reproduces the committed artifact --------

bool criterion8(const std::string& sim, const std::string& golden_dir, const std::string& work_dir,
                std::string& detail) {
    const std::string produced = work_dir + "/golden_run.csv";
    const std::string command =
        "\"" + sim +
        "\" sweep-snr --seed 424242 --trials 12 --t 50 --snr-grid 0,10,20 --grid-points 720 "
        "--max-iters 30 --methods proposed-xy,music-all,music-calibrated --threads 1 --out \"" +
        produced + "\" 2> \"" + work_dir + "/golden_run.err\"";
    const int status = std::system(command.c_str());
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        detail = "simulator exited with a failure";
        return false;
    }

    const auto slurp = [](const std::string& path) {
        std::ifstream file(path, std::ios::binary);
        std::ostringstream out;
        out << file.rdbuf();
        return file.good() ? out.str() : std::string();
    };
    const std::string fresh = slurp(produced);
    const std::string golden = slurp(golden_dir + "/sweep_snr_seed424242.csv");
    if (golden.empty()) {
        detail = "golden file missing or empty";
        return false;
    }
    const bool same = fresh == golden;
    detail = same ? "byte-identical to the committed csv"
                  : "output differs from the committed csv";
    return same;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: macal-acceptance <sim-binary> <golden-dir> <work-dir>\n";
        return 2;
    }
    const std::string sim = argv[1];
    const std::string golden_dir = argv[2];
    const std::string work_dir = argv[3];

    int passed = 0;
    const auto report = [&passed](int index, bool ok, const std::string& detail) {
        std::cout << "criterion " << index << ": " << (ok ? "PASS" : "FAIL") << " (" << detail
                  << ")\n";
        std::cout.flush();
        if (ok) ++passed;
    };

    const std::vector<std::function<bool(std::string&)>> checks = {
        criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7,
    };
    for (std::size_t i = 0; i < checks.size(); ++i) {
        std::string detail;
        bool ok = false;
        try {
            ok = checks[i](detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        report(static_cast<int>(i) + 1, ok, detail);
    }
    {
        std::string detail;
        bool ok = false;
        try {
            ok = criterion8(sim, golden_dir, work_dir, detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        report(8, ok, detail);
    }

    std::cout << "overall: " << passed << "/8 criteria passed\n";
    return passed == 8 ? 0 : 1;
}
