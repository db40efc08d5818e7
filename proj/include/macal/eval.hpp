#ifndef MACAL_EVAL_HPP
#define MACAL_EVAL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "macal/array_model.hpp"
#include "macal/self_calibration.hpp"
#include "macal/subspace.hpp"

namespace macal {

enum class Method { ProposedXY, ProposedX, ProposedY, MusicAll, MusicCalibrated };

std::string method_name(Method method);
Method parse_method(const std::string& name);
std::vector<Method> default_methods();

/// True for the self-calibrating variants (the ones that iterate).
bool is_proposed(Method method);

/// Reference solver for min v^H Q v s.t. W^H v = ones through the full
/// bordered KKT system, independent of the substitution closed form.
Eigen::VectorXcd oracle_constrained_qp(const Eigen::MatrixXcd& regularized, int num_calibrated);

/// Signed errors est(i) - truth(i) after sorting both sides. Sorting is the
/// minimum-total-|error| bijection in one dimension.
Eigen::VectorXd pair_errors(const Eigen::VectorXd& estimates, const Eigen::VectorXd& truths);

struct TrimmedRmse {
    double rmse = 0.0;
    int n_trimmed = 0;
    int n_kept = 0;
};

/// Pooled RMSE after dropping the ceil(trim * n) trials with the largest
/// total squared error (always keeping at least one).
TrimmedRmse trimmed_rmse(const std::vector<Eigen::VectorXd>& errors, double trim);

/// Fraction of (trial, source) entries with |error| <= threshold.
double success_rate(const std::vector<Eigen::VectorXd>& errors, double threshold);

/// Unit source power convention: sigma_n^2 = 10^(-snr_db / 10).
double noise_power_from_snr_db(double snr_db);

enum class BaselineMode { All, Calibrated };

struct BaselineResult {
    Eigen::VectorXd angles;
    bool feasible = true;
    bool degraded = false;
};

/// Subspace scan without calibration. All: every antenna, nominal positions
/// (position errors left uncorrected). Calibrated: only the error-free head
/// of the array; infeasible when num_sources >= num_calibrated.
BaselineResult baseline_music(const SnapshotMatrix& snapshots, const ArrayGeometry& geometry,
                              int num_sources, BaselineMode mode, const GridSpec& grid);

struct SimulationConfig {
    GeometryConfig geometry;
    int num_sources = 3;
    int snapshots = 100;
    double theta_min = kPi / 6.0;
    double theta_max = 5.0 * kPi / 6.0;
    double min_separation_deg = 2.0;
    std::vector<double> snr_grid_db{0.0, 5.0, 10.0, 15.0, 20.0};
    double snr_db = 10.0;  ///< fixed point for the iteration sweep
    int k_min = 2;         ///< source-count sweep range
    int k_max = 7;
    int trials = 200;
    double trim = 0.05;
    double success_threshold_deg = 0.5;
    AOConfig ao;
    std::vector<Method> methods = default_methods();
    int threads = 0;  ///< trial workers; 0 picks the hardware count

    void validate() const;
};

/// One Monte Carlo realization. The three geometry variants share one layout
/// and one error-factor draw (the x/y variants zero the other axis); the
/// snapshot variants share the same source and noise blocks, so every method
/// sees the same randomness.
struct TrialData {
    std::uint64_t seed = 0;
    double noise_power = 0.0;
    Scenario scenario;
    ArrayGeometry geometry_xy;
    ArrayGeometry geometry_x;
    ArrayGeometry geometry_y;
    SnapshotMatrix z_xy;
    SnapshotMatrix z_x;
    SnapshotMatrix z_y;
};

/// Sorted directions uniform over the open interval with all neighbour gaps
/// at least min_separation; rejection sampled, NumericalFailure if the
/// constraint cannot be met in 10000 attempts.
Eigen::VectorXd draw_doas(int count, double theta_min, double theta_max, double min_separation,
                          Rng& rng);

TrialData make_trial_data(const SimulationConfig& config, int num_sources, double noise_power,
                          std::uint64_t seed);

struct MethodOutcome {
    bool feasible = true;
    bool converged = false;
    bool degraded = false;
    int iterations = 0;
    Eigen::VectorXd errors;                         ///< signed, radians
    std::vector<Eigen::VectorXd> iteration_errors;  ///< per pass when recorded
};

struct TrialOutcome {
    std::uint64_t seed = 0;
    std::vector<MethodOutcome> by_method;  ///< aligned with config.methods
};

TrialOutcome run_trial(const SimulationConfig& config, int num_sources, double noise_power,
                       std::uint64_t seed, bool keep_history);

struct PointAggregate {
    double x = 0.0;  ///< grid value: SNR dB, pass index, or source count
    Method method = Method::ProposedXY;
    bool feasible = true;
    double rmse_rad = std::numeric_limits<double>::quiet_NaN();
    double rmse_deg = std::numeric_limits<double>::quiet_NaN();
    double success = 0.0;
    int n_trials = 0;
    int n_trimmed = 0;
};

struct SweepResult {
    std::string variable;  ///< "snr_db", "iteration" or "num_sources"
    std::vector<double> grid;
    std::vector<PointAggregate> points;  ///< grid-major, methods in config order
    int proposed_runs = 0;               ///< self-calibration invocations
    int converged_runs = 0;              ///< how many of them converged
};

SweepResult sweep_snr(const SimulationConfig& config, std::uint64_t master_seed);
SweepResult sweep_iterations(const SimulationConfig& config, std::uint64_t master_seed);
SweepResult sweep_sources(const SimulationConfig& config, std::uint64_t master_seed);

}  // namespace macal

#endif
