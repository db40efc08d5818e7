#ifndef MACAL_SELF_CALIBRATION_HPP
#define MACAL_SELF_CALIBRATION_HPP

#include <Eigen/Dense>
#include <vector>

#include "macal/array_model.hpp"
#include "macal/subspace.hpp"

namespace macal {

/// Selection matrix [I; 0] picking the first num_calibrated entries.
Eigen::MatrixXcd constraint_matrix(int num_antennas, int num_calibrated);

/// Quadratic form sandwiching the noise projector between diagonalised
/// reference responses: diag(a)^H E_N E_N^H diag(a) with a = a(theta) at the
/// reference positions. Hermitian PSD; rank equals the noise dimension.
Eigen::MatrixXcd error_steering_quadratic(double wavelength, const Positions& reference,
                                          double theta, const Eigen::MatrixXcd& noise_subspace);

/// Q + eps * I with eps = max(epsilon_rel * trace(Q) / M, 1e-12).
Eigen::MatrixXcd regularize(const Eigen::MatrixXcd& quadratic, double epsilon_rel);

/// Minimiser of x^H Qbar x subject to x.head(num_calibrated) == ones, via
/// Qbar^-1 W (W^H Qbar^-1 W)^-1 1. The calibrated entries come out as
/// exactly one; throws NumericalFailure when the small system degenerates.
Eigen::VectorXcd solve_error_steering(const Eigen::MatrixXcd& regularized, int num_calibrated);

/// Least-squares (dx, dy) for one antenna from the error-steering phases
/// observed across sources.
struct PositionErrorFit {
    double dx = 0.0;
    double dy = 0.0;
    double residual = 0.0;  ///< residual norm, in length units
};

/// Solves rows [cos(theta_k), sin(theta_k)] * [dx, dy]^T =
/// wavelength / (2 pi) * arg(entries[k]). Throws UnsupportedConfiguration
/// for fewer than two sources and DegenerateGeometry when the directions are
/// too collinear to separate the two axes.
PositionErrorFit fit_position_error(const Eigen::VectorXcd& entries, const Eigen::VectorXd& thetas,
                                    double wavelength);

/// Positions used when building the stage-two quadratic forms.
enum class Stage2Reference {
    FixedNominal,  ///< always the nominal layout
    TrackEstimate  ///< the current corrected layout
};

struct AOConfig {
    double epsilon_rel = 1e-6;  ///< ridge on the stage-two quadratic
    double delta_sq = -1.0;     ///< squared-change stop; <0 means K * (1e-4 deg)^2
    int max_iterations = 100;
    GridSpec grid;
    Stage2Reference stage2 = Stage2Reference::FixedNominal;
    bool refine_peaks = true;
};

struct IterationRecord {
    Eigen::VectorXd theta;         ///< radians, ascending
    double theta_change_sq = 0.0;  ///< +inf on the first pass
    Eigen::MatrixXd ape;           ///< M x 2 estimate, columns dx dy
};

struct CalibrationState {
    int iterations = 0;
    Eigen::VectorXd theta;
    Eigen::MatrixXd ape;
    bool converged = false;
    bool degraded_peaks = false;
    std::vector<IterationRecord> history;
};

/// Alternating estimation of directions and antenna position errors. The
/// noise subspace comes from a single eigendecomposition of `covariance`;
/// every pass scans the spectrum at the corrected positions, then re-solves
/// the per-source error steering and refits (dx, dy) for each uncalibrated
/// antenna. Stops once the squared direction change reaches delta_sq or
/// after max_iterations passes; the position update still runs on the final
/// pass so the reported errors match the reported directions.
CalibrationState ao_calibrate(const CovarianceMatrix& covariance, double wavelength,
                              const Positions& nominal, int num_calibrated, int num_sources,
                              const AOConfig& config);

CalibrationState ao_calibrate(const SnapshotMatrix& snapshots, double wavelength,
                              const Positions& nominal, int num_calibrated, int num_sources,
                              const AOConfig& config);

}  // namespace macal

#endif
