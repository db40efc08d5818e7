#ifndef MACAL_SUBSPACE_HPP
#define MACAL_SUBSPACE_HPP

#include <Eigen/Dense>
#include <vector>

#include "macal/array_model.hpp"

namespace macal {

/// Hermitian covariance of the received block, either the finite-sample
/// estimate (1/T) Z Z^H or the asymptotic model A R_S A^H + noise * I.
struct CovarianceMatrix {
    enum class Source { Sample, Exact };

    Eigen::MatrixXcd matrix;
    Source source = Source::Sample;
    int snapshots = 0;  ///< T used when source == Sample

    int size() const { return static_cast<int>(matrix.rows()); }

    /// Hermitian within 1e-10 relative and positive semidefinite up to
    /// -1e-10 * trace; throws std::invalid_argument otherwise.
    void validate() const;
};

CovarianceMatrix sample_covariance(const SnapshotMatrix& snapshots);
CovarianceMatrix exact_covariance(const ArrayGeometry& geometry, const Scenario& scenario);

/// Eigen-split of a covariance matrix. Eigenvalues are sorted descending;
/// `signal` holds the eigenvectors of the K largest, `noise` the rest, so
/// [signal noise] is unitary.
struct SubspaceDecomposition {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXcd signal;
    Eigen::MatrixXcd noise;
};

SubspaceDecomposition decompose(const CovarianceMatrix& covariance, int num_sources);

/// Uniform search grid over [theta_min, theta_max], endpoints included.
struct GridSpec {
    double theta_min = kPi / 6.0;
    double theta_max = 5.0 * kPi / 6.0;
    int points = 1800;

    double step() const { return (theta_max - theta_min) / (points - 1); }
};

struct Pseudospectrum {
    Eigen::VectorXd grid;    ///< angles, strictly increasing
    Eigen::VectorXd values;  ///< 1 / ||E_N^H a(angle)||^2, floored denominator
};

/// Spectrum whose peaks mark directions nearly orthogonal to the noise
/// subspace. The denominator is floored at 1e-18 * M so exact orthogonality
/// cannot divide by zero.
Pseudospectrum music_spectrum(const Eigen::MatrixXcd& noise_subspace, double wavelength,
                              const Positions& positions, const GridSpec& grid);

/// Result of selecting the K principal maxima of a pseudospectrum.
/// `angles` are sorted ascending and refined by one parabolic step on the
/// spectrum denominator; `grid_indices` are the matching unrefined picks.
/// `degraded` is set when fewer than K local maxima exist and the largest
/// grid values were returned instead.
struct PeakSelection {
    Eigen::VectorXd angles;
    std::vector<int> grid_indices;
    bool degraded = false;
};

PeakSelection pick_peaks(const Pseudospectrum& spectrum, int count, bool refine = true);

}  // namespace macal

#endif
