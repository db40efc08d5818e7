#include "macal/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "macal/errors.hpp"

namespace macal {

namespace {

void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

}  // namespace

void CovarianceMatrix::validate() const {
    const int m = size();
    require(m >= 1 && matrix.cols() == m, "covariance: matrix must be square");
    const double scale = std::max(matrix.norm(), 1e-300);
    require((matrix - matrix.adjoint()).norm() <= 1e-10 * scale,
            "covariance: matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(matrix,
                                                           Eigen::EigenvaluesOnly);
    require(solver.info() == Eigen::Success, "covariance: eigenvalue check failed");
    const double trace = matrix.trace().real();
    require(solver.eigenvalues().minCoeff() >= -1e-10 * std::max(trace, 1e-300),
            "covariance: matrix is not positive semidefinite");
}

CovarianceMatrix sample_covariance(const SnapshotMatrix& snapshots) {
    const Eigen::MatrixXcd& z = snapshots.samples;
    require(z.rows() >= 1 && z.cols() >= 1, "covariance: empty snapshot matrix");
    Eigen::MatrixXcd r = (z * z.adjoint()) / static_cast<double>(z.cols());
    r = 0.5 * (r + r.adjoint()).eval();  // exact Hermitian symmetry
    CovarianceMatrix covariance;
    covariance.matrix = std::move(r);
    covariance.source = CovarianceMatrix::Source::Sample;
    covariance.snapshots = static_cast<int>(z.cols());
    return covariance;
}

CovarianceMatrix exact_covariance(const ArrayGeometry& geometry, const Scenario& scenario) {
    geometry.validate();
    scenario.validate(geometry.size());
    const int m = geometry.size();
    Eigen::MatrixXcd r = scenario.noise_power * Eigen::MatrixXcd::Identity(m, m);
    if (scenario.num_sources > 0) {
        Eigen::MatrixXcd a =
            steering_matrix(geometry.wavelength, geometry.actual_positions(), scenario.doas);
        for (int k = 0; k < scenario.num_sources; ++k) {
            a.col(k) *= std::sqrt(scenario.source_powers[k]);
        }
        r += a * a.adjoint();
        r = 0.5 * (r + r.adjoint()).eval();
    }
    CovarianceMatrix covariance;
    covariance.matrix = std::move(r);
    covariance.source = CovarianceMatrix::Source::Exact;
    covariance.snapshots = 0;
    return covariance;
}

SubspaceDecomposition decompose(const CovarianceMatrix& covariance, int num_sources) {
    const int m = covariance.size();
    require(num_sources >= 1, "decompose: need at least one source");
    require(num_sources < m, "decompose: need K < M so the noise subspace is non-empty");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(covariance.matrix);
    if (solver.info() != Eigen::Success) {
        throw NumericalFailure("decompose: eigendecomposition did not converge");
    }
    // Eigen returns ascending order; flip to descending.
    SubspaceDecomposition split;
    split.eigenvalues = solver.eigenvalues().reverse();
    const Eigen::MatrixXcd vectors = solver.eigenvectors().rowwise().reverse();
    split.signal = vectors.leftCols(num_sources);
    split.noise = vectors.rightCols(m - num_sources);
    return split;
}

Pseudospectrum music_spectrum(const Eigen::MatrixXcd& noise_subspace, double wavelength,
                              const Positions& positions, const GridSpec& grid) {
    const int m = positions.size();
    require(noise_subspace.rows() == m, "spectrum: noise subspace row count mismatch");
    require(noise_subspace.cols() >= 1, "spectrum: noise subspace is empty");
    require(grid.points >= 2, "spectrum: grid needs at least two points");
    require(grid.theta_min < grid.theta_max, "spectrum: empty grid interval");

    Pseudospectrum spectrum;
    spectrum.grid = Eigen::VectorXd::LinSpaced(grid.points, grid.theta_min, grid.theta_max);
    const Eigen::MatrixXcd responses = steering_matrix(wavelength, positions, spectrum.grid);
    const Eigen::MatrixXcd projected = noise_subspace.adjoint() * responses;
    const double floor = 1e-18 * m;
    spectrum.values = projected.colwise().squaredNorm().transpose().cwiseMax(floor).cwiseInverse();
    return spectrum;
}

PeakSelection pick_peaks(const Pseudospectrum& spectrum, int count, bool refine) {
    const Eigen::VectorXd& v = spectrum.values;
    const int n = static_cast<int>(v.size());
    require(count >= 1, "peaks: need a positive peak count");
    require(n >= 2 && spectrum.grid.size() == n, "peaks: malformed spectrum");
    require(count <= n, "peaks: more peaks requested than grid points");

    std::vector<int> maxima;
    if (v[0] > v[1]) maxima.push_back(0);
    for (int i = 1; i + 1 < n; ++i) {
        if (v[i] > v[i - 1] && v[i] >= v[i + 1]) maxima.push_back(i);
    }
    if (v[n - 1] > v[n - 2]) maxima.push_back(n - 1);

    // Highest value first; equal heights resolve to the smaller angle.
    const auto by_height = [&v](int a, int b) {
        if (v[a] != v[b]) return v[a] > v[b];
        return a < b;
    };
    std::sort(maxima.begin(), maxima.end(), by_height);

    PeakSelection selection;
    std::vector<int> picked;
    if (static_cast<int>(maxima.size()) >= count) {
        picked.assign(maxima.begin(), maxima.begin() + count);
    } else {
        // Resolution failure: fall back to the largest grid values so the
        // caller still gets `count` angles, flagged as degraded.
        selection.degraded = true;
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), by_height);
        picked.assign(order.begin(), order.begin() + count);
    }

    std::sort(picked.begin(), picked.end());
    selection.grid_indices = picked;
    selection.angles.resize(count);
    for (int j = 0; j < count; ++j) {
        const int i = picked[j];
        double angle = spectrum.grid[i];
        if (refine && !selection.degraded && i > 0 && i + 1 < n) {
            // One parabolic step on the denominator (the reciprocal of the
            // stored values), which is smooth near a null while the spectrum
            // itself is spiked.
            const double d0 = 1.0 / v[i - 1];
            const double d1 = 1.0 / v[i];
            const double d2 = 1.0 / v[i + 1];
            const double curvature = d0 - 2.0 * d1 + d2;
            if (curvature > 0.0) {
                double offset = 0.5 * (d0 - d2) / curvature;
                offset = std::clamp(offset, -0.5, 0.5);
                angle += offset * (spectrum.grid[i + 1] - spectrum.grid[i]);
            }
        }
        selection.angles[j] = angle;
    }
    // refinement shifts by at most half a step, so ascending order survives
    return selection;
}

}  // namespace macal
