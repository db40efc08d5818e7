#include "macal/self_calibration.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "macal/errors.hpp"

namespace macal {

Eigen::MatrixXcd constraint_matrix(int num_antennas, int num_calibrated) {
    if (num_antennas < 1 || num_calibrated < 1 || num_calibrated > num_antennas) {
        throw std::invalid_argument("constraint: need 1 <= num_calibrated <= num_antennas");
    }
    Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(num_antennas, num_calibrated);
    w.topRows(num_calibrated).setIdentity();
    return w;
}

Eigen::MatrixXcd error_steering_quadratic(double wavelength, const Positions& reference,
                                          double theta, const Eigen::MatrixXcd& noise_subspace) {
    if (noise_subspace.rows() != reference.size()) {
        throw std::invalid_argument("error steering: subspace rows must match positions");
    }
    const Eigen::VectorXcd a = steering_vector(wavelength, reference, theta);
    const Eigen::MatrixXcd projected = noise_subspace.adjoint() * a.asDiagonal();
    Eigen::MatrixXcd quadratic = projected.adjoint() * projected;
    quadratic = 0.5 * (quadratic + quadratic.adjoint()).eval();
    return quadratic;
}

Eigen::MatrixXcd regularize(const Eigen::MatrixXcd& quadratic, double epsilon_rel) {
    const int m = static_cast<int>(quadratic.rows());
    if (m < 1 || quadratic.cols() != m) {
        throw std::invalid_argument("regularize: matrix must be square");
    }
    if (!(epsilon_rel >= 0.0)) {
        throw std::invalid_argument("regularize: epsilon must be nonnegative");
    }
    const double ridge = std::max(epsilon_rel * quadratic.trace().real() / m, 1e-12);
    Eigen::MatrixXcd out = quadratic;
    out.diagonal().array() += ridge;
    return out;
}

Eigen::VectorXcd solve_error_steering(const Eigen::MatrixXcd& regularized, int num_calibrated) {
    const int m = static_cast<int>(regularized.rows());
    if (regularized.cols() != m) {
        throw std::invalid_argument("error steering: matrix must be square");
    }
    if (num_calibrated < 1 || num_calibrated > m) {
        throw std::invalid_argument("error steering: need 1 <= num_calibrated <= size");
    }

    Eigen::LDLT<Eigen::MatrixXcd> factor(regularized);
    if (factor.info() != Eigen::Success) {
        throw NumericalFailure("error steering: factorisation failed");
    }
    const Eigen::MatrixXcd w = constraint_matrix(m, num_calibrated);
    Eigen::MatrixXcd x = factor.solve(w);
    x += factor.solve((w - regularized * x).eval());

    const Eigen::MatrixXcd gram =
        0.5 * (x.topRows(num_calibrated) + x.topRows(num_calibrated).adjoint()).eval();
    Eigen::LDLT<Eigen::MatrixXcd> gram_factor(gram);
    if (gram_factor.info() != Eigen::Success) {
        throw NumericalFailure("error steering: constrained solve failed");
    }
    const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(num_calibrated);
    Eigen::VectorXcd weights = gram_factor.solve(ones);
    Eigen::VectorXcd solution = x * weights;
    for (int pass = 0; pass < 3; ++pass) {
        const Eigen::VectorXcd gap = ones - solution.head(num_calibrated);
        if (gap.lpNorm<Eigen::Infinity>() <= 1e-13) {
            break;
        }
        weights += gram_factor.solve(gap);
        solution = x * weights;
    }
    // The product x * weights carries entries of size ~1/ridge, so the
    // calibrated entries only reach ones up to heavy cancellation. A large
    // leftover means the small system was effectively singular; a small one
    // is rounding noise on a value the construction forces to be exactly
    // one, so pin it.
    if ((ones - solution.head(num_calibrated)).lpNorm<Eigen::Infinity>() > 1e-6) {
        throw NumericalFailure("error steering: constraint residual too large; raise epsilon");
    }
    solution.head(num_calibrated) = ones;
    return solution;
}

PositionErrorFit fit_position_error(const Eigen::VectorXcd& entries, const Eigen::VectorXd& thetas,
                                    double wavelength) {
    const int k = static_cast<int>(entries.size());
    if (thetas.size() != k) {
        throw std::invalid_argument("position fit: entries/thetas size mismatch");
    }
    if (!(wavelength > 0.0)) {
        throw std::invalid_argument("position fit: wavelength must be positive");
    }
    if (k < 2) {
        throw UnsupportedConfiguration("position fit: need at least two sources");
    }

    Eigen::MatrixXd design(k, 2);
    design.col(0) = thetas.array().cos();
    design.col(1) = thetas.array().sin();
    Eigen::VectorXd rhs(k);
    const double scale = wavelength / (2.0 * kPi);
    for (int i = 0; i < k; ++i) {
        rhs[i] = scale * std::arg(entries[i]);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Vector2d& sv = svd.singularValues();
    if (sv[1] <= 1e-10 * sv[0]) {
        throw DegenerateGeometry("position fit: directions too collinear to resolve both axes");
    }
    const Eigen::Vector2d fit = svd.solve(rhs);
    PositionErrorFit result;
    result.dx = fit[0];
    result.dy = fit[1];
    result.residual = (design * fit - rhs).norm();
    return result;
}

CalibrationState ao_calibrate(const CovarianceMatrix& covariance, double wavelength,
                              const Positions& nominal, int num_calibrated, int num_sources,
                              const AOConfig& config) {
    const int m = nominal.size();
    if (covariance.size() != m) {
        throw std::invalid_argument("calibrate: covariance and positions disagree on size");
    }
    if (!(wavelength > 0.0)) {
        throw std::invalid_argument("calibrate: wavelength must be positive");
    }
    if (num_calibrated < 1 || num_calibrated >= m) {
        throw std::invalid_argument("calibrate: need 1 <= num_calibrated < num_antennas");
    }
    if (config.max_iterations < 1) {
        throw std::invalid_argument("calibrate: max_iterations must be positive");
    }
    if (num_sources < 2) {
        throw UnsupportedConfiguration("calibrate: position fit needs at least two sources");
    }
    if (num_sources >= m) {
        throw UnsupportedConfiguration("calibrate: need fewer sources than antennas");
    }

    const double delta = config.delta_sq >= 0.0
                             ? config.delta_sq
                             : num_sources * deg2rad(1e-4) * deg2rad(1e-4);
    const Eigen::MatrixXcd noise = decompose(covariance, num_sources).noise;

    CalibrationState state;
    state.ape = Eigen::MatrixXd::Zero(m, 2);
    Eigen::VectorXd prev;
    for (int pass = 1; pass <= config.max_iterations; ++pass) {
        const Positions corrected{nominal.x + state.ape.col(0), nominal.y + state.ape.col(1)};
        const Pseudospectrum spectrum = music_spectrum(noise, wavelength, corrected, config.grid);
        const PeakSelection peaks = pick_peaks(spectrum, num_sources, config.refine_peaks);
        state.degraded_peaks = state.degraded_peaks || peaks.degraded;
        state.theta = peaks.angles;
        const double change = pass == 1 ? std::numeric_limits<double>::infinity()
                                        : (state.theta - prev).squaredNorm();

        const Positions& reference =
            config.stage2 == Stage2Reference::FixedNominal ? nominal : corrected;
        Eigen::MatrixXcd error_steering(m, num_sources);
        for (int k = 0; k < num_sources; ++k) {
            const Eigen::MatrixXcd quadratic =
                error_steering_quadratic(wavelength, reference, state.theta[k], noise);
            error_steering.col(k) =
                solve_error_steering(regularize(quadratic, config.epsilon_rel), num_calibrated);
        }
        Eigen::MatrixXd update = Eigen::MatrixXd::Zero(m, 2);
        for (int antenna = num_calibrated; antenna < m; ++antenna) {
            const PositionErrorFit fit = fit_position_error(
                error_steering.row(antenna).transpose(), state.theta, wavelength);
            update(antenna, 0) = fit.dx;
            update(antenna, 1) = fit.dy;
        }
        if (config.stage2 == Stage2Reference::FixedNominal) {
            state.ape = update;
        } else {
            state.ape += update;
        }

        state.iterations = pass;
        state.history.push_back({state.theta, change, state.ape});
        prev = state.theta;
        if (pass >= 2 && change <= delta) {
            state.converged = true;
            break;
        }
    }
    return state;
}

CalibrationState ao_calibrate(const SnapshotMatrix& snapshots, double wavelength,
                              const Positions& nominal, int num_calibrated, int num_sources,
                              const AOConfig& config) {
    return ao_calibrate(sample_covariance(snapshots), wavelength, nominal, num_calibrated,
                        num_sources, config);
}

}  // namespace macal
