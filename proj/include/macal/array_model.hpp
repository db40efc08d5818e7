#ifndef MACAL_ARRAY_MODEL_HPP
#define MACAL_ARRAY_MODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <numbers>

#include "macal/rng.hpp"

namespace macal {

inline constexpr double kPi = std::numbers::pi_v<double>;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// A set of element coordinates; x along the movement axis, y transverse.
/// All lengths are in multiples of the carrier wavelength unless a geometry
/// says otherwise.
struct Positions {
    Eigen::VectorXd x;
    Eigen::VectorXd y;

    int size() const { return static_cast<int>(x.size()); }
};

enum class PositionSet { Nominal, Actual, ErrorOnly };

enum class LayoutPolicy {
    Uniform,          ///< x_m = (m-1) * H / (M-1)
    RandomMinSpacing  ///< uniform over [0, H] conditioned on a minimum gap
};

struct GeometryConfig {
    double wavelength = 1.0;      ///< carrier wavelength (internal unit)
    int num_antennas = 12;        ///< M
    int num_calibrated = 7;       ///< M_c, the first antennas have zero error
    double region_length = 12.0;  ///< H, movement region along x
    LayoutPolicy layout = LayoutPolicy::RandomMinSpacing;
    double min_spacing = 0.5;     ///< minimum gap for the random layout
    double sigma_x = 0.5;         ///< position-error scale along x
    double sigma_y = 0.5;         ///< position-error scale along y
};

/// Array geometry with injected position errors. Nominal elements sit on the
/// x axis; the true position of element m is (nominal_x[m] + ape_x[m],
/// ape_y[m]). The first num_calibrated elements have zero error.
struct ArrayGeometry {
    double wavelength = 1.0;
    double region_length = 0.0;
    int num_calibrated = 0;
    Eigen::VectorXd nominal_x;
    Eigen::VectorXd ape_x;
    Eigen::VectorXd ape_y;

    int size() const { return static_cast<int>(nominal_x.size()); }

    Positions nominal_positions() const;
    Positions actual_positions() const;
    Positions error_positions() const;
    Positions positions(PositionSet set) const;

    /// Throws std::invalid_argument when any structural invariant is broken.
    void validate() const;
};

/// Source scene: K directions with powers, plus noise level and snapshots.
struct Scenario {
    int num_sources = 0;           ///< K
    Eigen::VectorXd doas;          ///< radians, sorted ascending
    Eigen::VectorXd source_powers; ///< per-source power
    double noise_power = 0.0;
    int snapshots = 1;             ///< T
    double theta_min = kPi / 6.0;
    double theta_max = 5.0 * kPi / 6.0;

    void validate(int num_antennas) const;
};

/// M x T block of received samples together with the seed that produced it.
struct SnapshotMatrix {
    Eigen::MatrixXcd samples;
    std::uint64_t seed = 0;
};

/// Array response for one direction: entry m is
/// exp(j * (2*pi/wavelength) * (x_m cos(theta) + y_m sin(theta))).
Eigen::VectorXcd steering_vector(double wavelength, const Positions& positions, double theta);
Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, PositionSet set, double theta);

/// Columns are steering vectors for each angle in thetas.
Eigen::MatrixXcd steering_matrix(double wavelength, const Positions& positions,
                                 const Eigen::VectorXd& thetas);

/// Nominal x layout per the configured policy. The random policy draws the
/// layout uniformly over placements whose neighbour gaps all reach
/// min_spacing (gap offsets are added to sorted uniforms over the shrunken
/// interval, which realises that conditional law with a bounded number of
/// draws).
Eigen::VectorXd draw_nominal_layout(const GeometryConfig& config, Rng& rng);

/// Raw uniform(-0.5, 0.5) error factors, one pair of vectors per array.
struct ApeDraw {
    Eigen::VectorXd zeta_x;
    Eigen::VectorXd zeta_y;
};

ApeDraw draw_ape_factors(int num_antennas, Rng& rng);

/// Combines a layout and error factors into a geometry, scaling the factors
/// by (sigma_x, sigma_y) and zeroing the calibrated rows.
ArrayGeometry assemble_geometry(const GeometryConfig& config, const Eigen::VectorXd& nominal_x,
                                const ApeDraw& ape, double sigma_x, double sigma_y);

/// Layout + error draw in one step.
ArrayGeometry build_geometry(const GeometryConfig& config, Rng& rng);

/// K x T circularly-symmetric complex Gaussian source block, row k has
/// variance source_powers[k].
Eigen::MatrixXcd draw_source_signals(const Scenario& scenario, Rng& rng);

/// M x T complex Gaussian noise with per-entry variance noise_power.
Eigen::MatrixXcd draw_noise(int num_antennas, int snapshots, double noise_power, Rng& rng);

/// Z = A(doas, actual positions) * S + N for externally drawn S and N.
SnapshotMatrix compose_snapshots(const ArrayGeometry& geometry, const Scenario& scenario,
                                 const Eigen::MatrixXcd& sources, const Eigen::MatrixXcd& noise,
                                 std::uint64_t seed);

/// Full forward model: draws sources then noise from a fresh stream seeded
/// with `seed`, so the result is reproducible bit for bit.
SnapshotMatrix synthesize_snapshots(const ArrayGeometry& geometry, const Scenario& scenario,
                                    std::uint64_t seed);

}  // namespace macal

#endif
