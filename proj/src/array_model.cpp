#include "macal/array_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace macal {

namespace {

void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

}  // namespace

Positions ArrayGeometry::nominal_positions() const {
    return {nominal_x, Eigen::VectorXd::Zero(nominal_x.size())};
}

Positions ArrayGeometry::actual_positions() const {
    return {nominal_x + ape_x, ape_y};
}

Positions ArrayGeometry::error_positions() const {
    return {ape_x, ape_y};
}

Positions ArrayGeometry::positions(PositionSet set) const {
    switch (set) {
        case PositionSet::Nominal: return nominal_positions();
        case PositionSet::Actual: return actual_positions();
        case PositionSet::ErrorOnly: return error_positions();
    }
    throw std::invalid_argument("unknown position set");
}

void ArrayGeometry::validate() const {
    const int m = size();
    require(wavelength > 0.0, "geometry: wavelength must be positive");
    require(region_length > 0.0, "geometry: region length must be positive");
    require(m >= 2, "geometry: need at least two antennas");
    require(num_calibrated >= 1 && num_calibrated < m,
            "geometry: calibrated count must satisfy 1 <= M_c < M");
    require(ape_x.size() == m && ape_y.size() == m, "geometry: error vector size mismatch");
    for (int i = 0; i < m; ++i) {
        require(std::isfinite(nominal_x[i]) && nominal_x[i] >= 0.0 &&
                    nominal_x[i] <= region_length,
                "geometry: nominal position outside [0, H]");
        require(std::isfinite(ape_x[i]) && std::isfinite(ape_y[i]),
                "geometry: non-finite position error");
        require(std::abs(ape_x[i]) < wavelength && std::abs(ape_y[i]) < wavelength,
                "geometry: position error must stay below one wavelength");
    }
    for (int i = 0; i < num_calibrated; ++i) {
        require(ape_x[i] == 0.0 && ape_y[i] == 0.0,
                "geometry: calibrated antennas must have zero error");
    }
}

void Scenario::validate(int num_antennas) const {
    require(num_sources >= 0, "scenario: negative source count");
    require(num_sources < num_antennas, "scenario: need K < M");
    require(doas.size() == num_sources, "scenario: DOA vector size mismatch");
    require(source_powers.size() == num_sources, "scenario: power vector size mismatch");
    require(noise_power >= 0.0, "scenario: negative noise power");
    require(snapshots >= 1, "scenario: need at least one snapshot");
    require(theta_min < theta_max, "scenario: empty angle interval");
    for (int k = 0; k < num_sources; ++k) {
        require(std::isfinite(doas[k]), "scenario: non-finite DOA");
        require(doas[k] > theta_min && doas[k] < theta_max,
                "scenario: DOA outside the open angle interval");
        require(source_powers[k] > 0.0, "scenario: source power must be positive");
        if (k > 0) require(doas[k] > doas[k - 1], "scenario: DOAs must be sorted ascending");
    }
}

Eigen::VectorXcd steering_vector(double wavelength, const Positions& positions, double theta) {
    require(std::isfinite(theta), "steering: angle must be finite");
    require(positions.x.size() == positions.y.size() && positions.x.size() > 0,
            "steering: position vectors must be non-empty and equal length");
    const double scale = 2.0 * kPi / wavelength;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const Eigen::ArrayXd phase = scale * (positions.x.array() * c + positions.y.array() * s);
    Eigen::VectorXcd a(positions.x.size());
    a.real() = phase.cos().matrix();
    a.imag() = phase.sin().matrix();
    return a;
}

Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, PositionSet set, double theta) {
    return steering_vector(geometry.wavelength, geometry.positions(set), theta);
}

Eigen::MatrixXcd steering_matrix(double wavelength, const Positions& positions,
                                 const Eigen::VectorXd& thetas) {
    Eigen::MatrixXcd a(positions.size(), thetas.size());
    for (int k = 0; k < thetas.size(); ++k) {
        a.col(k) = steering_vector(wavelength, positions, thetas[k]);
    }
    return a;
}

Eigen::VectorXd draw_nominal_layout(const GeometryConfig& config, Rng& rng) {
    const int m = config.num_antennas;
    require(m >= 2, "layout: need at least two antennas");
    require(config.region_length > 0.0, "layout: region length must be positive");
    if (config.layout == LayoutPolicy::Uniform) {
        return Eigen::VectorXd::LinSpaced(m, 0.0, config.region_length);
    }
    const double slack = config.region_length - (m - 1) * config.min_spacing;
    require(slack > 0.0, "layout: region too small for the requested minimum spacing");
    std::uniform_real_distribution<double> uniform(0.0, slack);
    std::vector<double> base(m);
    for (double& v : base) v = uniform(rng);
    std::sort(base.begin(), base.end());
    Eigen::VectorXd x(m);
    for (int i = 0; i < m; ++i) x[i] = base[i] + i * config.min_spacing;
    // Keep the draw order random: antenna index must not encode position,
    // otherwise the calibrated subset is always the leftmost block.
    std::shuffle(x.begin(), x.end(), rng);
    return x;
}

ApeDraw draw_ape_factors(int num_antennas, Rng& rng) {
    std::uniform_real_distribution<double> uniform(-0.5, 0.5);
    ApeDraw draw;
    draw.zeta_x.resize(num_antennas);
    draw.zeta_y.resize(num_antennas);
    for (int i = 0; i < num_antennas; ++i) draw.zeta_x[i] = uniform(rng);
    for (int i = 0; i < num_antennas; ++i) draw.zeta_y[i] = uniform(rng);
    return draw;
}

ArrayGeometry assemble_geometry(const GeometryConfig& config, const Eigen::VectorXd& nominal_x,
                                const ApeDraw& ape, double sigma_x, double sigma_y) {
    require(config.num_calibrated >= 1 && config.num_calibrated < config.num_antennas,
            "geometry config: calibrated count must satisfy 1 <= M_c < M");
    ArrayGeometry geometry;
    geometry.wavelength = config.wavelength;
    geometry.region_length = config.region_length;
    geometry.num_calibrated = config.num_calibrated;
    geometry.nominal_x = nominal_x;
    geometry.ape_x = sigma_x * ape.zeta_x;
    geometry.ape_y = sigma_y * ape.zeta_y;
    geometry.ape_x.head(config.num_calibrated).setZero();
    geometry.ape_y.head(config.num_calibrated).setZero();
    geometry.validate();
    return geometry;
}

ArrayGeometry build_geometry(const GeometryConfig& config, Rng& rng) {
    const Eigen::VectorXd layout = draw_nominal_layout(config, rng);
    const ApeDraw ape = draw_ape_factors(config.num_antennas, rng);
    return assemble_geometry(config, layout, ape, config.sigma_x, config.sigma_y);
}

namespace {

Eigen::MatrixXcd complex_gaussian(int rows, int cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXcd z(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            const double re = normal(rng);
            const double im = normal(rng);
            z(i, j) = std::complex<double>(re, im);
        }
    }
    return z;
}

}  // namespace

Eigen::MatrixXcd draw_source_signals(const Scenario& scenario, Rng& rng) {
    Eigen::MatrixXcd s = complex_gaussian(scenario.num_sources, scenario.snapshots, rng);
    for (int k = 0; k < scenario.num_sources; ++k) {
        s.row(k) *= std::sqrt(scenario.source_powers[k] / 2.0);
    }
    return s;
}

Eigen::MatrixXcd draw_noise(int num_antennas, int snapshots, double noise_power, Rng& rng) {
    return std::sqrt(noise_power / 2.0) * complex_gaussian(num_antennas, snapshots, rng);
}

SnapshotMatrix compose_snapshots(const ArrayGeometry& geometry, const Scenario& scenario,
                                 const Eigen::MatrixXcd& sources, const Eigen::MatrixXcd& noise,
                                 std::uint64_t seed) {
    geometry.validate();
    scenario.validate(geometry.size());
    require(sources.rows() == scenario.num_sources && sources.cols() == scenario.snapshots,
            "snapshots: source block has wrong shape");
    require(noise.rows() == geometry.size() && noise.cols() == scenario.snapshots,
            "snapshots: noise block has wrong shape");
    const Eigen::MatrixXcd a =
        steering_matrix(geometry.wavelength, geometry.actual_positions(), scenario.doas);
    SnapshotMatrix z;
    z.samples = a * sources + noise;
    z.seed = seed;
    return z;
}

SnapshotMatrix synthesize_snapshots(const ArrayGeometry& geometry, const Scenario& scenario,
                                    std::uint64_t seed) {
    Rng rng(seed);
    const Eigen::MatrixXcd sources = draw_source_signals(scenario, rng);
    const Eigen::MatrixXcd noise =
        draw_noise(geometry.size(), scenario.snapshots, scenario.noise_power, rng);
    return compose_snapshots(geometry, scenario, sources, noise, seed);
}

}  // namespace macal
