#ifndef MACAL_ERRORS_HPP
#define MACAL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace macal {

// Invalid inputs (bad dimensions, NaN angles, out-of-range config values)
// are reported with std::invalid_argument. The types below cover failure
// modes that are not caller mistakes.

/// A linear solve or eigendecomposition could not be completed reliably.
struct NumericalFailure : std::runtime_error {
    explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

/// The requested setup is outside what the estimator supports (e.g. K = 1).
struct UnsupportedConfiguration : std::runtime_error {
    explicit UnsupportedConfiguration(const std::string& what) : std::runtime_error(what) {}
};

/// The source/angle layout makes the position-error fit rank deficient.
struct DegenerateGeometry : std::runtime_error {
    explicit DegenerateGeometry(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace macal

#endif
