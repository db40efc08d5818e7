#ifndef MACAL_RUNNER_HPP
#define MACAL_RUNNER_HPP

#include <iosfwd>

#include "macal/run_config.hpp"

namespace macal {

/// Runs the configured experiment, writes the artifact to the configured
/// path (stdout when empty), and logs one summary line per sweep point.
/// Returns the process exit code: 0 ok, 4 when no self-calibration run
/// converged anywhere. Numerical failures propagate as exceptions.
int run_experiment(const RunConfig& config, std::ostream& log);

/// Artifact body for a sweep as text, in the configured format.
std::string render_sweep(const RunConfig& config, const SweepResult& result);

}  // namespace macal

#endif
