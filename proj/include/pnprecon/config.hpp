#pragma once

// Flat `key = value` configuration files (`#` starts a comment) and the
// mapping from keys to SolverConfig fields.
//
// Solver keys: algorithm, iters, denoiser, lambda, map_prox, wavelet_levels,
// sigma, endpoint, timeout, complex_policy, beta, gamma, admm_classical,
// gamma2_init, theta, zeta_rule, zeta, t_switch, seed, probes, probe_epsilon.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pnprecon/solvers.hpp"

namespace pnp {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Later duplicates override earlier ones when applied in order.
KeyValues parse_config(std::istream& is);
KeyValues read_config(const std::filesystem::path& path);
void write_config(const std::filesystem::path& path, const KeyValues& kv);

/// Shortest of 15-17 significant digits that reads back exactly; "inf" allowed.
std::string format_double(double v);
double parse_double(const std::string& key, const std::string& text);

/// Returns false for keys that are not solver settings.
bool apply_solver_option(SolverConfig& cfg, const std::string& key, const std::string& value);

/// Every solver key with its current value, in the order listed above.
KeyValues describe(const SolverConfig& cfg);

}  // namespace pnp
