#pragma once

// Reconstruction algorithms over a Problem:
//
//   amp / damp   AMP with Onsager correction; amp uses the MAP prox of the
//                wavelet-l1 regularizer as its denoiser, damp the black-box one
//   admm         (PnP-)ADMM
//   admm_pr      Peaceman-Rachford ADMM (extra dual update before the denoiser)
//   dd_vamp      damped denoising VAMP
//   dd_vamp_pp   admm_pr warm start for t_switch iterations, then dd_vamp
//
// All solvers start from zero, are deterministic given (problem, config) and
// run single-threaded apart from the data-parallel kernels. Divergence is
// reported in the result (with the partial trace), not thrown.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pnprecon/denoiser.hpp"
#include "pnprecon/forward_model.hpp"
#include "pnprecon/image.hpp"

namespace pnp {

enum class Algorithm { amp, damp, admm, admm_pr, dd_vamp, dd_vamp_pp };
enum class ZetaRule { fixed, adaptive };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct SolverConfig {
  Algorithm algorithm = Algorithm::dd_vamp;
  int max_iters = 150;
  DenoiserSpec denoiser;

  // AMP step scaling; unset means N / ||A||_F^2.
  std::optional<double> amp_beta;

  // ADMM / ADMM-PR stepsize gamma; also the warm-start precision of dd_vamp_pp.
  double admm_gamma = 1.0;
  // ADMM only: use the prox of lambda ||Psi x||_1 (threshold lambda / gamma)
  // instead of the plug-in denoiser.
  bool admm_classical = false;

  double vamp_gamma2_init = 1.0;
  double vamp_theta = 1.0;
  ZetaRule vamp_zeta_rule = ZetaRule::fixed;
  double vamp_zeta = 1.0;
  int t_switch = 0;
  std::optional<ComplexImage> vamp_r2_init;  // zero image when unset

  // Divergence estimation for the Onsager terms.
  std::uint64_t seed = 0;
  int probes = 1;                 // K
  double probe_epsilon = 0.0;     // <= 0: scale-relative default
  bool exact_linear_divergence = true;

  // Debug / test switches.
  bool vamp_freeze_gamma = false;     // gamma1 = gamma2 = gamma2_init throughout
  bool admm_pr_extra_update = true;   // false reduces admm_pr to admm
  bool keep_iterates = false;

  // Guards.
  double amp_tau_blowup = 1e6;        // abort when tau^t > blowup * tau^1
  double gamma_min = 1e-12;
  double gamma_max = 1e12;
  double alpha_clamp = 1e-12;         // alphas kept in [clamp, 1 - clamp]

  /// Throws std::invalid_argument on out-of-range settings.
  void validate() const;
};

struct IterationRecord {
  int iteration = 0;  // 1-based
  std::optional<double> nmse_db;
  std::optional<double> gamma1, gamma2, alpha1, alpha2, zeta, tau;
  double seconds = 0.0;                // since the start of the run
  std::uint64_t denoiser_calls = 0;    // cumulative
  bool switch_point = false;           // first unfrozen dd_vamp_pp iteration
  bool alpha_clamped = false;
  // 2 min(alpha1, alpha2); compared against zeta as a diagnostic only.
  std::optional<double> zeta_alpha_form;
  // With keep_iterates: denoiser output (estimate) and the linear-stage /
  // x-update image (aux).
  std::optional<ComplexImage> estimate;
  std::optional<ComplexImage> aux;
};

struct DivergenceReport {
  int iteration = 0;
  std::string quantity;
  double value = 0.0;
  std::string message;
};

struct SolverTrace {
  std::vector<IterationRecord> records;
  std::optional<int> switch_iteration;
};

/// Final internal state, for inspection and tests.
struct VampState {
  ComplexImage r2;
  double gamma2 = 0.0;
  double alpha1_prev = 0.0;
  bool has_alpha1_prev = false;
};

struct SolverResult {
  ComplexImage estimate;
  SolverTrace trace;
  std::optional<DivergenceReport> divergence;
  std::optional<VampState> vamp_state;

  [[nodiscard]] bool diverged() const { return divergence.has_value(); }
};

SolverResult run_amp(const Problem& prob, const SolverConfig& cfg);
SolverResult run_admm(const Problem& prob, const SolverConfig& cfg);
SolverResult run_admm_pr(const Problem& prob, const SolverConfig& cfg);
SolverResult run_dd_vamp(const Problem& prob, const SolverConfig& cfg);
SolverResult run_dd_vamp_pp(const Problem& prob, const SolverConfig& cfg);

/// Dispatches on cfg.algorithm.
SolverResult run_solver(const Problem& prob, const SolverConfig& cfg);

/// zeta = 2 / (1 + max(gamma1 / gamma2_bar, gamma2_bar / gamma1)) for the
/// adaptive rule, `fixed_zeta` otherwise.
double compute_zeta(double gamma1, double gamma2_bar, ZetaRule rule, double fixed_zeta);

/// CSV with columns iteration,nmse_db,gamma1,gamma2,alpha1,alpha2,zeta,tau,
/// seconds,denoiser_calls,marker (blank where inapplicable; marker is
/// "switch" on the dd_vamp_pp switch iteration).
void write_trace_csv(const std::filesystem::path& path, const SolverTrace& trace);

}  // namespace pnp
