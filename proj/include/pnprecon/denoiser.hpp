#pragma once

// Black-box denoisers f(r, tau) for plug-and-play solvers and the Monte-Carlo
// estimate of their normalized divergence tr{df/dr}/N.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnprecon/image.hpp"

namespace pnp {

enum class DenoiserKind { wavelet_soft, soft_threshold, gaussian_smooth, linear_test, external };
enum class ComplexPolicy { split_re_im, magnitude_phase };

std::string to_string(DenoiserKind kind);
DenoiserKind denoiser_kind_from_string(const std::string& name);
std::string to_string(ComplexPolicy policy);
ComplexPolicy complex_policy_from_string(const std::string& name);

/// Raised when a denoiser returns NaN/Inf.
class NonFiniteOutput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Value-type description of a denoiser. Solvers build their own instance
/// from it with make_denoiser(), so one DenoiserSpec can be shared by parallel runs.
///
/// wavelet_soft and soft_threshold act on complex coefficients directly
/// (phase-preserving shrinkage) and ignore complex_policy. The other kinds are
/// real-plane denoisers: split_re_im runs them on the real and imaginary
/// planes with the same tau, magnitude_phase runs them on |r| and restores the
/// phase of r.
struct DenoiserSpec {
  DenoiserKind kind = DenoiserKind::wavelet_soft;
  double lambda = 1.0;      // threshold = lambda * sqrt(tau)
  // wavelet_soft / soft_threshold only: use threshold lambda * tau, i.e. the
  // exact prox of tau * lambda ||Psi x||_1 (MAP denoiser) instead of a
  // noise-std-scaled threshold.
  bool map_prox = false;
  int wavelet_levels = 4;
  double sigma = 1.0;       // gaussian_smooth kernel width, pixels
  // linear_test: real N x N row-major matrix applied to each plane.
  std::shared_ptr<const std::vector<double>> matrix;
  std::string endpoint;     // external: command line of the server process
  double timeout_seconds = 30.0;
  ComplexPolicy complex_policy = ComplexPolicy::split_re_im;
};

class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// Denoises r assuming AWGN of variance tau. Throws on tau <= 0 and on
  /// non-finite output.
  ComplexImage operator()(const ComplexImage& r, double tau);

  /// tr{df/dr}/N when known in closed form (linear denoisers).
  [[nodiscard]] virtual std::optional<double> exact_divergence(Shape) const { return std::nullopt; }

  [[nodiscard]] std::uint64_t calls() const { return calls_; }

 protected:
  virtual ComplexImage apply(const ComplexImage& r, double tau) = 0;

 private:
  std::uint64_t calls_ = 0;
};

std::unique_ptr<Denoiser> make_denoiser(const DenoiserSpec& spec);

/// One-shot convenience: builds a denoiser from `spec` and applies it once.
ComplexImage denoise(const DenoiserSpec& spec, const ComplexImage& r, double tau);

/// Exact prox of lambda_tau * ||Psi x||_1 for the orthogonal db4 transform Psi:
/// complex soft-thresholding of the wavelet coefficients.
ComplexImage prox_l1_wavelet(const ComplexImage& r, double lambda_tau, int levels = 4);

/// Complex soft threshold sign(c) * max(|c| - t, 0), elementwise.
ComplexImage soft_threshold(const ComplexImage& r, double threshold);

struct DivergenceEstimate {
  double alpha_bar = 0.0;   // estimate of tr{df/dr}/N
  int probes = 1;           // K
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double std_error = 0.0;   // across probes; 0 when K == 1
};

/// Default finite-difference step: max(||r|| / sqrt(N), 1e-5) / 1000.
double default_probe_epsilon(const ComplexImage& r);

/// alpha_bar = (1/(K N)) sum_k Re{ q_k^H [f(r + eps q_k) - f(r)] } / eps with
/// i.i.d. real standard-normal probes q_k. Uses K + 1 denoiser calls, or K
/// when f(r) is supplied by the caller. epsilon <= 0 selects the default.
DivergenceEstimate mc_divergence(Denoiser& f, const ComplexImage& r, double tau, double epsilon,
                                 int probes, std::uint64_t seed,
                                 const ComplexImage* f_of_r = nullptr);

}  // namespace pnp
