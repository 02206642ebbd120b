#pragma once

// Linear stage of VAMP / x-update of ADMM:
//
//   g(r; gamma) = argmin_x  gamma_w/2 ||y - A x||^2 + gamma/2 ||x - r||^2
//
// and its sensitivity alpha = tr{dg/dr}/N = gamma tr{(gamma_w A^H A + gamma I)^-1}/N.
//
// For A = M F both are closed form: the solve is diagonal in k-space (two
// FFTs), and alpha = ((1 - M/N) gamma_w + gamma) / (gamma_w + gamma).

#include <stdexcept>

#include "pnprecon/forward_model.hpp"
#include "pnprecon/image.hpp"

namespace pnp {

class CgNotConverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinearStageResult {
  ComplexImage x2;
  double alpha2 = 1.0;
};

/// Closed form for masked-DFT problems (kept bins blended with y, unkept bins
/// pass F r through); conjugate gradient otherwise.
ComplexImage linear_estimate(const ComplexImage& r, double gamma, const Problem& prob);

double linear_sensitivity(double gamma, double gamma_w, std::size_t measurements,
                          std::size_t pixels);

/// Sensitivity for the problem's operator: closed form for masked DFT, from the
/// eigenvalues of A^H A for dense operators.
double linear_sensitivity(double gamma, const Problem& prob);

LinearStageResult linear_stage(const ComplexImage& r, double gamma, const Problem& prob);

struct CgOptions {
  double tolerance = 1e-10;  // relative residual
  int max_iterations = 1000;
};

/// Solves (gamma_w A^H A + gamma I) x = gamma r + gamma_w A^H y by conjugate
/// gradients. Works for any operator; the test oracle for the closed form.
ComplexImage linear_estimate_general(const ComplexImage& r, double gamma, const ForwardOperator& op,
                                     std::span<const Complex> y, double gamma_w,
                                     CgOptions options = {});

}  // namespace pnp
