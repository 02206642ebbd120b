#include "pnprecon/linear_stage.hpp"

#include <cmath>

#include "pnprecon/fft.hpp"
#include "pnprecon/kernels.hpp"

namespace pnp {

namespace kp = kernels::parallel;

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("linear stage precision gamma must be positive and finite");
}

}  // namespace

ComplexImage linear_estimate(const ComplexImage& r, double gamma, const Problem& prob) {
  check_gamma(gamma);
  require_same_shape(r.shape(), prob.shape(), "linear_estimate");
  if (const auto* mf = prob.masked()) {
    const auto& mask = mf->mask();
    if (mask.kept.empty()) return r;
    ComplexImage k = dft2(r);
    kp::masked_blend(k.data(), mask.kept, prob.y, gamma, prob.gamma_w);
    return idft2(k);
  }
  return linear_estimate_general(r, gamma, *prob.op, prob.y, prob.gamma_w);
}

double linear_sensitivity(double gamma, double gamma_w, std::size_t measurements,
                          std::size_t pixels) {
  const double frac = static_cast<double>(measurements) / static_cast<double>(pixels);
  return ((1.0 - frac) * gamma_w + gamma) / (gamma_w + gamma);
}

double linear_sensitivity(double gamma, const Problem& prob) {
  check_gamma(gamma);
  if (prob.masked()) return linear_sensitivity(gamma, prob.gamma_w, prob.op->measurements(), prob.op->pixels());
  const auto* dense = dynamic_cast<const DenseOperator*>(prob.op.get());
  if (!dense) throw std::invalid_argument("no sensitivity formula for this operator type");
  double sum = 0.0;
  for (double lambda : dense->gram_eigenvalues()) sum += gamma / (prob.gamma_w * std::max(lambda, 0.0) + gamma);
  return sum / static_cast<double>(dense->cols());
}

LinearStageResult linear_stage(const ComplexImage& r, double gamma, const Problem& prob) {
  return {linear_estimate(r, gamma, prob), linear_sensitivity(gamma, prob)};
}

ComplexImage linear_estimate_general(const ComplexImage& r, double gamma, const ForwardOperator& op,
                                     std::span<const Complex> y, double gamma_w,
                                     CgOptions options) {
  check_gamma(gamma);
  if (!(gamma_w > 0.0) || !std::isfinite(gamma_w))
    throw std::invalid_argument("gamma_w must be positive and finite");
  require_same_shape(r.shape(), op.image_shape(), "linear_estimate_general");

  // H x = gamma_w A^H A x + gamma x
  const auto apply_h = [&](const ComplexImage& x) {
    return lincomb(gamma_w, op.adjoint(op.apply(x)), gamma, x);
  };
  const ComplexImage b = lincomb(gamma, r, gamma_w, op.adjoint(y));
  const double b_norm = norm(b);
  ComplexImage x = r;
  if (b_norm == 0.0) return ComplexImage(r.shape());

  ComplexImage res = lincomb(1.0, b, -1.0, apply_h(x));
  ComplexImage p = res;
  double rr = squared_norm(res);
  for (int it = 0; it < options.max_iterations; ++it) {
    if (std::sqrt(rr) <= options.tolerance * b_norm) return x;
    const ComplexImage hp = apply_h(p);
    const double alpha = rr / inner(p, hp).real();
    x = lincomb(1.0, x, alpha, p);
    res = lincomb(1.0, res, -alpha, hp);
    const double rr_next = squared_norm(res);
    p = lincomb(1.0, res, rr_next / rr, p);
    rr = rr_next;
  }
  if (std::sqrt(rr) <= options.tolerance * b_norm) return x;
  throw CgNotConverged("conjugate gradient did not reach tolerance in " +
                       std::to_string(options.max_iterations) + " iterations");
}

}  // namespace pnp
