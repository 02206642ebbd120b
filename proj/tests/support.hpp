#pragma once

#include <Eigen/Dense>

#include <memory>

#include "pnprecon/forward_model.hpp"
#include "pnprecon/image.hpp"
#include "pnprecon/rng.hpp"

namespace pnp::test {

inline ComplexImage random_image(Shape s, std::uint64_t seed, bool complex = true) {
  Rng rng(seed);
  ComplexImage img(s);
  for (auto& v : img.data()) v = {rng.normal(), complex ? rng.normal() : 0.0};
  return img;
}

inline Eigen::VectorXcd to_eigen(std::span<const Complex> v) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

inline ComplexImage from_eigen(Shape s, const Eigen::VectorXcd& v) {
  ComplexImage img(s);
  for (std::size_t i = 0; i < s.size(); ++i) img[i] = v(static_cast<Eigen::Index>(i));
  return img;
}

/// Explicit matrix of an operator, built column by column from apply().
inline Eigen::MatrixXcd explicit_matrix(const ForwardOperator& op) {
  const Shape s = op.image_shape();
  Eigen::MatrixXcd a(static_cast<Eigen::Index>(op.measurements()), static_cast<Eigen::Index>(s.size()));
  ComplexImage e(s);
  for (std::size_t j = 0; j < s.size(); ++j) {
    e[j] = 1.0;
    a.col(static_cast<Eigen::Index>(j)) = to_eigen(op.apply(e));
    e[j] = 0.0;
  }
  return a;
}

inline double max_abs_diff(const ComplexImage& a, const ComplexImage& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Random masked-DFT instance: random point mask, complex Gaussian image.
inline Problem random_masked_problem(Shape s, double accel, std::uint64_t seed, double snr_db = 30.0) {
  auto mask = make_point_mask(s, accel, 2.0, seed);
  auto op = std::make_shared<MaskedFourierOperator>(mask);
  return simulate_problem(random_image(s, seed + 17), op, snr_db, seed + 31);
}

}  // namespace pnp::test
