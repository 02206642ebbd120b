#include "pnprecon/image.hpp"

#include <cmath>

#include "pnprecon/kernels.hpp"

namespace pnp {

namespace kp = kernels::parallel;

std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width);
}

ComplexImage::ComplexImage(Shape shape) : shape_(shape), data_(shape.size()) {}

ComplexImage::ComplexImage(Shape shape, CVector data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size())
    throw ShapeMismatch("image data length " + std::to_string(data_.size()) +
                        " does not match shape " + to_string(shape_));
}

ComplexImage ComplexImage::constant(Shape shape, Complex value) {
  return ComplexImage(shape, CVector(shape.size(), value));
}

bool ComplexImage::all_finite() const {
  for (const auto& v : data_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

bool ComplexImage::is_real() const {
  for (const auto& v : data_)
    if (v.imag() != 0.0) return false;
  return true;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b)
    throw ShapeMismatch(std::string(what) + ": shape " + to_string(a) + " vs " + to_string(b));
}

double squared_norm(const ComplexImage& x) { return kp::squared_norm(x.data()); }

double norm(const ComplexImage& x) { return std::sqrt(squared_norm(x)); }

Complex inner(const ComplexImage& a, const ComplexImage& b) {
  require_same_shape(a.shape(), b.shape(), "inner");
  return kp::dot(a.data(), b.data());
}

ComplexImage lincomb(double a, const ComplexImage& x, double b, const ComplexImage& y) {
  require_same_shape(x.shape(), y.shape(), "lincomb");
  ComplexImage out(x.shape());
  kp::axpby(a, x.data(), b, y.data(), out.data());
  return out;
}

ComplexImage scaled(double a, const ComplexImage& x) { return lincomb(a, x, 0.0, x); }

double squared_distance(const ComplexImage& a, const ComplexImage& b) {
  return squared_norm(lincomb(1.0, a, -1.0, b));
}

}  // namespace pnp
