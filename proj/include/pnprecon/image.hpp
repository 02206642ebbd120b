#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnp {

using Complex = std::complex<double>;
using CVector = std::vector<Complex>;

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;

  [[nodiscard]] std::size_t size() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rasterized complex image, row-major. Element (row, col) lives at row * width + col.
class ComplexImage {
 public:
  ComplexImage() = default;
  explicit ComplexImage(Shape shape);
  ComplexImage(Shape shape, CVector data);

  [[nodiscard]] static ComplexImage zeros(Shape shape) { return ComplexImage(shape); }
  [[nodiscard]] static ComplexImage constant(Shape shape, Complex value);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t height() const { return shape_.height; }
  [[nodiscard]] std::size_t width() const { return shape_.width; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] std::span<Complex> data() { return data_; }
  [[nodiscard]] std::span<const Complex> data() const { return data_; }
  [[nodiscard]] CVector& vec() { return data_; }
  [[nodiscard]] const CVector& vec() const { return data_; }

  Complex& operator[](std::size_t i) { return data_[i]; }
  const Complex& operator[](std::size_t i) const { return data_[i]; }
  Complex& operator()(std::size_t row, std::size_t col) { return data_[row * shape_.width + col]; }
  const Complex& operator()(std::size_t row, std::size_t col) const {
    return data_[row * shape_.width + col];
  }

  [[nodiscard]] bool all_finite() const;
  [[nodiscard]] bool is_real() const;

  friend bool operator==(const ComplexImage&, const ComplexImage&) = default;

 private:
  Shape shape_{};
  CVector data_;
};

void require_same_shape(const Shape& a, const Shape& b, const char* what);

// Image arithmetic. All of these dispatch to the parallel kernels.
double squared_norm(const ComplexImage& x);
double norm(const ComplexImage& x);
/// <a, b> = sum conj(a_i) b_i
Complex inner(const ComplexImage& a, const ComplexImage& b);
/// a*x + b*y
ComplexImage lincomb(double a, const ComplexImage& x, double b, const ComplexImage& y);
ComplexImage scaled(double a, const ComplexImage& x);
double squared_distance(const ComplexImage& a, const ComplexImage& b);

}  // namespace pnp
