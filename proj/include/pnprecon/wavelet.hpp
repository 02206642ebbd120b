#pragma once

#include <span>

#include "pnprecon/image.hpp"

namespace pnp {

/// Orthogonal 2D discrete wavelet transform, Daubechies db4 (8 taps),
/// periodic boundary, Mallat layout (coarse approximation in the top-left).
///
/// The requested number of levels is reduced when the current subband can no
/// longer be halved (odd side length), so any image size is accepted; an odd
/// sized image gets zero levels and the transform is the identity.
class Wavelet2D {
 public:
  explicit Wavelet2D(Shape shape, int levels = 4);

  [[nodiscard]] ComplexImage forward(const ComplexImage& img) const;
  [[nodiscard]] ComplexImage inverse(const ComplexImage& coeffs) const;

  [[nodiscard]] int levels() const { return levels_; }
  [[nodiscard]] const Shape& shape() const { return shape_; }

  static std::span<const double> lowpass();

 private:
  Shape shape_;
  int levels_;
};

}  // namespace pnp
