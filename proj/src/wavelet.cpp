#include "pnprecon/wavelet.hpp"

#include <array>
#include <vector>

namespace pnp {

namespace {

constexpr std::array<double, 8> kDb4Lo{
    -0.010597401785069032, 0.032883011666885200, 0.030841381835560764, -0.18703481171909308,
    -0.027983769416859854, 0.63088076792985891,  0.71484657055291565,  0.23037781330889650,
};

constexpr std::array<double, 8> make_hi() {
  std::array<double, 8> g{};
  for (std::size_t k = 0; k < 8; ++k) g[k] = ((k % 2) ? -1.0 : 1.0) * kDb4Lo[7 - k];
  return g;
}
constexpr std::array<double, 8> kDb4Hi = make_hi();

// One periodic analysis step on a strided line of even length n.
void analyze(Complex* line, std::size_t stride, std::size_t n, std::vector<Complex>& tmp) {
  tmp.assign(n, Complex{});
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    Complex a{}, d{};
    for (std::size_t k = 0; k < kDb4Lo.size(); ++k) {
      const Complex v = line[((2 * i + k) % n) * stride];
      a += kDb4Lo[k] * v;
      d += kDb4Hi[k] * v;
    }
    tmp[i] = a;
    tmp[half + i] = d;
  }
  for (std::size_t i = 0; i < n; ++i) line[i * stride] = tmp[i];
}

void synthesize(Complex* line, std::size_t stride, std::size_t n, std::vector<Complex>& tmp) {
  tmp.assign(n, Complex{});
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const Complex a = line[i * stride];
    const Complex d = line[(half + i) * stride];
    for (std::size_t k = 0; k < kDb4Lo.size(); ++k) tmp[(2 * i + k) % n] += kDb4Lo[k] * a + kDb4Hi[k] * d;
  }
  for (std::size_t i = 0; i < n; ++i) line[i * stride] = tmp[i];
}

}  // namespace

Wavelet2D::Wavelet2D(Shape shape, int levels) : shape_(shape), levels_(0) {
  std::size_t h = shape.height, w = shape.width;
  while (levels_ < levels && h % 2 == 0 && w % 2 == 0 && h >= 2 && w >= 2) {
    h /= 2;
    w /= 2;
    ++levels_;
  }
}

std::span<const double> Wavelet2D::lowpass() { return kDb4Lo; }

ComplexImage Wavelet2D::forward(const ComplexImage& img) const {
  require_same_shape(img.shape(), shape_, "Wavelet2D::forward");
  ComplexImage c = img;
  const std::size_t stride = shape_.width;
  std::vector<Complex> tmp;
  std::size_t h = shape_.height, w = shape_.width;
  for (int l = 0; l < levels_; ++l) {
    for (std::size_t r = 0; r < h; ++r) analyze(&c(r, 0), 1, w, tmp);
    for (std::size_t col = 0; col < w; ++col) analyze(&c(0, col), stride, h, tmp);
    h /= 2;
    w /= 2;
  }
  return c;
}

ComplexImage Wavelet2D::inverse(const ComplexImage& coeffs) const {
  require_same_shape(coeffs.shape(), shape_, "Wavelet2D::inverse");
  ComplexImage x = coeffs;
  const std::size_t stride = shape_.width;
  std::vector<Complex> tmp;
  for (int l = levels_ - 1; l >= 0; --l) {
    const std::size_t h = shape_.height >> l, w = shape_.width >> l;
    for (std::size_t col = 0; col < w; ++col) synthesize(&x(0, col), stride, h, tmp);
    for (std::size_t r = 0; r < h; ++r) synthesize(&x(r, 0), 1, w, tmp);
  }
  return x;
}

}  // namespace pnp
