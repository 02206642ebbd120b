#include "pnprecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pnp {

double to_db(double linear) {
  if (!(linear > 0.0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(linear));
}

double from_db(double db) { return std::pow(10.0, db / 10.0); }

double nmse_linear(const ComplexImage& xhat, const ComplexImage& x0) {
  require_same_shape(xhat.shape(), x0.shape(), "nmse");
  const double ref = squared_norm(x0);
  if (!(ref > 0.0)) throw std::invalid_argument("nmse: ground truth has zero energy");
  return squared_distance(xhat, x0) / ref;
}

double nmse_db(const ComplexImage& xhat, const ComplexImage& x0) {
  return to_db(nmse_linear(xhat, x0));
}

double ssim(const ComplexImage& xhat, const ComplexImage& x0) {
  require_same_shape(xhat.shape(), x0.shape(), "ssim");
  constexpr std::size_t kWin = 8;
  const std::size_t h = x0.height(), w = x0.width();
  if (h < kWin || w < kWin) throw ShapeMismatch("ssim needs images of at least 8x8");

  const bool real = xhat.is_real() && x0.is_real();
  std::vector<double> a(x0.size()), b(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    a[i] = real ? xhat[i].real() : std::abs(xhat[i]);
    b[i] = real ? x0[i].real() : std::abs(x0[i]);
  }
  const auto [lo, hi] = std::minmax_element(b.begin(), b.end());
  double range = *hi - *lo;
  if (!(range > 0.0)) range = 1.0;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  const double n = static_cast<double>(kWin * kWin);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + kWin <= h; ++r) {
    for (std::size_t c = 0; c + kWin <= w; ++c) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t i = 0; i < kWin; ++i)
        for (std::size_t j = 0; j < kWin; ++j) {
          ma += a[(r + i) * w + c + j];
          mb += b[(r + i) * w + c + j];
        }
      ma /= n;
      mb /= n;
      // Unbiased window (co)variances.
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (std::size_t i = 0; i < kWin; ++i)
        for (std::size_t j = 0; j < kWin; ++j) {
          const double da = a[(r + i) * w + c + j] - ma, db = b[(r + i) * w + c + j] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= n - 1;
      vb /= n - 1;
      cov /= n - 1;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace pnp
