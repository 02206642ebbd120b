#pragma once

#include "pnprecon/image.hpp"

namespace pnp {

inline constexpr double kNmseFloorDb = -300.0;

/// 10 log10(||xhat - x0||^2 / ||x0||^2), floored at kNmseFloorDb.
/// Throws std::invalid_argument when x0 is zero.
double nmse_db(const ComplexImage& xhat, const ComplexImage& x0);
/// Linear-scale ratio ||xhat - x0||^2 / ||x0||^2.
double nmse_linear(const ComplexImage& xhat, const ComplexImage& x0);

double to_db(double linear);
double from_db(double db);

/// Mean SSIM over all 8x8 windows (stride 1), uniform weights,
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L the data range of x0 (1 when x0 is
/// constant). Real-valued inputs are compared as real images; otherwise
/// magnitudes are compared.
double ssim(const ComplexImage& xhat, const ComplexImage& x0);

}  // namespace pnp
