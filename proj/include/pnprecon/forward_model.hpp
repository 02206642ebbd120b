#pragma once

// Measurement model y = A x0 + w with A = M F (row-selected unitary DFT), the
// sampling-mask generators, and calibrated complex AWGN.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnprecon/image.hpp"

namespace pnp {

enum class MaskKind { cartesian, point, full, custom };

std::string to_string(MaskKind kind);
MaskKind mask_kind_from_string(const std::string& name);

/// Row selector M. `kept` holds sorted, unique linear k-space indices in the
/// FFT layout (DC at 0).
struct SamplingMask {
  Shape shape;
  std::vector<std::size_t> kept;
  MaskKind kind = MaskKind::custom;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t measurements() const { return kept.size(); }
  [[nodiscard]] double acceleration() const {
    return static_cast<double>(shape.size()) / static_cast<double>(kept.size());
  }
  /// Throws std::invalid_argument unless the invariants hold.
  void validate() const;

  friend bool operator==(const SamplingMask&, const SamplingMask&) = default;
};

SamplingMask make_full_mask(Shape shape);
SamplingMask make_custom_mask(Shape shape, std::vector<std::size_t> kept);

/// Whole k-space rows: a fully-sampled central band of round(center_fraction *
/// height) rows plus uniformly drawn outer rows, ceil(height / R) rows total.
SamplingMask make_cartesian_mask(Shape shape, double acceleration, double center_fraction,
                                 std::uint64_t seed);

/// ceil(N / R) individual points drawn without replacement with weight
/// (1 - d)^poly_degree, d = distance from the k-space center normalized to 1
/// at the corners.
SamplingMask make_point_mask(Shape shape, double acceleration, double poly_degree,
                             std::uint64_t seed);

// Mask file: text, line 1 "height width", then one kept linear index per line.
void write_mask(const std::filesystem::path& path, const SamplingMask& mask);
SamplingMask read_mask(const std::filesystem::path& path);

struct KSpaceVector {
  Shape shape;
  CVector data;
  std::shared_ptr<const SamplingMask> mask;
};

KSpaceVector apply_A(const ComplexImage& x, const SamplingMask& mask);
KSpaceVector apply_A(const ComplexImage& x, std::shared_ptr<const SamplingMask> mask);
ComplexImage apply_A_adjoint(const KSpaceVector& y);

/// Linear operator interface shared by the masked DFT and the dense test mode.
class ForwardOperator {
 public:
  virtual ~ForwardOperator() = default;
  [[nodiscard]] virtual Shape image_shape() const = 0;
  [[nodiscard]] virtual std::size_t measurements() const = 0;
  [[nodiscard]] virtual CVector apply(const ComplexImage& x) const = 0;
  [[nodiscard]] virtual ComplexImage adjoint(std::span<const Complex> y) const = 0;
  [[nodiscard]] virtual double frobenius_sq() const = 0;
  [[nodiscard]] std::size_t pixels() const { return image_shape().size(); }
};

class MaskedFourierOperator final : public ForwardOperator {
 public:
  explicit MaskedFourierOperator(SamplingMask mask);

  [[nodiscard]] Shape image_shape() const override { return mask_->shape; }
  [[nodiscard]] std::size_t measurements() const override { return mask_->kept.size(); }
  [[nodiscard]] CVector apply(const ComplexImage& x) const override;
  [[nodiscard]] ComplexImage adjoint(std::span<const Complex> y) const override;
  /// Rows of a unitary matrix have unit norm, so ||A||_F^2 = M.
  [[nodiscard]] double frobenius_sq() const override {
    return static_cast<double>(mask_->kept.size());
  }

  [[nodiscard]] const SamplingMask& mask() const { return *mask_; }
  [[nodiscard]] const std::shared_ptr<const SamplingMask>& mask_ptr() const { return mask_; }

 private:
  std::shared_ptr<const SamplingMask> mask_;
};

/// Explicit M x N matrix, row-major. Used for i.i.d. Gaussian experiments and
/// as a test oracle.
class DenseOperator final : public ForwardOperator {
 public:
  DenseOperator(Shape image_shape, std::size_t rows, CVector matrix);

  /// Real i.i.d. N(0, 1/rows) entries.
  static DenseOperator gaussian(Shape image_shape, std::size_t rows, std::uint64_t seed);
  /// Explicit matrix of the masked unitary DFT (N^2 storage; tests only).
  static DenseOperator from_mask(const SamplingMask& mask);

  [[nodiscard]] Shape image_shape() const override { return shape_; }
  [[nodiscard]] std::size_t measurements() const override { return rows_; }
  [[nodiscard]] CVector apply(const ComplexImage& x) const override;
  [[nodiscard]] ComplexImage adjoint(std::span<const Complex> y) const override;
  [[nodiscard]] double frobenius_sq() const override { return frobenius_sq_; }

  [[nodiscard]] std::span<const Complex> matrix() const { return matrix_; }
  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return shape_.size(); }

  /// Eigenvalues of A^H A (ascending), computed on first use and shared by copies.
  [[nodiscard]] const std::vector<double>& gram_eigenvalues() const;

 private:
  struct GramCache {
    std::once_flag once;
    std::vector<double> eigenvalues;
  };

  Shape shape_;
  std::size_t rows_;
  CVector matrix_;
  double frobenius_sq_;
  std::shared_ptr<GramCache> gram_ = std::make_shared<GramCache>();
};

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultGammaWCap = 1e12;

struct NoisyMeasurement {
  CVector y;
  double gamma_w;
};

/// y = y_clean + w with E|w_i|^2 = 1/gamma_w = ||y_clean||^2 / (M 10^(snr_db/10)).
/// snr_db = +inf means no noise; gamma_w is then reported as `gamma_w_cap`.
NoisyMeasurement add_awgn(std::span<const Complex> y_clean, double snr_db, std::uint64_t seed,
                          double gamma_w_cap = kDefaultGammaWCap);
KSpaceVector add_awgn(const KSpaceVector& y_clean, double snr_db, std::uint64_t seed,
                      double* gamma_w_out, double gamma_w_cap = kDefaultGammaWCap);

/// One reconstruction instance.
struct Problem {
  std::shared_ptr<const ForwardOperator> op;
  CVector y;
  double gamma_w = 1.0;
  std::optional<ComplexImage> x0;
  std::optional<double> snr_db;

  [[nodiscard]] Shape shape() const { return op->image_shape(); }
  /// Non-null when the operator is a masked DFT.
  [[nodiscard]] const MaskedFourierOperator* masked() const {
    return dynamic_cast<const MaskedFourierOperator*>(op.get());
  }
  void validate() const;
};

/// Simulates y = A x0 + w at the given SNR and packages the instance.
Problem simulate_problem(const ComplexImage& x0, std::shared_ptr<const ForwardOperator> op,
                         double snr_db, std::uint64_t noise_seed,
                         double gamma_w_cap = kDefaultGammaWCap);

}  // namespace pnp
