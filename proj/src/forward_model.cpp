#include "pnprecon/forward_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "pnprecon/fft.hpp"
#include "pnprecon/image_io.hpp"
#include "pnprecon/kernels.hpp"
#include "pnprecon/rng.hpp"

namespace pnp {

namespace kp = kernels::parallel;

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::cartesian: return "cartesian";
    case MaskKind::point: return "point";
    case MaskKind::full: return "full";
    case MaskKind::custom: return "custom";
  }
  return "custom";
}

MaskKind mask_kind_from_string(const std::string& name) {
  if (name == "cartesian") return MaskKind::cartesian;
  if (name == "point") return MaskKind::point;
  if (name == "full") return MaskKind::full;
  if (name == "custom") return MaskKind::custom;
  throw std::invalid_argument("unknown mask kind: " + name);
}

void SamplingMask::validate() const {
  const std::size_t n = shape.size();
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] >= n) throw std::invalid_argument("mask index out of range");
    if (i > 0 && kept[i] <= kept[i - 1])
      throw std::invalid_argument("mask indices must be sorted and unique");
  }
  if (kept.empty() && kind != MaskKind::custom)
    throw std::invalid_argument("mask keeps no k-space samples");
}

SamplingMask make_full_mask(Shape shape) {
  SamplingMask m{shape, std::vector<std::size_t>(shape.size()), MaskKind::full, 0};
  std::iota(m.kept.begin(), m.kept.end(), std::size_t{0});
  return m;
}

SamplingMask make_custom_mask(Shape shape, std::vector<std::size_t> kept) {
  std::sort(kept.begin(), kept.end());
  SamplingMask m{shape, std::move(kept), MaskKind::custom, 0};
  m.validate();
  return m;
}

namespace {

std::size_t kept_count(std::size_t total, double acceleration) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(total) / acceleration - 1e-9));
}

void check_acceleration(double acceleration, Shape shape) {
  if (!(acceleration >= 1.0) || !std::isfinite(acceleration))
    throw std::invalid_argument("acceleration R must be >= 1");
  if (shape.size() == 0) throw std::invalid_argument("empty mask shape");
}

}  // namespace

SamplingMask make_cartesian_mask(Shape shape, double acceleration, double center_fraction,
                                 std::uint64_t seed) {
  check_acceleration(acceleration, shape);
  if (!(center_fraction >= 0.0) || !(center_fraction < 1.0 / acceleration))
    throw std::invalid_argument("center_fraction must lie in [0, 1/R)");
  const std::size_t h = shape.height;
  const std::size_t rows_total = kept_count(h, acceleration);
  const auto band = static_cast<std::size_t>(std::lround(center_fraction * static_cast<double>(h)));
  if (band > rows_total) throw std::invalid_argument("center band exceeds the row budget");

  // Centered row coordinates: DC row at h/2.
  std::vector<bool> take(h, false);
  const std::size_t band_start = h / 2 - band / 2;
  for (std::size_t r = 0; r < band; ++r) take[band_start + r] = true;

  std::vector<std::size_t> outer;
  for (std::size_t r = 0; r < h; ++r)
    if (!take[r]) outer.push_back(r);
  Rng rng(seed);
  const std::size_t extra = rows_total - band;
  for (std::size_t i = 0; i < extra; ++i) {
    const std::size_t j = i + rng.below(outer.size() - i);
    std::swap(outer[i], outer[j]);
    take[outer[i]] = true;
  }

  SamplingMask m{shape, {}, MaskKind::cartesian, seed};
  m.kept.reserve(rows_total * shape.width);
  for (std::size_t r = 0; r < h; ++r) {
    if (!take[fft_to_centered_index(r, h)]) continue;
    for (std::size_t c = 0; c < shape.width; ++c) m.kept.push_back(r * shape.width + c);
  }
  return m;
}

SamplingMask make_point_mask(Shape shape, double acceleration, double poly_degree,
                             std::uint64_t seed) {
  check_acceleration(acceleration, shape);
  if (!(poly_degree >= 0.0)) throw std::invalid_argument("poly_degree must be >= 0");
  const std::size_t n = shape.size();
  const std::size_t count = kept_count(n, acceleration);

  // Weighted sampling without replacement (Efraimidis-Spirakis keys log(u)/w).
  // Zero-weight corners rank after all positive weights, ordered by u.
  struct Key {
    int tier;
    double key;
    std::size_t index;
  };
  std::vector<Key> keys(n);
  Rng rng(seed);
  const double hh = std::max(1.0, static_cast<double>(shape.height) / 2.0);
  const double hw = std::max(1.0, static_cast<double>(shape.width) / 2.0);
  for (std::size_t r = 0; r < shape.height; ++r) {
    const double dy = (static_cast<double>(fft_to_centered_index(r, shape.height)) - static_cast<double>(shape.height / 2)) / hh;
    for (std::size_t c = 0; c < shape.width; ++c) {
      const double dx = (static_cast<double>(fft_to_centered_index(c, shape.width)) - static_cast<double>(shape.width / 2)) / hw;
      const double d = std::min(1.0, std::sqrt(dx * dx + dy * dy) / std::numbers::sqrt2);
      const double w = std::pow(1.0 - d, poly_degree);
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      const std::size_t i = r * shape.width + c;
      keys[i] = w > 0.0 ? Key{1, std::log(u) / w, i} : Key{0, u, i};
    }
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(count), keys.end(),
                    [](const Key& a, const Key& b) {
                      if (a.tier != b.tier) return a.tier > b.tier;
                      if (a.key != b.key) return a.key > b.key;
                      return a.index < b.index;
                    });
  SamplingMask m{shape, {}, MaskKind::point, seed};
  m.kept.reserve(count);
  for (std::size_t i = 0; i < count; ++i) m.kept.push_back(keys[i].index);
  std::sort(m.kept.begin(), m.kept.end());
  return m;
}

void write_mask(const std::filesystem::path& path, const SamplingMask& mask) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << mask.shape.height << " " << mask.shape.width << "\n";
  for (auto i : mask.kept) os << i << "\n";
  if (!os) throw IoError("write failed: " + path.string());
}

SamplingMask read_mask(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  SamplingMask m;
  if (!(is >> m.shape.height >> m.shape.width)) throw IoError("bad mask header: " + path.string());
  std::size_t idx;
  while (is >> idx) m.kept.push_back(idx);
  if (!is.eof()) throw IoError("bad mask entry in " + path.string());
  m.kind = m.kept.size() == m.shape.size() ? MaskKind::full : MaskKind::custom;
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("invalid mask file: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------

KSpaceVector apply_A(const ComplexImage& x, std::shared_ptr<const SamplingMask> mask) {
  require_same_shape(x.shape(), mask->shape, "apply_A");
  const ComplexImage k = dft2(x);
  KSpaceVector y{mask->shape, CVector(mask->kept.size()), mask};
  for (std::size_t j = 0; j < mask->kept.size(); ++j) y.data[j] = k[mask->kept[j]];
  return y;
}

KSpaceVector apply_A(const ComplexImage& x, const SamplingMask& mask) {
  return apply_A(x, std::make_shared<const SamplingMask>(mask));
}

ComplexImage apply_A_adjoint(const KSpaceVector& y) {
  if (!y.mask || y.data.size() != y.mask->kept.size())
    throw ShapeMismatch("k-space data length does not match its mask");
  ComplexImage k(y.shape);
  for (std::size_t j = 0; j < y.data.size(); ++j) k[y.mask->kept[j]] = y.data[j];
  return idft2(k);
}

MaskedFourierOperator::MaskedFourierOperator(SamplingMask mask)
    : mask_(std::make_shared<const SamplingMask>(std::move(mask))) {
  mask_->validate();
}

CVector MaskedFourierOperator::apply(const ComplexImage& x) const { return apply_A(x, mask_).data; }

ComplexImage MaskedFourierOperator::adjoint(std::span<const Complex> y) const {
  return apply_A_adjoint(KSpaceVector{mask_->shape, CVector(y.begin(), y.end()), mask_});
}

DenseOperator::DenseOperator(Shape image_shape, std::size_t rows, CVector matrix)
    : shape_(image_shape), rows_(rows), matrix_(std::move(matrix)) {
  if (matrix_.size() != rows_ * shape_.size())
    throw ShapeMismatch("dense operator matrix has the wrong number of entries");
  frobenius_sq_ = kp::squared_norm(matrix_);
}

DenseOperator DenseOperator::gaussian(Shape image_shape, std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  CVector a(rows * image_shape.size());
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  for (auto& v : a) v = s * rng.normal();
  return DenseOperator(image_shape, rows, std::move(a));
}

DenseOperator DenseOperator::from_mask(const SamplingMask& mask) {
  const Shape s = mask.shape;
  const std::size_t n = s.size();
  CVector a(mask.kept.size() * n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t j = 0; j < mask.kept.size(); ++j) {
    const double kr = static_cast<double>(mask.kept[j] / s.width);
    const double kc = static_cast<double>(mask.kept[j] % s.width);
    for (std::size_t p = 0; p < n; ++p) {
      const double pr = static_cast<double>(p / s.width);
      const double pc = static_cast<double>(p % s.width);
      const double phase = -2.0 * std::numbers::pi *
                           (kr * pr / static_cast<double>(s.height) + kc * pc / static_cast<double>(s.width));
      a[j * n + p] = scale * Complex(std::cos(phase), std::sin(phase));
    }
  }
  return DenseOperator(s, mask.kept.size(), std::move(a));
}

CVector DenseOperator::apply(const ComplexImage& x) const {
  require_same_shape(x.shape(), shape_, "DenseOperator::apply");
  CVector y(rows_);
  kp::matvec(matrix_, rows_, shape_.size(), x.data(), y);
  return y;
}

const std::vector<double>& DenseOperator::gram_eigenvalues() const {
  std::call_once(gram_->once, [this] {
    const auto n = static_cast<Eigen::Index>(cols());
    const auto m = static_cast<Eigen::Index>(rows_);
    Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(
        matrix_.data(), m, n);
    const Eigen::MatrixXcd gram = a.adjoint() * a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
    gram_->eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
  });
  return gram_->eigenvalues;
}

ComplexImage DenseOperator::adjoint(std::span<const Complex> y) const {
  if (y.size() != rows_) throw ShapeMismatch("DenseOperator::adjoint: wrong measurement length");
  ComplexImage x(shape_);
  kp::matvec_adjoint(matrix_, rows_, shape_.size(), y, x.data());
  return x;
}

// ---------------------------------------------------------------------------

NoisyMeasurement add_awgn(std::span<const Complex> y_clean, double snr_db, std::uint64_t seed,
                          double gamma_w_cap) {
  const double energy = kp::squared_norm(y_clean);
  if (!(energy > 0.0)) throw std::invalid_argument("add_awgn: measurement has zero energy");
  NoisyMeasurement out{CVector(y_clean.begin(), y_clean.end()), gamma_w_cap};
  if (std::isinf(snr_db) && snr_db > 0) return out;
  const double variance =
      energy / (static_cast<double>(y_clean.size()) * std::pow(10.0, snr_db / 10.0));
  Rng rng(seed);
  for (auto& v : out.y) v += rng.complex_normal(variance);
  out.gamma_w = 1.0 / variance;
  return out;
}

KSpaceVector add_awgn(const KSpaceVector& y_clean, double snr_db, std::uint64_t seed,
                      double* gamma_w_out, double gamma_w_cap) {
  auto noisy = add_awgn(y_clean.data, snr_db, seed, gamma_w_cap);
  if (gamma_w_out) *gamma_w_out = noisy.gamma_w;
  return KSpaceVector{y_clean.shape, std::move(noisy.y), y_clean.mask};
}

void Problem::validate() const {
  if (!op) throw std::invalid_argument("problem has no forward operator");
  if (!(gamma_w > 0.0)) throw std::invalid_argument("gamma_w must be positive");
  if (y.size() != op->measurements()) throw ShapeMismatch("y length does not match operator");
  if (x0) require_same_shape(x0->shape(), op->image_shape(), "problem ground truth");
}

Problem simulate_problem(const ComplexImage& x0, std::shared_ptr<const ForwardOperator> op,
                         double snr_db, std::uint64_t noise_seed, double gamma_w_cap) {
  auto noisy = add_awgn(op->apply(x0), snr_db, noise_seed, gamma_w_cap);
  Problem p{std::move(op), std::move(noisy.y), noisy.gamma_w, x0, snr_db};
  p.validate();
  return p;
}

}  // namespace pnp
