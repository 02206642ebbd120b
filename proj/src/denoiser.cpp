#include "pnprecon/denoiser.hpp"

#include <cmath>
#include <numeric>

#include "pnprecon/external_denoiser.hpp"
#include "pnprecon/kernels.hpp"
#include "pnprecon/rng.hpp"
#include "pnprecon/wavelet.hpp"

namespace pnp {

namespace kp = kernels::parallel;

std::string to_string(DenoiserKind kind) {
  switch (kind) {
    case DenoiserKind::wavelet_soft: return "wavelet_soft";
    case DenoiserKind::soft_threshold: return "soft_threshold";
    case DenoiserKind::gaussian_smooth: return "gaussian_smooth";
    case DenoiserKind::linear_test: return "linear_test";
    case DenoiserKind::external: return "external";
  }
  return "wavelet_soft";
}

DenoiserKind denoiser_kind_from_string(const std::string& name) {
  if (name == "wavelet_soft") return DenoiserKind::wavelet_soft;
  if (name == "soft_threshold") return DenoiserKind::soft_threshold;
  if (name == "gaussian_smooth") return DenoiserKind::gaussian_smooth;
  if (name == "linear_test") return DenoiserKind::linear_test;
  if (name == "external") return DenoiserKind::external;
  throw std::invalid_argument("unknown denoiser kind: " + name);
}

std::string to_string(ComplexPolicy policy) {
  return policy == ComplexPolicy::split_re_im ? "split_re_im" : "magnitude_phase";
}

ComplexPolicy complex_policy_from_string(const std::string& name) {
  if (name == "split_re_im") return ComplexPolicy::split_re_im;
  if (name == "magnitude_phase") return ComplexPolicy::magnitude_phase;
  throw std::invalid_argument("unknown complex policy: " + name);
}

ComplexImage Denoiser::operator()(const ComplexImage& r, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("denoiser noise variance must be positive and finite");
  ++calls_;
  ComplexImage out = apply(r, tau);
  require_same_shape(out.shape(), r.shape(), "denoiser output");
  if (!out.all_finite()) throw NonFiniteOutput("denoiser produced non-finite output");
  return out;
}

ComplexImage soft_threshold(const ComplexImage& r, double threshold) {
  ComplexImage out(r.shape());
  kp::soft_threshold(r.data(), threshold, out.data());
  return out;
}

ComplexImage prox_l1_wavelet(const ComplexImage& r, double lambda_tau, int levels) {
  if (!(lambda_tau >= 0.0)) throw std::invalid_argument("prox threshold must be >= 0");
  if (lambda_tau == 0.0) return r;
  const Wavelet2D psi(r.shape(), levels);
  return psi.inverse(soft_threshold(psi.forward(r), lambda_tau));
}

namespace {

double shrink_threshold(const DenoiserSpec& spec, double tau) {
  return spec.lambda * (spec.map_prox ? tau : std::sqrt(tau));
}

class WaveletSoft final : public Denoiser {
 public:
  explicit WaveletSoft(const DenoiserSpec& spec) : spec_(spec) {}

 protected:
  ComplexImage apply(const ComplexImage& r, double tau) override {
    return prox_l1_wavelet(r, shrink_threshold(spec_, tau), spec_.wavelet_levels);
  }

 private:
  DenoiserSpec spec_;
};

class PixelSoft final : public Denoiser {
 public:
  explicit PixelSoft(const DenoiserSpec& spec) : spec_(spec) {}

 protected:
  ComplexImage apply(const ComplexImage& r, double tau) override {
    return soft_threshold(r, shrink_threshold(spec_, tau));
  }

 private:
  DenoiserSpec spec_;
};

// Real-plane denoisers. Linear ones commute with split_re_im, so apply_linear
// is used on the complex image directly in that case.
class PlaneDenoiser : public Denoiser {
 public:
  explicit PlaneDenoiser(ComplexPolicy policy) : policy_(policy) {}

 protected:
  virtual ComplexImage apply_linear(const ComplexImage& r) const = 0;

  ComplexImage apply(const ComplexImage& r, double) override {
    if (policy_ == ComplexPolicy::split_re_im) return apply_linear(r);
    ComplexImage mag(r.shape());
    for (std::size_t i = 0; i < r.size(); ++i) mag[i] = std::abs(r[i]);
    ComplexImage out = apply_linear(mag);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double m = std::abs(r[i]);
      const Complex phase = m > 0 ? r[i] / m : Complex{1.0, 0.0};
      out[i] = out[i].real() * phase;
    }
    return out;
  }

  [[nodiscard]] bool is_linear() const { return policy_ == ComplexPolicy::split_re_im; }

 private:
  ComplexPolicy policy_;
};

class GaussianSmooth final : public PlaneDenoiser {
 public:
  GaussianSmooth(double sigma, ComplexPolicy policy) : PlaneDenoiser(policy) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian sigma must be >= 0");
    const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
    half_.resize(radius + 1);
    for (std::size_t d = 0; d <= radius; ++d)
      half_[d] = sigma > 0 ? std::exp(-0.5 * static_cast<double>(d * d) / (sigma * sigma)) : 1.0;
    const double total = 2.0 * std::accumulate(half_.begin(), half_.end(), 0.0) - half_[0];
    for (auto& k : half_) k /= total;
  }

  [[nodiscard]] std::optional<double> exact_divergence(Shape s) const override {
    if (!is_linear()) return std::nullopt;
    return center_weight(s.height) * center_weight(s.width);
  }

 protected:
  ComplexImage apply_linear(const ComplexImage& r) const override {
    ComplexImage tmp(r.shape()), out(r.shape());
    kp::convolve_axis(r.data(), r.height(), r.width(), half_, 1, tmp.data());
    kp::convolve_axis(tmp.data(), r.height(), r.width(), half_, 0, out.data());
    return out;
  }

 private:
  // Diagonal entry of the circulant smoothing matrix along an axis of length n.
  [[nodiscard]] double center_weight(std::size_t n) const {
    double w = half_[0];
    for (std::size_t d = 1; d < half_.size(); ++d)
      if (d % n == 0) w += 2.0 * half_[d];
    return w;
  }

  std::vector<double> half_;
};

class LinearTest final : public PlaneDenoiser {
 public:
  LinearTest(std::shared_ptr<const std::vector<double>> matrix, ComplexPolicy policy)
      : PlaneDenoiser(policy), b_(std::move(matrix)) {
    if (!b_) throw std::invalid_argument("linear_test denoiser needs a matrix");
    n_ = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(b_->size()))));
    if (n_ * n_ != b_->size()) throw std::invalid_argument("linear_test matrix must be square");
  }

  [[nodiscard]] std::optional<double> exact_divergence(Shape) const override {
    if (!is_linear()) return std::nullopt;
    double tr = 0.0;
    for (std::size_t i = 0; i < n_; ++i) tr += (*b_)[i * n_ + i];
    return tr / static_cast<double>(n_);
  }

 protected:
  ComplexImage apply_linear(const ComplexImage& r) const override {
    if (r.size() != n_) throw ShapeMismatch("linear_test matrix does not match image size");
    ComplexImage out(r.shape());
    for (std::size_t i = 0; i < n_; ++i) {
      Complex acc{};
      const double* row = b_->data() + i * n_;
      for (std::size_t j = 0; j < n_; ++j) acc += row[j] * r[j];
      out[i] = acc;
    }
    return out;
  }

 private:
  std::shared_ptr<const std::vector<double>> b_;
  std::size_t n_ = 0;
};

class External final : public Denoiser {
 public:
  explicit External(const DenoiserSpec& spec)
      : client_(spec.endpoint, spec.timeout_seconds), policy_(spec.complex_policy) {}

 protected:
  ComplexImage apply(const ComplexImage& r, double tau) override {
    if (policy_ == ComplexPolicy::split_re_im) return client_.denoise(r, tau);
    ComplexImage mag(r.shape());
    for (std::size_t i = 0; i < r.size(); ++i) mag[i] = std::abs(r[i]);
    ComplexImage out = client_.denoise(mag, tau);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double m = std::abs(r[i]);
      out[i] = out[i].real() * (m > 0 ? r[i] / m : Complex{1.0, 0.0});
    }
    return out;
  }

 private:
  ExternalDenoiserClient client_;
  ComplexPolicy policy_;
};

}  // namespace

std::unique_ptr<Denoiser> make_denoiser(const DenoiserSpec& spec) {
  switch (spec.kind) {
    case DenoiserKind::wavelet_soft: return std::make_unique<WaveletSoft>(spec);
    case DenoiserKind::soft_threshold: return std::make_unique<PixelSoft>(spec);
    case DenoiserKind::gaussian_smooth: return std::make_unique<GaussianSmooth>(spec.sigma, spec.complex_policy);
    case DenoiserKind::linear_test: return std::make_unique<LinearTest>(spec.matrix, spec.complex_policy);
    case DenoiserKind::external: return std::make_unique<External>(spec);
  }
  throw std::invalid_argument("unknown denoiser kind");
}

ComplexImage denoise(const DenoiserSpec& spec, const ComplexImage& r, double tau) {
  return (*make_denoiser(spec))(r, tau);
}

double default_probe_epsilon(const ComplexImage& r) {
  const double rms = r.size() ? norm(r) / std::sqrt(static_cast<double>(r.size())) : 0.0;
  return std::max(rms, 1e-5) / 1000.0;
}

DivergenceEstimate mc_divergence(Denoiser& f, const ComplexImage& r, double tau, double epsilon,
                                 int probes, std::uint64_t seed, const ComplexImage* f_of_r) {
  if (probes < 1) throw std::invalid_argument("mc_divergence needs at least one probe");
  if (!(epsilon > 0.0)) epsilon = default_probe_epsilon(r);

  ComplexImage base_storage;
  if (!f_of_r) {
    base_storage = f(r, tau);
    f_of_r = &base_storage;
  }
  Rng rng(seed);
  const double n = static_cast<double>(r.size());
  ComplexImage q(r.shape());
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(probes));
  for (int k = 0; k < probes; ++k) {
    for (auto& v : q.data()) v = rng.normal();
    const ComplexImage perturbed = f(lincomb(1.0, r, epsilon, q), tau);
    const ComplexImage diff = lincomb(1.0, perturbed, -1.0, *f_of_r);
    samples.push_back(kp::real_dot(q.data(), diff.data()) / (epsilon * n));
  }
  DivergenceEstimate est{0.0, probes, epsilon, seed, 0.0};
  for (double s : samples) est.alpha_bar += s;
  est.alpha_bar /= probes;
  if (probes > 1) {
    double var = 0.0;
    for (double s : samples) var += (s - est.alpha_bar) * (s - est.alpha_bar);
    var /= (probes - 1);
    est.std_error = std::sqrt(var / probes);
  }
  if (!std::isfinite(est.alpha_bar)) throw NonFiniteOutput("divergence estimate is not finite");
  return est;
}

}  // namespace pnp
