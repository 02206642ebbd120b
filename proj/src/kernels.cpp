#include "pnprecon/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cassert>
#include <cstdlib>
#include <string>
#include <vector>

namespace pnp::kernels {

namespace {

int g_thread_cap = 0;

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  i %= m;
  return static_cast<std::size_t>(i < 0 ? i + m : i);
}

int team_size(std::size_t n) {
  if (n < kParallelThreshold) return 1;
  return thread_cap();
}

// Blocked reduction: fixed block boundaries, partials added in order.
template <typename T, typename BlockFn>
T blocked_reduce(std::size_t n, BlockFn&& block_sum) {
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  if (blocks <= 1) return n == 0 ? T{} : block_sum(0, n);
  std::vector<T> partial(blocks);
  const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static) num_threads(team_size(n))
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
    const std::size_t hi = std::min(n, lo + kReduceBlock);
    partial[static_cast<std::size_t>(b)] = block_sum(lo, hi);
  }
  T total{};
  for (const T& p : partial) total += p;
  return total;
}

void convolve_point(std::span<const Complex> line_src, std::size_t stride, std::size_t n,
                    std::size_t i, std::span<const double> k, Complex& out) {
  Complex acc = k[0] * line_src[i * stride];
  for (std::size_t d = 1; d < k.size(); ++d) {
    const auto di = static_cast<std::ptrdiff_t>(d);
    const auto ii = static_cast<std::ptrdiff_t>(i);
    acc += k[d] * (line_src[wrap(ii + di, n) * stride] + line_src[wrap(ii - di, n) * stride]);
  }
  out = acc;
}

}  // namespace

void set_thread_cap(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("PNPRECON_THREADS")) {
      try {
        threads = std::stoi(env);
      } catch (...) {
        threads = 0;
      }
    }
  }
  g_thread_cap = threads > 0 ? threads : omp_get_max_threads();
}

int thread_cap() {
  if (g_thread_cap <= 0) set_thread_cap(0);
  return g_thread_cap;
}

// ---------------------------------------------------------------------------
namespace serial {

double squared_norm(std::span<const Complex> x) {
  double s = 0.0;
  for (const auto& v : x) s += std::norm(v);
  return s;
}

Complex dot(std::span<const Complex> a, std::span<const Complex> b) {
  assert(a.size() == b.size());
  Complex s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double real_dot(std::span<const Complex> a, std::span<const Complex> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return s;
}

void axpby(double a, std::span<const Complex> x, double b, std::span<const Complex> y,
           std::span<Complex> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
}

void soft_threshold(std::span<const Complex> in, double threshold, std::span<Complex> out) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double mag = std::abs(in[i]);
    out[i] = mag > threshold ? in[i] * ((mag - threshold) / mag) : Complex{};
  }
}

void matvec(std::span<const Complex> a, std::size_t rows, std::size_t cols,
            std::span<const Complex> x, std::span<Complex> out) {
  for (std::size_t i = 0; i < rows; ++i) {
    Complex acc{};
    const Complex* row = a.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
}

void matvec_adjoint(std::span<const Complex> a, std::size_t rows, std::size_t cols,
                    std::span<const Complex> y, std::span<Complex> out) {
  for (std::size_t j = 0; j < cols; ++j) {
    Complex acc{};
    for (std::size_t i = 0; i < rows; ++i) acc += std::conj(a[i * cols + j]) * y[i];
    out[j] = acc;
  }
}

void convolve_axis(std::span<const Complex> in, std::size_t height, std::size_t width,
                   std::span<const double> half_kernel, int axis, std::span<Complex> out) {
  if (axis == 1) {
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c)
        convolve_point(in.subspan(r * width, width), 1, width, c, half_kernel, out[r * width + c]);
  } else {
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c)
        convolve_point(in.subspan(c), width, height, r, half_kernel, out[r * width + c]);
  }
}

void masked_blend(std::span<Complex> kspace, std::span<const std::size_t> idx,
                  std::span<const Complex> y, double gamma, double gamma_w) {
  const double denom = gamma_w + gamma;
  for (std::size_t j = 0; j < idx.size(); ++j)
    kspace[idx[j]] = (gamma * kspace[idx[j]] + gamma_w * y[j]) / denom;
}

}  // namespace serial

// ---------------------------------------------------------------------------
namespace parallel {

double squared_norm(std::span<const Complex> x) {
  return blocked_reduce<double>(x.size(), [&](std::size_t lo, std::size_t hi) {
    return serial::squared_norm(x.subspan(lo, hi - lo));
  });
}

Complex dot(std::span<const Complex> a, std::span<const Complex> b) {
  assert(a.size() == b.size());
  return blocked_reduce<Complex>(a.size(), [&](std::size_t lo, std::size_t hi) {
    return serial::dot(a.subspan(lo, hi - lo), b.subspan(lo, hi - lo));
  });
}

double real_dot(std::span<const Complex> a, std::span<const Complex> b) {
  assert(a.size() == b.size());
  return blocked_reduce<double>(a.size(), [&](std::size_t lo, std::size_t hi) {
    return serial::real_dot(a.subspan(lo, hi - lo), b.subspan(lo, hi - lo));
  });
}

void axpby(double a, std::span<const Complex> x, double b, std::span<const Complex> y,
           std::span<Complex> out) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static) num_threads(team_size(out.size()))
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void soft_threshold(std::span<const Complex> in, double threshold, std::span<Complex> out) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static) num_threads(team_size(in.size()))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double mag = std::abs(in[i]);
    out[i] = mag > threshold ? in[i] * ((mag - threshold) / mag) : Complex{};
  }
}

void matvec(std::span<const Complex> a, std::size_t rows, std::size_t cols,
            std::span<const Complex> x, std::span<Complex> out) {
  const auto nr = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) num_threads(team_size(rows * cols))
  for (std::ptrdiff_t i = 0; i < nr; ++i) {
    Complex acc{};
    const Complex* row = a.data() + static_cast<std::size_t>(i) * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
}

void matvec_adjoint(std::span<const Complex> a, std::size_t rows, std::size_t cols,
                    std::span<const Complex> y, std::span<Complex> out) {
  const auto nc = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static) num_threads(team_size(rows * cols))
  for (std::ptrdiff_t j = 0; j < nc; ++j) {
    Complex acc{};
    for (std::size_t i = 0; i < rows; ++i)
      acc += std::conj(a[i * cols + static_cast<std::size_t>(j)]) * y[i];
    out[j] = acc;
  }
}

void convolve_axis(std::span<const Complex> in, std::size_t height, std::size_t width,
                   std::span<const double> half_kernel, int axis, std::span<Complex> out) {
  const auto nr = static_cast<std::ptrdiff_t>(height);
#pragma omp parallel for schedule(static) num_threads(team_size(height * width))
  for (std::ptrdiff_t ri = 0; ri < nr; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    for (std::size_t c = 0; c < width; ++c) {
      if (axis == 1)
        convolve_point(in.subspan(r * width, width), 1, width, c, half_kernel, out[r * width + c]);
      else
        convolve_point(in.subspan(c), width, height, r, half_kernel, out[r * width + c]);
    }
  }
}

void masked_blend(std::span<Complex> kspace, std::span<const std::size_t> idx,
                  std::span<const Complex> y, double gamma, double gamma_w) {
  const double denom = gamma_w + gamma;
  const auto n = static_cast<std::ptrdiff_t>(idx.size());
#pragma omp parallel for schedule(static) num_threads(team_size(idx.size()))
  for (std::ptrdiff_t j = 0; j < n; ++j)
    kspace[idx[j]] = (gamma * kspace[idx[j]] + gamma_w * y[j]) / denom;
}

}  // namespace parallel
}  // namespace pnp::kernels
