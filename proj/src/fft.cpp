#include "pnprecon/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace pnp {

namespace {

thread_local std::uint64_t t_transform_count = 0;

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per (shape, direction) and never destroyed.
fftw_plan plan_for(Shape shape, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_tuple(shape.height, shape.width, sign);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  CVector in(shape.size()), out(shape.size());
  fftw_plan p = fftw_plan_dft_2d(static_cast<int>(shape.height), static_cast<int>(shape.width),
                                 reinterpret_cast<fftw_complex*>(in.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

ComplexImage transform(const ComplexImage& img, int sign) {
  ++t_transform_count;
  ComplexImage out(img.shape());
  if (img.size() == 0) return out;
  // new-array execute does not modify the input for out-of-place c2c plans.
  auto* in = const_cast<Complex*>(img.data().data());
  fftw_execute_dft(plan_for(img.shape(), sign), reinterpret_cast<fftw_complex*>(in),
                   reinterpret_cast<fftw_complex*>(out.data().data()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(img.size()));
  for (auto& v : out.data()) v *= scale;
  return out;
}

}  // namespace

ComplexImage dft2(const ComplexImage& img) { return transform(img, FFTW_FORWARD); }

ComplexImage idft2(const ComplexImage& img) { return transform(img, FFTW_BACKWARD); }

std::uint64_t transform_count() { return t_transform_count; }

std::size_t centered_to_fft_index(std::size_t centered, std::size_t n) {
  return (centered + n - n / 2) % n;
}

std::size_t fft_to_centered_index(std::size_t fft_index, std::size_t n) {
  return (fft_index + n / 2) % n;
}

}  // namespace pnp
