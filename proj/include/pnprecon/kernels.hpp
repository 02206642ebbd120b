#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel`; the library
// calls the parallel ones and the tests check them against the references.
//
// Parallel reductions split the input into fixed blocks of kReduceBlock
// elements and add the block partials in index order, so the result does not
// depend on the number of threads.

#include <complex>
#include <cstddef>
#include <span>

namespace pnp::kernels {

using Complex = std::complex<double>;

inline constexpr std::size_t kReduceBlock = 4096;
// Below this many elements the parallel kernels stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1 << 14;

namespace serial {

double squared_norm(std::span<const Complex> x);
Complex dot(std::span<const Complex> a, std::span<const Complex> b);
double real_dot(std::span<const Complex> a, std::span<const Complex> b);
void axpby(double a, std::span<const Complex> x, double b, std::span<const Complex> y,
           std::span<Complex> out);
void soft_threshold(std::span<const Complex> in, double threshold, std::span<Complex> out);
// out = A x, A is rows x cols row-major.
void matvec(std::span<const Complex> a, std::size_t rows, std::size_t cols,
            std::span<const Complex> x, std::span<Complex> out);
// out = A^H y
void matvec_adjoint(std::span<const Complex> a, std::size_t rows, std::size_t cols,
                    std::span<const Complex> y, std::span<Complex> out);
// Circular convolution of every row (axis=1) or column (axis=0) with a
// symmetric real kernel of half-width kernel.size()-1.
void convolve_axis(std::span<const Complex> in, std::size_t height, std::size_t width,
                   std::span<const double> half_kernel, int axis, std::span<Complex> out);
// Diagonal per-bin solve of the masked-Fourier linear stage:
// kspace[idx[j]] = (gamma * kspace[idx[j]] + gamma_w * y[j]) / (gamma_w + gamma).
void masked_blend(std::span<Complex> kspace, std::span<const std::size_t> idx,
                  std::span<const Complex> y, double gamma, double gamma_w);

}  // namespace serial

namespace parallel {

double squared_norm(std::span<const Complex> x);
Complex dot(std::span<const Complex> a, std::span<const Complex> b);
double real_dot(std::span<const Complex> a, std::span<const Complex> b);
void axpby(double a, std::span<const Complex> x, double b, std::span<const Complex> y,
           std::span<Complex> out);
void soft_threshold(std::span<const Complex> in, double threshold, std::span<Complex> out);
void matvec(std::span<const Complex> a, std::size_t rows, std::size_t cols,
            std::span<const Complex> x, std::span<Complex> out);
void matvec_adjoint(std::span<const Complex> a, std::size_t rows, std::size_t cols,
                    std::span<const Complex> y, std::span<Complex> out);
void convolve_axis(std::span<const Complex> in, std::size_t height, std::size_t width,
                   std::span<const double> half_kernel, int axis, std::span<Complex> out);
void masked_blend(std::span<Complex> kspace, std::span<const std::size_t> idx,
                  std::span<const Complex> y, double gamma, double gamma_w);

}  // namespace parallel

/// Caps the OpenMP team size used by the parallel kernels and the experiment
/// harness. Reads PNPRECON_THREADS when called with 0.
void set_thread_cap(int threads);
int thread_cap();

}  // namespace pnp::kernels
