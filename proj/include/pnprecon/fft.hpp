#pragma once

// Unitary 2D DFT.
//
// NOTE: the transforms here are *unitary*: both directions are scaled by
// 1/sqrt(height*width), so ||dft2(x)|| == ||x|| and idft2 is the exact adjoint
// (and inverse) of dft2. FFT libraries default to the unnormalized forward
// transform; every module in this project assumes the unitary convention.
//
// k-space layout: DC at index (0, 0). Use centered_to_fft_index() to convert
// from the centered convention (DC at (h/2, w/2)) used by mask generators.

#include <cstddef>
#include <cstdint>

#include "pnprecon/image.hpp"

namespace pnp {

ComplexImage dft2(const ComplexImage& img);
ComplexImage idft2(const ComplexImage& img);

/// Number of 2D transforms executed on the calling thread since start-up.
std::uint64_t transform_count();

/// Maps a centered-coordinate index along an axis of length n (DC at n/2) to
/// the FFT layout (DC at 0), i.e. an ifftshift.
std::size_t centered_to_fft_index(std::size_t centered, std::size_t n);
std::size_t fft_to_centered_index(std::size_t fft_index, std::size_t n);

}  // namespace pnp
