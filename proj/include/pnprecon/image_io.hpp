#pragma once

#include <filesystem>
#include <stdexcept>
#include <utility>

#include "pnprecon/image.hpp"

namespace pnp {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// .cplx: little-endian u32 height, u32 width, then height*width interleaved
// (re, im) f64 pairs, row-major.
void write_cplx(const std::filesystem::path& path, const ComplexImage& img);
ComplexImage read_cplx(const std::filesystem::path& path);

struct MagnitudeRange {
  double min = 0.0;
  double max = 0.0;
};

/// Writes |img| as an 8-bit binary PGM with min-max scaling; returns the range used.
MagnitudeRange write_magnitude_pgm(const std::filesystem::path& path, const ComplexImage& img);

}  // namespace pnp
