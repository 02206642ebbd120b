#include "pnprecon/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace pnp {

namespace {

static_assert(std::endian::native == std::endian::little,
              "cplx I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw IoError("truncated cplx file: " + path.string());
  return v;
}

}  // namespace

void write_cplx(const std::filesystem::path& path, const ComplexImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  put(os, static_cast<std::uint32_t>(img.height()));
  put(os, static_cast<std::uint32_t>(img.width()));
  for (const auto& v : img.data()) {
    put(os, v.real());
    put(os, v.imag());
  }
  if (!os) throw IoError("write failed: " + path.string());
}

ComplexImage read_cplx(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  const auto h = get<std::uint32_t>(is, path);
  const auto w = get<std::uint32_t>(is, path);
  ComplexImage img(Shape{h, w});
  for (auto& v : img.data()) {
    const double re = get<double>(is, path);
    const double im = get<double>(is, path);
    v = {re, im};
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw IoError("trailing bytes in cplx file: " + path.string());
  return img;
}

MagnitudeRange write_magnitude_pgm(const std::filesystem::path& path, const ComplexImage& img) {
  MagnitudeRange range{std::numeric_limits<double>::infinity(),
                       -std::numeric_limits<double>::infinity()};
  for (const auto& v : img.data()) {
    range.min = std::min(range.min, std::abs(v));
    range.max = std::max(range.max, std::abs(v));
  }
  if (img.size() == 0) range = {};
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  const double span = range.max - range.min;
  for (const auto& v : img.data()) {
    const double t = span > 0 ? (std::abs(v) - range.min) / span : 0.0;
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
  }
  if (!os) throw IoError("write failed: " + path.string());
  return range;
}

}  // namespace pnp
