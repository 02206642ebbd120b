#include "pnprecon/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pnprecon/image_io.hpp"
#include "pnprecon/rng.hpp"

namespace pnp {

PhantomKind phantom_kind_from_string(const std::string& name) {
  if (name == "shepp_logan") return PhantomKind::shepp_logan;
  if (name == "blocks") return PhantomKind::blocks;
  if (name == "natural_file") return PhantomKind::natural_file;
  throw std::invalid_argument("unknown phantom kind: " + name);
}

std::string to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::shepp_logan: return "shepp_logan";
    case PhantomKind::blocks: return "blocks";
    case PhantomKind::natural_file: return "natural_file";
  }
  return "shepp_logan";
}

namespace {

struct Ellipse {
  double intensity, a, b, x0, y0, phi_deg;
};

// Modified Shepp-Logan (Toft) with higher-contrast intensities.
constexpr std::array<Ellipse, 10> kSheppLogan{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
    {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
}};

ComplexImage shepp_logan(Shape shape, std::uint64_t variant) {
  auto ellipses = kSheppLogan;
  double scale = 1.0, shift_x = 0.0, shift_y = 0.0, rot = 0.0;
  if (variant != 0) {
    Rng rng(0x5eed'0000ULL + variant);
    scale = 0.85 + 0.15 * rng.uniform();
    shift_x = 0.1 * (rng.uniform() - 0.5);
    shift_y = 0.1 * (rng.uniform() - 0.5);
    rot = (rng.uniform() - 0.5) * std::numbers::pi / 9.0;
    for (std::size_t i = 2; i < ellipses.size(); ++i) {
      ellipses[i].intensity *= 0.7 + 0.6 * rng.uniform();
      ellipses[i].x0 += 0.04 * (rng.uniform() - 0.5);
      ellipses[i].y0 += 0.04 * (rng.uniform() - 0.5);
    }
  }
  ComplexImage img(shape);
  const double h = static_cast<double>(shape.height), w = static_cast<double>(shape.width);
  for (std::size_t r = 0; r < shape.height; ++r) {
    for (std::size_t c = 0; c < shape.width; ++c) {
      // Pixel centre in [-1, 1]^2, y pointing up.
      double x = (2.0 * (static_cast<double>(c) + 0.5) / w - 1.0 - shift_x) / scale;
      double y = (1.0 - 2.0 * (static_cast<double>(r) + 0.5) / h - shift_y) / scale;
      const double xr = x * std::cos(rot) + y * std::sin(rot);
      const double yr = -x * std::sin(rot) + y * std::cos(rot);
      x = xr;
      y = yr;
      double v = 0.0;
      for (const auto& e : ellipses) {
        const double phi = e.phi_deg * std::numbers::pi / 180.0;
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double t = -dx * std::sin(phi) + dy * std::cos(phi);
        if ((u * u) / (e.a * e.a) + (t * t) / (e.b * e.b) <= 1.0) v += e.intensity;
      }
      img(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

struct Block {
  double top, left, bottom, right, level;
};

ComplexImage blocks(Shape shape, std::uint64_t variant) {
  std::vector<Block> layout{
      {0.10, 0.10, 0.90, 0.90, 0.25}, {0.20, 0.15, 0.45, 0.50, 0.75},
      {0.55, 0.20, 0.80, 0.45, 1.00}, {0.25, 0.60, 0.70, 0.85, 0.50},
      {0.35, 0.68, 0.50, 0.78, 1.00}, {0.60, 0.55, 0.75, 0.70, 0.75},
  };
  if (variant != 0) {
    Rng rng(0xb10c'0000ULL + variant);
    constexpr std::array<double, 4> levels{0.25, 0.5, 0.75, 1.0};
    layout.assign(1, {0.08, 0.08, 0.92, 0.92, 0.25});
    for (std::size_t i = 0; i < 7; ++i) {
      const double hgt = 0.1 + 0.3 * rng.uniform(), wid = 0.1 + 0.3 * rng.uniform();
      const double top = 0.1 + (0.8 - hgt) * rng.uniform();
      const double left = 0.1 + (0.8 - wid) * rng.uniform();
      // Cycle through the non-background levels so every variant has all four.
      layout.push_back({top, left, top + hgt, left + wid, levels[1 + i % 3]});
    }
  }
  ComplexImage img(shape);
  const double h = static_cast<double>(shape.height), w = static_cast<double>(shape.width);
  for (const auto& b : layout) {
    const auto r0 = static_cast<std::size_t>(std::lround(b.top * h));
    const auto r1 = static_cast<std::size_t>(std::lround(b.bottom * h));
    const auto c0 = static_cast<std::size_t>(std::lround(b.left * w));
    const auto c1 = static_cast<std::size_t>(std::lround(b.right * w));
    for (std::size_t r = r0; r < std::min(r1, shape.height); ++r)
      for (std::size_t c = c0; c < std::min(c1, shape.width); ++c) img(r, c) = b.level;
  }
  return img;
}

ComplexImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image: " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P5" || w == 0 || h == 0 || maxval == 0 || maxval > 255)
    throw IoError("unsupported PGM (need 8-bit P5): " + path.string());
  is.get();
  std::vector<unsigned char> bytes(w * h);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw IoError("truncated PGM: " + path.string());
  ComplexImage img(Shape{h, w});
  for (std::size_t i = 0; i < bytes.size(); ++i) img[i] = static_cast<double>(bytes[i]);
  return img;
}

ComplexImage natural(Shape shape, const std::filesystem::path& path) {
  const ComplexImage src = path.extension() == ".pgm" ? read_pgm(path) : read_cplx(path);
  if (src.size() == 0) throw IoError("empty image: " + path.string());
  double peak = 0.0;
  for (const auto& v : src.data()) peak = std::max(peak, std::abs(v));
  ComplexImage img(shape);
  for (std::size_t r = 0; r < shape.height; ++r) {
    const std::size_t sr = r * src.height() / shape.height;
    for (std::size_t c = 0; c < shape.width; ++c) {
      const std::size_t sc = c * src.width() / shape.width;
      img(r, c) = peak > 0 ? std::abs(src(sr, sc)) / peak : 0.0;
    }
  }
  return img;
}

}  // namespace

ComplexImage make_phantom(Shape shape, PhantomKind kind, std::uint64_t variant,
                          const std::filesystem::path& path) {
  if (shape.size() == 0) throw std::invalid_argument("phantom shape must be non-empty");
  switch (kind) {
    case PhantomKind::shepp_logan: return shepp_logan(shape, variant);
    case PhantomKind::blocks: return blocks(shape, variant);
    case PhantomKind::natural_file: return natural(shape, path);
  }
  throw std::invalid_argument("unknown phantom kind");
}

}  // namespace pnp
