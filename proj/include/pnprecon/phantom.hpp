#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pnprecon/image.hpp"

namespace pnp {

enum class PhantomKind { shepp_logan, blocks, natural_file };

PhantomKind phantom_kind_from_string(const std::string& name);
std::string to_string(PhantomKind kind);

/// Real-valued test image in [0, 1]. `variant` 0 is the canonical phantom;
/// other values give seeded perturbations of it (geometry and intensities) so
/// a training/test suite can be built. For natural_file the image at `path`
/// (.cplx magnitude or 8-bit binary PGM) is resampled to `shape` by nearest
/// neighbour and scaled to a maximum of 1.
ComplexImage make_phantom(Shape shape, PhantomKind kind, std::uint64_t variant = 0,
                          const std::filesystem::path& path = {});

}  // namespace pnp
