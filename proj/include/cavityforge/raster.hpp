#pragma once

#include "cavityforge/grid.hpp"

#include <cstdint>
#include <filesystem>

namespace cavityforge::io {

/// Grayscale raster with its native bit depth (8 or 16). Samples are stored
/// widened to 16 bits; 8-bit rasters keep values in [0, 255].
struct RasterImage {
    Grid<std::uint16_t> pixels;
    int bit_depth = 8;

    std::uint16_t max_value() const noexcept { return bit_depth == 8 ? 255 : 65535; }
    bool operator==(const RasterImage&) const = default;
};

/// Reads binary PGM (P5, maxval <= 65535) or 8/16-bit grayscale PNG, chosen by extension.
RasterImage read_raster(const std::filesystem::path& path);

/// Writes PGM or PNG by extension, preserving the bit depth. Atomic via rename.
void write_raster(const std::filesystem::path& path, const RasterImage& image);

/// Writes a 0/1 mask as an 8-bit raster with values 0 and 255.
void write_mask(const std::filesystem::path& path, const Mask& mask);
/// Reads a mask raster; any nonzero sample is set.
Mask read_mask(const std::filesystem::path& path);

}  // namespace cavityforge::io
