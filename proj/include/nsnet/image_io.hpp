#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nsnet/patchsel.hpp"

namespace nsnet {

/// Decodes PNG or JPEG (anything the codec recognises) to 8-bit RGB.
RasterImage decode_image(std::span<const std::uint8_t> encoded);
RasterImage load_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RasterImage& img);
/// Atomic write of a PNG file.
void save_png(const RasterImage& img, const std::filesystem::path& path);

}  // namespace nsnet
