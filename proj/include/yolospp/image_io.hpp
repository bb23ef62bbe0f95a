#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "yolospp/box.hpp"
#include "yolospp/tensor.hpp"

namespace yolospp {

/// Decodes a binary P6 PPM (maxval up to 65535) into a 3 x H x W tensor scaled to [0, 1].
/// Throws ParseError on malformed headers and truncated pixel data.
Tensor decode_ppm(std::span<const std::byte> bytes);
Tensor read_ppm(const std::string& path);

/// Encodes a 3 x H x W tensor as 8-bit P6, clamping to [0, 1] and rounding to nearest.
std::vector<std::byte> encode_ppm(const Tensor& image);
void write_ppm(const std::string& path, const Tensor& image);

using Color = std::array<Real, 3>;

/// Outline colors by class index modulo 10.
const std::array<Color, 10>& class_palette();

/// Draws the outline of `box` (pixels, center based) `thickness` pixels wide, inside the box edge
/// and clipped to the image.
void draw_box(Tensor& image, const Box& box, const Color& color, int thickness = 2);

/// Draws every detection with its class color.
void render_detections(Tensor& image, std::span<const Detection> detections);

}  // namespace yolospp
