#pragma once

#include <string>

#include "visrec/image.hpp"

namespace visrec {

// Raw float image format:
//   16-byte header: magic "IMF1", u32 height, u32 width, u32 channels (LE),
//   followed by H*W*C little-endian float32 values.
// Values are clamped to [0,1] on decode.
std::string encode_imgf32(const Image& img);
Image decode_imgf32(const std::string& bytes);

// PNG via libpng. Decodes 8/16-bit gray, gray+alpha, RGB and RGBA down to
// 1- or 3-channel float in [0,1] (alpha is dropped). Encoding writes 8-bit.
std::string encode_png(const Image& img);
Image decode_png(const std::string& bytes);

// Sniffs PNG vs IMF1 by leading bytes.
Image decode_image(const std::string& bytes);

Image load_image(const std::string& path);
void save_image(const std::string& path, const Image& img);  // by extension

}  // namespace visrec
