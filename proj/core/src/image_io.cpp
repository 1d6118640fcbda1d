#include "visrec/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstring>

#include "visrec/binio.hpp"
#include "visrec/errors.hpp"

namespace visrec {

std::string encode_imgf32(const Image& img) {
  ByteWriter w;
  w.magic("IMF1");
  w.u32(static_cast<uint32_t>(img.height));
  w.u32(static_cast<uint32_t>(img.width));
  w.u32(static_cast<uint32_t>(img.channels));
  w.f32_array(img.data.data(), img.data.size());
  return w.bytes();
}

Image decode_imgf32(const std::string& bytes) {
  ByteReader r(bytes);
  r.expect_magic("IMF1", "imgf32");
  uint32_t h = r.u32();
  uint32_t w = r.u32();
  uint32_t c = r.u32();
  if (h < 1 || w < 1 || (c != 1 && c != 3)) {
    throw DataError("imgf32: invalid dimensions " + std::to_string(h) + "x" +
                    std::to_string(w) + "x" + std::to_string(c));
  }
  size_t n = static_cast<size_t>(h) * w * c;
  if (r.remaining() != n * sizeof(float)) {
    throw DataError("imgf32: payload size mismatch");
  }
  Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  r.f32_array(img.data.data(), n);
  for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

namespace {

struct PngReadCtx {
  const std::string* bytes;
  size_t pos;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t n) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
  if (ctx->pos + n > ctx->bytes->size()) {
    png_error(png, "read past end of PNG data");
  }
  std::memcpy(out, ctx->bytes->data() + ctx->pos, n);
  ctx->pos += n;
}

void png_mem_write(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

void png_mem_flush(png_structp) {}

}  // namespace

Image decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(
          reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw DataError("not a PNG file");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png: allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png: allocation failed");
  }
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: corrupt or unreadable image");
  }
  PngReadCtx ctx{&bytes, 0};
  png_set_read_fn(png, &ctx, png_mem_read);
  png_read_info(png, info);

  png_uint_32 width = png_get_image_width(png, info);
  png_uint_32 height = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: unsupported channel count " +
                    std::to_string(channels));
  }
  size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(height), static_cast<int>(width), channels);
  const float inv = 1.0f / 255.0f;
  for (png_uint_32 y = 0; y < height; ++y) {
    const png_byte* row = pixels.data() + y * rowbytes;
    for (size_t i = 0; i < static_cast<size_t>(width) * channels; ++i) {
      img.data[static_cast<size_t>(y) * width * channels + i] = row[i] * inv;
    }
  }
  return img;
}

std::string encode_png(const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw DataError("png: only 1- or 3-channel images can be encoded");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) throw DataError("png: allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png: allocation failed");
  }
  std::string out;
  std::vector<png_byte> pixels(img.data.size());
  std::vector<png_bytep> rows(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: encode failed");
  }
  png_set_write_fn(png, &out, png_mem_write, png_mem_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  for (size_t i = 0; i < img.data.size(); ++i) {
    float v = std::clamp(img.data[i], 0.0f, 1.0f);
    pixels[i] = static_cast<png_byte>(v * 255.0f + 0.5f);
  }
  size_t rowbytes = static_cast<size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_image(const std::string& bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "IMF1", 4) == 0) {
    return decode_imgf32(bytes);
  }
  return decode_png(bytes);
}

Image load_image(const std::string& path) {
  return decode_image(read_file(path));
}

void save_image(const std::string& path, const Image& img) {
  auto ends_with = [&](const char* suf) {
    size_t n = std::strlen(suf);
    return path.size() >= n &&
           path.compare(path.size() - n, n, suf) == 0;
  };
  if (ends_with(".imgf32")) {
    write_file(path, encode_imgf32(img));
  } else if (ends_with(".png")) {
    write_file(path, encode_png(img));
  } else {
    throw ConfigError("save_image: unsupported extension in " + path);
  }
}

}  // namespace visrec
