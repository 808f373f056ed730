#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "svgsmith/raster.hpp"

namespace svgsmith::raster {
namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes.size()) png_error(png, "truncated PNG data");
  std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
  cursor->offset += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_callback(png_structp) {}

void error_callback(png_structp, png_const_charp message) { throw IoError(std::string("PNG: ") + message); }
void warning_callback(png_structp, png_const_charp) {}

struct Decoded {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgba;  // 4 channels, 8 bits
};

Decoded decode_rgba(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG image");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
  png_infop info = png_create_info_struct(png);
  Decoded out;
  try {
    ReadCursor cursor{bytes, 0};
    png_set_read_fn(png, &cursor, read_callback);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (!(color & PNG_COLOR_MASK_ALPHA) && !png_get_valid(png, info, PNG_INFO_tRNS))
      png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.rgba.resize(static_cast<std::size_t>(out.width) * out.height * 4);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.rgba.data() + static_cast<std::size_t>(y) * out.width * 4;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::vector<std::uint8_t> encode(int width, int height, int channels, const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, write_callback, flush_callback);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
      png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width * channels));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& file, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

std::vector<std::uint8_t> encode_png(const RasterImage& image) {
  std::vector<std::uint8_t> px(image.rgb.size());
  std::transform(image.rgb.begin(), image.rgb.end(), px.begin(), to_byte);
  return encode(image.width, image.height, 3, px);
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  const Decoded d = decode_rgba(bytes);
  RasterImage img(d.width, d.height);
  // Transparent pixels are composited over white.
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double a = d.rgba[i * 4 + 3] / 255.0;
    for (int c = 0; c < 3; ++c) img.rgb[i * 3 + c] = (d.rgba[i * 4 + c] / 255.0) * a + (1.0 - a);
  }
  return img;
}

void write_png(const RasterImage& image, const std::filesystem::path& file) { write_file(file, encode_png(image)); }

RasterImage read_png(const std::filesystem::path& file) { return decode_png(read_file(file)); }

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
  std::vector<std::uint8_t> px(mask.bits.size());
  std::transform(mask.bits.begin(), mask.bits.end(), px.begin(), [](auto b) { return b ? 255 : 0; });
  return encode(mask.width, mask.height, 1, px);
}

BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes) {
  const Decoded d = decode_rgba(bytes);
  BinaryMask mask(d.width, d.height);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    const int luma = d.rgba[i * 4] + d.rgba[i * 4 + 1] + d.rgba[i * 4 + 2];
    mask.bits[i] = (luma >= 3 * 128 && d.rgba[i * 4 + 3] >= 128) ? 1 : 0;
  }
  return mask;
}

void write_mask_png(const BinaryMask& mask, const std::filesystem::path& file) {
  write_file(file, encode_mask_png(mask));
}

BinaryMask read_mask_png(const std::filesystem::path& file) { return decode_mask_png(read_file(file)); }

}  // namespace svgsmith::raster
