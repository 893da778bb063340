#include "mcpnet/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace mcpnet {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

SketchImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw UnreadableImage("cannot open image: " + path.string());

  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw UnreadableImage("not a PNG file: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw UnreadableImage("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw UnreadableImage("libpng init failed");
  }

  std::vector<png_byte> data;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnreadableImage("PNG decode failed: " + path.string());
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);

  // Normalize everything to 8-bit RGBA.
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
  png_read_update_info(png, info);

  data.resize(static_cast<std::size_t>(width) * height * 4);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r)
    rows[r] = data.data() + static_cast<std::size_t>(r) * width * 4;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  SketchImage img(static_cast<int>(width), static_cast<int>(height));
  for (png_uint_32 r = 0; r < height; ++r) {
    const png_byte* px = rows[r];
    for (png_uint_32 c = 0; c < width; ++c, px += 4) {
      const int a = px[3];
      auto over_white = [a](int v) {
        return static_cast<std::uint8_t>((v * a + 255 * (255 - a) + 127) / 255);
      };
      img.set(static_cast<int>(r), static_cast<int>(c),
              Rgb{over_white(px[0]), over_white(px[1]), over_white(px[2])});
    }
  }
  return img;
}

void write_png(const SketchImage& img, const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed");
  }

  std::vector<png_byte> data(static_cast<std::size_t>(img.width()) * img.height() * 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
  for (int r = 0; r < img.height(); ++r) {
    png_bytep row = data.data() + static_cast<std::size_t>(r) * img.width() * 3;
    rows[static_cast<std::size_t>(r)] = row;
    for (int c = 0; c < img.width(); ++c) {
      const Rgb px = img.at(r, c);
      row[3 * c] = px.r;
      row[3 * c + 1] = px.g;
      row[3 * c + 2] = px.b;
    }
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode failed: " + path.string());
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace mcpnet
