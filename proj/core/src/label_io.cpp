#include "nucleval/label_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "nucleval/error.hpp"

namespace nucleval {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_handler(png_structp, png_const_charp message) {
  throw DataError(std::string("png: ") + message);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

InstanceMap read_label_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           png_error_handler, png_warning_handler);
  if (png == nullptr) throw DataError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct ReadGuard {
    png_structp* png;
    png_infop* info;
    ~ReadGuard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};
  if (info == nullptr) throw DataError("png: out of memory");

  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
      throw DataError("label map must be single-channel grayscale: " + path.string());
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    const auto row_bytes = png_get_rowbytes(png, info);
    std::vector<png_byte> buffer(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = buffer.data() + r * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    InstanceMap map(static_cast<int>(width), static_cast<int>(height));
    auto labels = map.labels();
    const bool wide = depth == 16;
    for (png_uint_32 r = 0; r < height; ++r) {
      const png_byte* row = rows[r];
      for (png_uint_32 c = 0; c < width; ++c) {
        labels[static_cast<std::size_t>(r) * width + c] =
            wide ? static_cast<InstanceId>((row[2 * c] << 8) | row[2 * c + 1])
                 : static_cast<InstanceId>(row[c]);
      }
    }
    return map;
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

void write_label_png(const std::filesystem::path& path, const InstanceMap& map) {
  for (auto id : map.labels()) {
    if (id > kMaxStoredId) {
      throw DataError("instance id " + std::to_string(id) +
                      " exceeds the 16-bit label map limit of 65535");
    }
  }
  if (map.width() == 0 || map.height() == 0) {
    throw DataError("cannot write an empty label map to " + path.string());
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            png_error_handler, png_warning_handler);
  if (png == nullptr) throw DataError("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct WriteGuard {
    png_structp* png;
    png_infop* info;
    ~WriteGuard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};
  if (info == nullptr) throw DataError("png: out of memory");

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(map.width()),
               static_cast<png_uint_32>(map.height()), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<std::size_t>(map.width()) * 2);
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      const auto id = map.at(r, c);
      row[2 * c] = static_cast<png_byte>(id >> 8);
      row[2 * c + 1] = static_cast<png_byte>(id & 0xFF);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  if (std::fflush(file.get()) != 0) throw DataError("write failed: " + path.string());
}

}  // namespace nucleval
