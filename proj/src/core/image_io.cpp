// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#include "core/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "core/error.hpp"

namespace matsod {

Image read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    fail(ErrorKind::kIo, "cannot read PNG " + path + ": " + png.message);
  }
  const bool colour = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = colour ? 3 : 1;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorKind::kIo, "cannot decode PNG " + path + ": " + msg);
  }
  Image out(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = buffer[i] / 255.0;
  return out;
}

void write_png(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    fail(ErrorKind::kShape, "write_png: unsupported channel count " + std::to_string(image.channels));
  }
  std::vector<png_byte> buffer(image.data.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const double v = std::clamp(image.data[i], 0.0, 1.0);
    buffer[i] = static_cast<png_byte>(std::lround(v * 255.0));
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    fail(ErrorKind::kIo, "cannot write PNG " + path + ": " + png.message);
  }
}

}  // namespace matsod
