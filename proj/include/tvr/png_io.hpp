#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include "tvr/error.hpp"
#include "tvr/image.hpp"

namespace tvr {

/// Writes bytes to a sibling temporary file and renames it into place, so a
/// reader never observes a partially written artifact.
inline void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(detail::concat("cannot open ", tmp.string(), " for writing"));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(detail::concat("short write to ", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(detail::concat("cannot move ", tmp.string(), " to ", path.string()));
  }
}

inline void atomic_write(const std::filesystem::path& path, const std::string& text) {
  atomic_write(path, std::span<const std::uint8_t>(
                         reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// Interleaved 8-bit RGB raster as produced and consumed by libpng.
struct Rgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

namespace detail {

inline Rgb8 finish_png_read(png_image& image, const std::string& origin) {
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw IoError(concat(origin, ": PNG has an alpha channel; only 8-bit RGB is accepted"));
  }
  if (!(image.format & PNG_FORMAT_FLAG_COLOR)) {
    png_image_free(&image);
    throw IoError(concat(origin, ": PNG is grayscale; only 8-bit RGB is accepted"));
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw IoError(concat(origin, ": PNG has 16-bit samples; only 8-bit RGB is accepted"));
  }
  image.format = PNG_FORMAT_RGB;
  Rgb8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(concat(origin, ": ", msg));
  }
  return out;
}

}  // namespace detail

inline Rgb8 read_rgb8(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError(detail::concat(path.string(), ": ", image.message));
  }
  return detail::finish_png_read(image, path.string());
}

inline Rgb8 decode_rgb8(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(detail::concat("<memory>: ", image.message));
  }
  return detail::finish_png_read(image, "<memory>");
}

inline std::vector<std::uint8_t> encode_rgb8(const Rgb8& raster) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, raster.pixels.data(), 0, nullptr)) {
    throw IoError(detail::concat("PNG encoding failed: ", image.message));
  }
  std::vector<std::uint8_t> bytes(size);
  if (!png_image_write_to_memory(&image, bytes.data(), &size, 0, raster.pixels.data(), 0,
                                 nullptr)) {
    throw IoError(detail::concat("PNG encoding failed: ", image.message));
  }
  bytes.resize(size);
  return bytes;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v * 255.0), 0.0, 255.0));
}

/// Maps an 8-bit raster to unit-interval intensities via v / 255.
inline ImageTensor to_image(const Rgb8& raster) {
  if (raster.width != raster.height) {
    throw ShapeError(detail::concat("image is ", raster.width, "x", raster.height,
                                    "; only square images are supported"));
  }
  const int n = raster.width;
  std::vector<double> data(static_cast<std::size_t>(kChannels) * n * n);
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col)
      for (int c = 0; c < kChannels; ++c)
        data[(static_cast<std::size_t>(c) * n + r) * n + col] =
            raster.pixels[(static_cast<std::size_t>(r) * n + col) * kChannels + c] / 255.0;
  return ImageTensor(n, std::move(data));
}

inline Rgb8 to_rgb8(const ImageTensor& x) {
  const int n = x.side();
  Rgb8 out{n, n, std::vector<std::uint8_t>(static_cast<std::size_t>(kChannels) * n * n)};
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col)
      for (int c = 0; c < kChannels; ++c)
        out.pixels[(static_cast<std::size_t>(r) * n + col) * kChannels + c] = to_byte(x(c, r, col));
  return out;
}

/// Mask entries written as 0 or 255 per channel.
inline Rgb8 to_rgb8(const Mask& m) {
  const int n = m.side();
  Rgb8 out{n, n, std::vector<std::uint8_t>(static_cast<std::size_t>(kChannels) * n * n)};
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col)
      for (int c = 0; c < kChannels; ++c)
        out.pixels[(static_cast<std::size_t>(r) * n + col) * kChannels + c] =
            m(c, r, col) ? 255 : 0;
  return out;
}

inline ImageTensor read_png(const std::filesystem::path& path) {
  return to_image(read_rgb8(path));
}

inline void write_png(const std::filesystem::path& path, const ImageTensor& x) {
  atomic_write(path, encode_rgb8(to_rgb8(x)));
}

inline void write_png(const std::filesystem::path& path, const Mask& m) {
  atomic_write(path, encode_rgb8(to_rgb8(m)));
}

}  // namespace tvr
