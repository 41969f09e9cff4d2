#pragma once

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"

namespace refsr {

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

namespace detail {

inline void put_u32le(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32le(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

inline void put_f32le(Bytes& out, float f) { put_u32le(out, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32le(std::span<const std::uint8_t> b, std::size_t at) {
  return std::bit_cast<float>(get_u32le(b, at));
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Netpbm header token reader; skips whitespace and '#' comments.
class PnmCursor {
 public:
  explicit PnmCursor(std::span<const std::uint8_t> b) : b_(b) {}

  unsigned long next_uint() {
    skip_space();
    if (pos_ >= b_.size() || b_[pos_] < '0' || b_[pos_] > '9') {
      throw FormatError("netpbm: truncated or malformed header");
    }
    unsigned long v = 0;
    while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > (1ul << 24)) throw FormatError("netpbm: header value too large");
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw FormatError("netpbm: truncated header");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 2;
};

}  // namespace detail

/// Decodes binary PGM (P5) or PPM (P6) with maxval <= 255 into [0,1] values.
inline FeatureMap decode_netpbm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("netpbm: unknown magic");
  }
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  detail::PnmCursor cur(bytes);
  const auto w = cur.next_uint();
  const auto h = cur.next_uint();
  const auto maxval = cur.next_uint();
  if (w == 0 || h == 0) throw FormatError("netpbm: zero dimension");
  if (maxval == 0 || maxval > 255) throw FormatError("netpbm: only 8-bit rasters are supported");
  const std::size_t start = cur.raster_start();
  const std::size_t n = channels * w * h;
  if (bytes.size() < start + n) throw FormatError("netpbm: truncated raster");

  FeatureMap f(channels, h, w);
  const double scale = static_cast<double>(maxval);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        f.at(c, y, x) = bytes[start + (y * w + x) * channels + c] / scale;
      }
    }
  }
  return f;
}

/// Canonical header "P5\n<w> <h>\n255\n" (P6 for three channels).
inline Bytes encode_netpbm(const FeatureMap& f) {
  if (f.channels() != 1 && f.channels() != 3) {
    throw GeometryError("netpbm: need 1 or 3 channels, got " + f.dims_string());
  }
  const std::string header = std::string(f.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + f.size());
  for (std::size_t y = 0; y < f.height(); ++y) {
    for (std::size_t x = 0; x < f.width(); ++x) {
      for (std::size_t c = 0; c < f.channels(); ++c) out.push_back(detail::to_byte(f.at(c, y, x)));
    }
  }
  return out;
}

inline FeatureMap decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(std::string("png: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = color ? 3 : 1;
  Bytes buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("png: " + msg);
  }
  FeatureMap f(channels, image.height, image.width);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        f.at(c, y, x) = buf[(y * image.width + x) * channels + c] / 255.0;
      }
    }
  }
  return f;
}

inline void save_png(const FeatureMap& f, const std::filesystem::path& path) {
  if (f.channels() != 1 && f.channels() != 3) {
    throw GeometryError("png: need 1 or 3 channels, got " + f.dims_string());
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(f.width());
  image.height = static_cast<png_uint_32>(f.height());
  image.format = f.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Bytes buf;
  buf.reserve(f.size());
  for (std::size_t y = 0; y < f.height(); ++y) {
    for (std::size_t x = 0; x < f.width(); ++x) {
      for (std::size_t c = 0; c < f.channels(); ++c) buf.push_back(detail::to_byte(f.at(c, y, x)));
    }
  }
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw FormatError("png: cannot write " + path.string() + ": " + image.message);
  }
}

/// Loads PNG (8-bit gray or RGB; alpha and palettes are flattened by libpng)
/// or binary PGM/PPM, chosen by magic bytes. Values land in [0,1].
inline FeatureMap load_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_netpbm(bytes);
  throw FormatError(path.string() + ": unknown image magic");
}

/// Writes by extension: .png, otherwise binary PGM/PPM by channel count.
inline void save_image(const FeatureMap& f, const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") {
    save_png(f, path);
    return;
  }
  if ((ext == ".pgm" && f.channels() != 1) || (ext == ".ppm" && f.channels() != 3)) {
    throw GeometryError("save_image: " + ext + " does not fit a " + f.dims_string() + " map");
  }
  write_file(path, encode_netpbm(f));
}

// FMAP: "FMAP", u32 C, u32 H, u32 W (little-endian), then C*H*W float32 LE.

inline Bytes encode_feature(const FeatureMap& f) {
  Bytes out{'F', 'M', 'A', 'P'};
  out.reserve(16 + 4 * f.size());
  detail::put_u32le(out, static_cast<std::uint32_t>(f.channels()));
  detail::put_u32le(out, static_cast<std::uint32_t>(f.height()));
  detail::put_u32le(out, static_cast<std::uint32_t>(f.width()));
  for (double v : f.data()) detail::put_f32le(out, static_cast<float>(v));
  return out;
}

inline FeatureMap decode_feature(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "FMAP", 4) != 0) {
    throw FormatError("fmap: bad magic or truncated header");
  }
  const std::uint64_t c = detail::get_u32le(bytes, 4);
  const std::uint64_t h = detail::get_u32le(bytes, 8);
  const std::uint64_t w = detail::get_u32le(bytes, 12);
  const std::uint64_t n = c * h * w;
  if (n == 0 || bytes.size() - 16 != 4 * n) {
    throw FormatError("fmap: payload of " + std::to_string(bytes.size() - 16) +
                      " bytes does not match header " + std::to_string(c) + "x" +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = detail::get_f32le(bytes, 16 + 4 * i);
  try {
    return FeatureMap(c, h, w, std::move(data));
  } catch (const Error& e) {
    throw FormatError(std::string("fmap: ") + e.what());
  }
}

inline void dump_feature(const FeatureMap& f, const std::filesystem::path& path) {
  write_file(path, encode_feature(f));
}

inline FeatureMap load_feature(const std::filesystem::path& path) { return decode_feature(read_file(path)); }

}  // namespace refsr
