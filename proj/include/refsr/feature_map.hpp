#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "refsr/error.hpp"

namespace refsr {

namespace detail {

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return 0;
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  return static_cast<std::size_t>(i > last ? last : i);
}

}  // namespace detail

/// C x H x W grid of reals stored as C contiguous row-major planes.
///
/// Used for images, handcrafted features and warped references alike.
/// Constructors reject non-finite values; element accessors do not re-check.
class FeatureMap {
 public:
  FeatureMap() = default;

  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width),
        data_(checked_size(channels, height, width), fill) {
    if (!std::isfinite(fill)) throw ParameterError("FeatureMap: non-finite fill value");
  }

  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != checked_size(channels, height, width)) {
      throw GeometryError("FeatureMap: data length " + std::to_string(data_.size()) +
                          " does not match " + dims_string());
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw ParameterError("FeatureMap: non-finite value");
    }
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }
  double& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<const double> plane(std::size_t c) const noexcept {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<double> plane(std::size_t c) noexcept {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool same_dims(const FeatureMap& o) const noexcept {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }
  bool same_spatial(const FeatureMap& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_;
  }

  std::string dims_string() const {
    return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  static std::size_t checked_size(std::size_t c, std::size_t h, std::size_t w) {
    if (c == 0 || h == 0 || w == 0) throw GeometryError("FeatureMap: dimensions must be positive");
    return c * h * w;
  }

  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Wide/tele geometry: the full image is d times the center crop in each axis
/// and the crop sits exactly in the middle.
struct ImageGeometry {
  std::size_t zoom = 2;
  std::size_t full_h = 0;
  std::size_t full_w = 0;
  std::size_t center_h = 0;
  std::size_t center_w = 0;
  std::size_t offset_row = 0;
  std::size_t offset_col = 0;

  /// Output (super-resolved) dims are zoom x full dims.
  std::size_t out_h() const noexcept { return zoom * full_h; }
  std::size_t out_w() const noexcept { return zoom * full_w; }

  static ImageGeometry make(std::size_t zoom, std::size_t full_h, std::size_t full_w) {
    if (zoom < 1) throw ParameterError("ImageGeometry: zoom must be >= 1");
    if (full_h == 0 || full_w == 0) throw GeometryError("ImageGeometry: empty image");
    if (full_h % zoom != 0 || full_w % zoom != 0) {
      throw GeometryError("ImageGeometry: " + std::to_string(full_h) + "x" + std::to_string(full_w) +
                          " is not divisible by zoom " + std::to_string(zoom));
    }
    ImageGeometry g;
    g.zoom = zoom;
    g.full_h = full_h;
    g.full_w = full_w;
    g.center_h = full_h / zoom;
    g.center_w = full_w / zoom;
    if ((full_h - g.center_h) % 2 != 0 || (full_w - g.center_w) % 2 != 0) {
      throw GeometryError("ImageGeometry: center crop cannot be centered on an integer offset");
    }
    g.offset_row = (full_h - g.center_h) / 2;
    g.offset_col = (full_w - g.center_w) / 2;
    return g;
  }

  friend bool operator==(const ImageGeometry&, const ImageGeometry&) = default;
};

/// Copies an arbitrary window; the window must lie inside the map.
inline FeatureMap crop(const FeatureMap& img, std::size_t row, std::size_t col, std::size_t h,
                       std::size_t w) {
  if (h == 0 || w == 0 || row + h > img.height() || col + w > img.width()) {
    throw GeometryError("crop: window outside " + img.dims_string());
  }
  FeatureMap out(img.channels(), h, w);
  for (std::size_t c = 0; c < img.channels(); ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, row + y, col + x);
    }
  }
  return out;
}

inline FeatureMap crop_center(const FeatureMap& img, const ImageGeometry& geom) {
  if (img.height() != geom.full_h || img.width() != geom.full_w) {
    throw GeometryError("crop_center: image " + img.dims_string() + " does not match geometry " +
                        std::to_string(geom.full_h) + "x" + std::to_string(geom.full_w));
  }
  return crop(img, geom.offset_row, geom.offset_col, geom.center_h, geom.center_w);
}

/// Rec.601 luma for RGB input; single-channel input is returned as-is.
inline FeatureMap luminance(const FeatureMap& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) {
    throw GeometryError("luminance: expected 1 or 3 channels, got " + img.dims_string());
  }
  FeatureMap out(1, img.height(), img.width());
  auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto dst = out.plane(0);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

/// Exact d x d box downsample; trailing rows/cols that do not fill a block are dropped.
inline FeatureMap box_downsample(const FeatureMap& img, std::size_t factor) {
  if (factor == 0 || img.height() < factor || img.width() < factor) {
    throw GeometryError("box_downsample: factor larger than " + img.dims_string());
  }
  const std::size_t h = img.height() / factor, w = img.width() / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  FeatureMap out(img.channels(), h, w);
  for (std::size_t c = 0; c < img.channels(); ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (std::size_t dy = 0; dy < factor; ++dy) {
          for (std::size_t dx = 0; dx < factor; ++dx) s += img.at(c, y * factor + dy, x * factor + dx);
        }
        out.at(c, y, x) = s * inv;
      }
    }
  }
  return out;
}

}  // namespace refsr
