#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>

#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"

namespace refsr {

inline constexpr std::size_t kPyramidLevels = 3;
inline constexpr std::size_t kFeatureChannels = 4;
inline constexpr std::size_t kMinFeatureSide = 8;
inline constexpr double kVarianceFloor = 1e-8;

/// Matching features at relative scales 1, 1/2, 1/4.
///
/// Channels per pixel: luminance, horizontal gradient, vertical gradient and
/// 3x3 local standard deviation of the luminance.
struct FeaturePyramid {
  std::array<FeatureMap, kPyramidLevels> levels;

  const FeatureMap& operator[](std::size_t i) const { return levels[i]; }
  std::size_t channels() const { return levels[0].channels(); }

  friend bool operator==(const FeaturePyramid&, const FeaturePyramid&) = default;
};

/// Per-level, per-channel mean and standard deviation used for standardization.
struct PyramidStats {
  std::array<std::array<double, kFeatureChannels>, kPyramidLevels> mean{};
  std::array<std::array<double, kFeatureChannels>, kPyramidLevels> stddev{};
};

namespace detail {

// Central differences in the interior, one-sided at the borders.
inline double gradient_at(const double* line, std::size_t i, std::size_t n, std::size_t step) {
  if (n == 1) return 0.0;
  if (i == 0) return line[step] - line[0];
  if (i == n - 1) return line[i * step] - line[(i - 1) * step];
  return 0.5 * (line[(i + 1) * step] - line[(i - 1) * step]);
}

}  // namespace detail

/// Unstandardized 4-channel features of one image at a single scale.
inline FeatureMap raw_features(const FeatureMap& img) {
  const FeatureMap lum = luminance(img);
  const std::size_t h = lum.height(), w = lum.width();
  const double* L = lum.plane(0).data();
  FeatureMap out(kFeatureChannels, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double center = L[y * w + x];
      out.at(0, y, x) = center;
      out.at(1, y, x) = detail::gradient_at(L + y * w, x, w, 1);
      out.at(2, y, x) = detail::gradient_at(L + x, y, h, w);
      // Shifted two-pass moments around the center value; exact zero on flat regions.
      double s = 0.0, s2 = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const std::size_t yy = detail::clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
        for (int dx = -1; dx <= 1; ++dx) {
          const std::size_t xx = detail::clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w);
          const double d = L[yy * w + xx] - center;
          s += d;
          s2 += d * d;
        }
      }
      const double m = s / 9.0;
      out.at(3, y, x) = std::sqrt(std::max(0.0, s2 / 9.0 - m * m));
    }
  }
  return out;
}

/// Raw features at the three dyadic scales; each level box-downsamples the image once more.
inline std::array<FeatureMap, kPyramidLevels> raw_pyramid(const FeatureMap& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw GeometryError("extract_pyramid: expected 1 or 3 channels, got " + img.dims_string());
  }
  if (img.height() < kMinFeatureSide || img.width() < kMinFeatureSide) {
    throw GeometryError("extract_pyramid: image " + img.dims_string() + " smaller than 8x8");
  }
  std::array<FeatureMap, kPyramidLevels> raw;
  FeatureMap level = img;
  for (std::size_t i = 0; i < kPyramidLevels; ++i) {
    if (i > 0) level = box_downsample(level, 2);
    raw[i] = raw_features(level);
  }
  return raw;
}

inline PyramidStats pyramid_stats(const std::array<FeatureMap, kPyramidLevels>& raw) {
  PyramidStats st;
  for (std::size_t i = 0; i < kPyramidLevels; ++i) {
    for (std::size_t c = 0; c < kFeatureChannels; ++c) {
      const auto plane = raw[i].plane(c);
      const auto n = static_cast<double>(plane.size());
      double sum = 0.0;
      for (double v : plane) sum += v;
      const double mean = sum / n;
      double ss = 0.0;
      for (double v : plane) ss += (v - mean) * (v - mean);
      st.mean[i][c] = mean;
      st.stddev[i][c] = std::sqrt(std::max(ss / n, kVarianceFloor));
    }
  }
  return st;
}

inline FeaturePyramid standardize(std::array<FeatureMap, kPyramidLevels> raw, const PyramidStats& st) {
  FeaturePyramid p;
  for (std::size_t i = 0; i < kPyramidLevels; ++i) {
    for (std::size_t c = 0; c < kFeatureChannels; ++c) {
      const double mean = st.mean[i][c], inv = 1.0 / st.stddev[i][c];
      for (double& v : raw[i].plane(c)) v = (v - mean) * inv;
    }
    p.levels[i] = std::move(raw[i]);
  }
  return p;
}

/// Standardized pyramid using the image's own statistics.
inline FeaturePyramid extract_pyramid(const FeatureMap& img) {
  auto raw = raw_pyramid(img);
  const auto st = pyramid_stats(raw);
  return standardize(std::move(raw), st);
}

struct QueryKeyPyramids {
  FeaturePyramid query;
  FeaturePyramid key;
};

/// Query features from the wide image and key features from its center crop.
/// Both go through the same extractor and the key side reuses the query
/// statistics, so identical content yields identical features.
inline QueryKeyPyramids extract_pair(const FeatureMap& lr, const FeatureMap& lrc) {
  auto raw_q = raw_pyramid(lr);
  auto raw_k = raw_pyramid(lrc);
  const auto st = pyramid_stats(raw_q);
  return {standardize(std::move(raw_q), st), standardize(std::move(raw_k), st)};
}

}  // namespace refsr
