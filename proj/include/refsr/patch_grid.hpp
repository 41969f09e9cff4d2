#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"

namespace refsr {

/// Sliding-window patch view of a FeatureMap. Partial border patches are dropped.
///
/// Each patch is flattened channel-major, then row, then column, so a patch
/// vector has length channels * patch_size^2.
struct PatchGrid {
  std::size_t channels = 0;
  std::size_t src_h = 0;
  std::size_t src_w = 0;
  std::size_t patch_size = 0;
  std::size_t stride = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::size_t count() const noexcept { return rows * cols; }
  std::size_t dim() const noexcept { return channels * patch_size * patch_size; }

  std::span<const double> patch(std::size_t i) const noexcept {
    return {values.data() + i * dim(), dim()};
  }
  std::span<double> patch(std::size_t i) noexcept { return {values.data() + i * dim(), dim()}; }

  /// Builds a grid directly from vectors; used by tests and oracles.
  static PatchGrid from_vectors(std::size_t rows, std::size_t cols,
                                const std::vector<std::vector<double>>& vecs) {
    if (vecs.size() != rows * cols) throw GeometryError("PatchGrid: vector count != rows*cols");
    PatchGrid g;
    g.rows = rows;
    g.cols = cols;
    g.channels = vecs.empty() ? 0 : vecs.front().size();
    g.patch_size = 1;
    g.stride = 1;
    g.src_h = rows;
    g.src_w = cols;
    for (const auto& v : vecs) {
      if (v.size() != g.channels) throw GeometryError("PatchGrid: ragged patch vectors");
      g.values.insert(g.values.end(), v.begin(), v.end());
    }
    return g;
  }
};

inline PatchGrid patchify(const FeatureMap& f, std::size_t patch_size, std::size_t stride) {
  if (patch_size == 0) throw ParameterError("patchify: patch size must be >= 1");
  if (stride == 0) throw ParameterError("patchify: stride must be >= 1");
  if (patch_size > f.height() || patch_size > f.width()) {
    throw GeometryError("patchify: patch " + std::to_string(patch_size) + " larger than " +
                        f.dims_string());
  }
  PatchGrid g;
  g.channels = f.channels();
  g.src_h = f.height();
  g.src_w = f.width();
  g.patch_size = patch_size;
  g.stride = stride;
  g.rows = (f.height() - patch_size) / stride + 1;
  g.cols = (f.width() - patch_size) / stride + 1;
  g.values.resize(g.count() * g.dim());
  auto out = g.values.begin();
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t q = 0; q < g.cols; ++q) {
      for (std::size_t c = 0; c < f.channels(); ++c) {
        for (std::size_t y = 0; y < patch_size; ++y) {
          auto row = f.plane(c).subspan((r * stride + y) * f.width() + q * stride, patch_size);
          out = std::copy(row.begin(), row.end(), out);
        }
      }
    }
  }
  return g;
}

/// Inverse of patchify for exact non-overlapping tilings.
inline FeatureMap unpatchify(const PatchGrid& g) {
  if (g.stride != g.patch_size || g.rows * g.patch_size != g.src_h ||
      g.cols * g.patch_size != g.src_w) {
    throw GeometryError("unpatchify: grid is not an exact tiling of its source");
  }
  FeatureMap f(g.channels, g.src_h, g.src_w);
  const std::size_t p = g.patch_size;
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t q = 0; q < g.cols; ++q) {
      auto src = g.patch(r * g.cols + q).begin();
      for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t y = 0; y < p; ++y) {
          for (std::size_t x = 0; x < p; ++x) f.at(c, r * p + y, q * p + x) = *src++;
        }
      }
    }
  }
  return f;
}

}  // namespace refsr
