#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"
#include "refsr/matcher.hpp"

namespace refsr {

inline constexpr double kFusionEpsilon = 1e-6;

/// One scale's retrieved reference tiles on the output canvas.
struct ScaleCanvas {
  std::size_t scale = 1;
  FeatureMap image;               // C x dH x dW, retrieved tiles weighted by confidence
  FeatureMap retrieved;           // C x dH x dW, retrieved tiles before weighting
  FeatureMap confidence;          // 1 x dH x dW, clamped to [0, 1]
  std::vector<char> coverage;     // dH * dW, nonzero where a tile was written
};

/// Tile side in output pixels for a match at the given scale.
inline std::size_t tile_side(std::size_t patch_size, std::size_t zoom, std::size_t scale) {
  return patch_size * zoom * (std::size_t{1} << (scale - 1));
}

/// Copies the reference tile addressed by each query's key index onto the
/// output canvas and weights it by max(confidence, 0).
///
/// Key (kr, kc) at scale i addresses the v tile at (kr, kc) * p * d * 2^(i-1);
/// query (qr, qc) writes the output tile at the same multiple of its grid position.
inline ScaleCanvas reassemble_scale(const FeatureMap& v, const MatchResult& result,
                                    const ImageGeometry& geom, std::size_t patch_size) {
  if (result.scale < 1 || result.scale > kPyramidLevels) {
    throw GeometryError("reassemble_scale: scale must be 1, 2 or 3");
  }
  if (v.height() != geom.zoom * geom.center_h || v.width() != geom.zoom * geom.center_w) {
    throw GeometryError("reassemble_scale: reference " + v.dims_string() +
                        " is not zoom x the center region");
  }
  const std::size_t level = std::size_t{1} << (result.scale - 1);
  const std::size_t tile = tile_side(patch_size, geom.zoom, result.scale);
  if (result.key_rows * patch_size * level > geom.center_h ||
      result.key_cols * patch_size * level > geom.center_w) {
    throw GeometryError("reassemble_scale: key grid exceeds the center region");
  }
  if (result.rows * patch_size * level > geom.full_h || result.cols * patch_size * level > geom.full_w) {
    throw GeometryError("reassemble_scale: query grid exceeds the full image");
  }
  if (result.indices.size() != result.count() || result.confidences.size() != result.count()) {
    throw GeometryError("reassemble_scale: match maps do not match the query grid");
  }

  const std::size_t out_h = geom.out_h(), out_w = geom.out_w();
  ScaleCanvas canvas{result.scale, FeatureMap(v.channels(), out_h, out_w),
                     FeatureMap(v.channels(), out_h, out_w), FeatureMap(1, out_h, out_w),
                     std::vector<char>(out_h * out_w, 0)};
  const std::size_t nkeys = result.key_rows * result.key_cols;
  for (std::size_t j = 0; j < result.count(); ++j) {
    const std::size_t key = result.indices[j];
    if (key >= nkeys) throw GeometryError("reassemble_scale: key index out of range");
    const double weight = std::clamp(result.confidences[j], 0.0, 1.0);
    const std::size_t sy = (key / result.key_cols) * tile, sx = (key % result.key_cols) * tile;
    const std::size_t dy = (j / result.cols) * tile, dx = (j % result.cols) * tile;
    for (std::size_t c = 0; c < v.channels(); ++c) {
      for (std::size_t y = 0; y < tile; ++y) {
        for (std::size_t x = 0; x < tile; ++x) {
          const double value = v.at(c, sy + y, sx + x);
          canvas.retrieved.at(c, dy + y, dx + x) = value;
          canvas.image.at(c, dy + y, dx + x) = weight * value;
        }
      }
    }
    for (std::size_t y = 0; y < tile; ++y) {
      for (std::size_t x = 0; x < tile; ++x) {
        canvas.confidence.at(0, dy + y, dx + x) = weight;
        canvas.coverage[(dy + y) * out_w + dx + x] = 1;
      }
    }
  }
  return canvas;
}

struct FusedReference {
  FeatureMap image;       // R
  FeatureMap confidence;  // fused confidence, max over scales
};

/// Per-pixel confidence-weighted average of the retrieved tiles with weights
/// confidence + 1e-6. The average runs over the unweighted tiles: confidence
/// enters the output once, through the fused confidence used by the blend.
/// Evaluated as an offset from the most confident canvas so that identical
/// canvases fuse to themselves exactly.
inline FusedReference fuse_scales(std::span<const ScaleCanvas> canvases) {
  if (canvases.empty()) throw ParameterError("fuse_scales: no canvases");
  const FeatureMap& first = canvases.front().retrieved;
  for (const auto& c : canvases) {
    if (!c.retrieved.same_dims(first) || !c.confidence.same_spatial(first) || c.confidence.channels() != 1) {
      throw GeometryError("fuse_scales: canvases differ in dimensions");
    }
  }
  const std::size_t n = canvases.size(), plane = first.plane_size();
  FusedReference out{FeatureMap(first.channels(), first.height(), first.width()),
                     FeatureMap(1, first.height(), first.width())};
  std::vector<double> w(n);
  for (std::size_t p = 0; p < plane; ++p) {
    double wsum = 0.0, cmax = 0.0;
    std::size_t base = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ci = canvases[i].confidence.data()[p];
      w[i] = ci + kFusionEpsilon;
      wsum += w[i];
      if (w[i] > w[base]) base = i;
      cmax = std::max(cmax, ci);
    }
    out.confidence.data()[p] = cmax;
    for (std::size_t c = 0; c < first.channels(); ++c) {
      const double ref = canvases[base].retrieved.plane(c)[p];
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += w[i] * (canvases[i].retrieved.plane(c)[p] - ref);
      out.image.plane(c)[p] = ref + acc / wsum;
    }
  }
  return out;
}

/// Composes the final image on the zoom x full canvas.
///
/// Outside the center region: (1 - alpha * conf) * lr_up + alpha * conf * R.
/// Inside: the warped reference, cross-faded into the outside rule over a band
/// of `feather` pixels along the center boundary. Output is clamped to [0, 1].
inline FeatureMap blend_output(const FeatureMap& lr_up, const FeatureMap& v_img, const FeatureMap& fused,
                               const FeatureMap& confidence, const ImageGeometry& geom, double alpha,
                               std::size_t feather) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("blend_output: alpha must lie in [0, 1]");
  const std::size_t out_h = geom.out_h(), out_w = geom.out_w();
  if (lr_up.height() != out_h || lr_up.width() != out_w || !fused.same_dims(lr_up) ||
      !confidence.same_spatial(lr_up) || confidence.channels() != 1) {
    throw GeometryError("blend_output: base, fused reference and confidence must be " +
                        std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const std::size_t ch = geom.zoom * geom.center_h, cw = geom.zoom * geom.center_w;
  if (v_img.height() != ch || v_img.width() != cw || v_img.channels() != lr_up.channels()) {
    throw GeometryError("blend_output: reference " + v_img.dims_string() +
                        " must cover the center output region");
  }
  const std::size_t y0 = geom.zoom * geom.offset_row, x0 = geom.zoom * geom.offset_col;

  FeatureMap out(lr_up.channels(), out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      const double a = alpha * confidence.at(0, y, x);
      const bool in_center = y >= y0 && y < y0 + ch && x >= x0 && x < x0 + cw;
      std::size_t dist = 0;
      if (in_center) {
        dist = std::min({y - y0, y0 + ch - 1 - y, x - x0, x0 + cw - 1 - x});
      }
      for (std::size_t c = 0; c < out.channels(); ++c) {
        const double corner = (1.0 - a) * lr_up.at(c, y, x) + a * fused.at(c, y, x);
        double value = corner;
        if (in_center) {
          const double ref = v_img.at(c, y - y0, x - x0);
          if (dist >= feather) {
            value = ref;
          } else {
            const double wc = static_cast<double>(dist + 1) / static_cast<double>(feather + 1);
            value = wc * ref + (1.0 - wc) * corner;
          }
        }
        out.at(c, y, x) = std::clamp(value, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace refsr
