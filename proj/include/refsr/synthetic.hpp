#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>

#include "refsr/feature_map.hpp"

namespace refsr::synth {

/// Periodic texture: one random tile of the given period repeated over the canvas.
/// Values lie in [0.1, 0.9].
inline FeatureMap tiled_texture(std::size_t h, std::size_t w, std::size_t channels, std::size_t period,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  FeatureMap tile(channels, period, period);
  for (double& v : tile.data()) v = u(rng);
  FeatureMap out(channels, h, w);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = tile.at(c, y % period, x % period);
    }
  }
  return out;
}

/// Self-similar texture: a sum of oriented gratings with random phases plus a
/// periodic random tile, so many regions look alike without being exact copies.
inline FeatureMap self_similar_texture(std::size_t h, std::size_t w, std::size_t channels,
                                       std::uint64_t seed, std::size_t period = 24,
                                       double tile_weight = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> freq(0.04, 0.18);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  constexpr int kGratings = 4;
  struct Grating { double kx, ky, ph; };
  Grating g[kGratings];
  for (auto& gr : g) {
    const double f = 2.0 * std::numbers::pi * freq(rng), a = angle(rng);
    gr = {f * std::cos(a), f * std::sin(a), phase(rng)};
  }
  const FeatureMap tile = tiled_texture(h, w, channels, period, seed ^ 0x9e3779b97f4a7c15ull);
  FeatureMap out(channels, h, w);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        for (const auto& gr : g) {
          s += std::sin(gr.kx * static_cast<double>(x) + gr.ky * static_cast<double>(y) + gr.ph + 0.7 * c);
        }
        const double grating = 0.5 + 0.4 * s / kGratings;
        out.at(c, y, x) = std::clamp((1.0 - tile_weight) * grating + tile_weight * tile.at(c, y, x), 0.0, 1.0);
      }
    }
  }
  return out;
}

/// Wide/tele pair derived from a ground-truth image.
struct Scene {
  FeatureMap gt;   // zoom*H x zoom*W
  FeatureMap lr;   // H x W, box-downsampled ground truth
  FeatureMap ref;  // H x W, ground-truth center at full resolution
  ImageGeometry geom;
};

/// LR is the exact zoom-times box downsample of gt (plus optional Gaussian
/// noise); the reference is the ground-truth window covering the LR center.
inline Scene make_scene(FeatureMap gt, std::size_t zoom, double lr_noise = 0.0, std::uint64_t seed = 1) {
  Scene s;
  s.lr = box_downsample(gt, zoom);
  s.geom = ImageGeometry::make(zoom, s.lr.height(), s.lr.width());
  s.ref = crop(gt, zoom * s.geom.offset_row, zoom * s.geom.offset_col, s.geom.full_h, s.geom.full_w);
  if (lr_noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, lr_noise);
    for (double& v : s.lr.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
  }
  s.gt = std::move(gt);
  return s;
}

}  // namespace refsr::synth
