#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"

namespace refsr {

enum class Interp { kNearest, kBilinear, kBicubic };

inline Interp parse_interp(std::string_view s) {
  if (s == "nearest") return Interp::kNearest;
  if (s == "bilinear") return Interp::kBilinear;
  if (s == "bicubic") return Interp::kBicubic;
  throw ParameterError("unknown interpolation mode: " + std::string(s));
}

namespace detail {

// Keys cubic convolution kernel, a = -0.5.
inline double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

/// Per-output-sample taps along one axis. Samples are expressed as
/// base + sum w_k (src[idx_k] - base) so that constants pass through exactly.
struct Taps {
  std::size_t base = 0;
  int n = 0;
  std::array<std::size_t, 4> idx{};
  std::array<double, 4> w{};
};

inline std::vector<Taps> make_taps(std::size_t in, std::size_t out, Interp mode) {
  std::vector<Taps> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    Taps& t = taps[i];
    const double pos = (static_cast<double>(i) + 0.5) * scale;
    if (mode == Interp::kNearest) {
      t.base = std::min(static_cast<std::size_t>(std::floor(pos)), in - 1);
      continue;
    }
    const double src = pos - 0.5;
    const auto x0 = static_cast<std::ptrdiff_t>(std::floor(src));
    const double frac = src - static_cast<double>(x0);
    if (mode == Interp::kBilinear) {
      t.base = clamp_index(x0, in);
      t.n = 1;
      t.idx[0] = clamp_index(x0 + 1, in);
      t.w[0] = frac;
    } else {
      t.base = clamp_index(x0, in);
      t.n = 4;
      for (int k = 0; k < 4; ++k) {
        t.idx[k] = clamp_index(x0 - 1 + k, in);
        t.w[k] = cubic_weight(frac - static_cast<double>(k - 1));
      }
    }
  }
  return taps;
}

inline double apply(const Taps& t, const double* line, std::size_t step) {
  const double base = line[t.base * step];
  double acc = 0.0;
  for (int k = 0; k < t.n; ++k) acc += t.w[k] * (line[t.idx[k] * step] - base);
  return base + acc;
}

}  // namespace detail

/// Separable resampling with half-pixel center alignment and edge clamping.
inline FeatureMap resize(const FeatureMap& f, std::size_t new_h, std::size_t new_w, Interp mode) {
  if (new_h == 0 || new_w == 0) throw GeometryError("resize: target dims must be >= 1");
  if (new_h == f.height() && new_w == f.width()) return f;
  const auto tx = detail::make_taps(f.width(), new_w, mode);
  const auto ty = detail::make_taps(f.height(), new_h, mode);
  FeatureMap tmp(f.channels(), f.height(), new_w);
  for (std::size_t c = 0; c < f.channels(); ++c) {
    for (std::size_t y = 0; y < f.height(); ++y) {
      const double* line = f.plane(c).data() + y * f.width();
      for (std::size_t x = 0; x < new_w; ++x) tmp.at(c, y, x) = detail::apply(tx[x], line, 1);
    }
  }
  FeatureMap out(f.channels(), new_h, new_w);
  for (std::size_t c = 0; c < f.channels(); ++c) {
    const double* col0 = tmp.plane(c).data();
    for (std::size_t y = 0; y < new_h; ++y) {
      for (std::size_t x = 0; x < new_w; ++x) out.at(c, y, x) = detail::apply(ty[y], col0 + x, new_w);
    }
  }
  return out;
}

/// Clamps every value into [lo, hi].
inline FeatureMap clamp_values(FeatureMap f, double lo = 0.0, double hi = 1.0) {
  for (double& v : f.data()) v = std::clamp(v, lo, hi);
  return f;
}

}  // namespace refsr
