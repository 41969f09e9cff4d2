#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"
#include "refsr/image_io.hpp"
#include "refsr/resample.hpp"

namespace refsr {

/// Dense per-pixel displacement. Channel 0 holds u (x displacement), channel 1 holds v.
struct FlowField {
  FeatureMap uv;

  FlowField() = default;
  explicit FlowField(FeatureMap planes) : uv(std::move(planes)) {
    if (uv.channels() != 2) throw GeometryError("FlowField: expected 2 planes, got " + uv.dims_string());
  }
  FlowField(std::size_t height, std::size_t width, double u = 0.0, double v = 0.0)
      : uv(2, height, width) {
    std::fill(uv.plane(0).begin(), uv.plane(0).end(), u);
    std::fill(uv.plane(1).begin(), uv.plane(1).end(), v);
  }

  std::size_t height() const noexcept { return uv.height(); }
  std::size_t width() const noexcept { return uv.width(); }
  double u(std::size_t y, std::size_t x) const noexcept { return uv.at(0, y, x); }
  double v(std::size_t y, std::size_t x) const noexcept { return uv.at(1, y, x); }

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

/// Bilinear upsampling of both planes by an integer factor; displacements scale with it.
inline FlowField upsample_flow(const FlowField& flow, std::size_t factor) {
  if (factor < 1) throw ParameterError("upsample_flow: factor must be >= 1");
  if (factor == 1) return flow;
  FeatureMap up = resize(flow.uv, flow.height() * factor, flow.width() * factor, Interp::kBilinear);
  const auto k = static_cast<double>(factor);
  for (double& d : up.data()) d *= k;
  return FlowField(std::move(up));
}

/// Backward bilinear warp: out(x, y) = f(x + u, y + v), sampling clamped to the border.
inline FeatureMap warp(const FeatureMap& f, const FlowField& flow) {
  if (flow.height() != f.height() || flow.width() != f.width()) {
    throw GeometryError("warp: flow " + flow.uv.dims_string() + " does not match " + f.dims_string());
  }
  const std::size_t h = f.height(), w = f.width();
  const double max_x = static_cast<double>(w - 1), max_y = static_cast<double>(h - 1);
  FeatureMap out(f.channels(), h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double sx = std::clamp(static_cast<double>(x) + flow.u(y, x), 0.0, max_x);
      const double sy = std::clamp(static_cast<double>(y) + flow.v(y, x), 0.0, max_y);
      const auto x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
      const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      for (std::size_t c = 0; c < f.channels(); ++c) {
        const double a = f.at(c, y0, x0), b = f.at(c, y0, x1);
        const double cc = f.at(c, y1, x0), d = f.at(c, y1, x1);
        const double top = a + fx * (b - a);
        const double bot = cc + fx * (d - cc);
        out.at(c, y, x) = top + fy * (bot - top);
      }
    }
  }
  return out;
}

/// Mean squared difference between a(x, y) and b(x + u, y + v) over their overlap.
inline double shifted_mse(const FeatureMap& a, const FeatureMap& b, int u, int v) {
  const auto h = static_cast<std::ptrdiff_t>(a.height()), w = static_cast<std::ptrdiff_t>(a.width());
  const std::ptrdiff_t y_lo = std::max<std::ptrdiff_t>(0, -v), y_hi = std::min(h, h - v);
  const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -u), x_hi = std::min(w, w - u);
  double sum = 0.0;
  for (std::ptrdiff_t y = y_lo; y < y_hi; ++y) {
    const double* ra = a.plane(0).data() + y * w;
    const double* rb = b.plane(0).data() + (y + v) * w + u;
    for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) {
      const double d = ra[x] - rb[x];
      sum += d * d;
    }
  }
  return sum / static_cast<double>((y_hi - y_lo) * (x_hi - x_lo));
}

/// Exhaustive integer translation search standing in for a learned flow network.
///
/// Returns the constant flow (u, v) minimizing shifted_mse(a, b, u, v), so that
/// warp(b, flow) lines b up with a. Ties go to the smallest |u|+|v|, then the
/// smallest v, then the smallest u.
inline FlowField estimate_translation(const FeatureMap& a, const FeatureMap& b, std::size_t radius) {
  if (!a.same_dims(b)) {
    throw GeometryError("estimate_translation: " + a.dims_string() + " vs " + b.dims_string());
  }
  if (a.channels() != 1) throw GeometryError("estimate_translation: expected single-channel inputs");
  if (2 * radius >= std::min(a.height(), a.width())) {
    throw ParameterError("estimate_translation: radius " + std::to_string(radius) +
                         " must be below half the image side");
  }
  const int r = static_cast<int>(radius);
  double best = std::numeric_limits<double>::infinity();
  int best_u = 0, best_v = 0;
  auto better_tie = [](int u, int v, int bu, int bv) {
    const int l1 = std::abs(u) + std::abs(v), bl1 = std::abs(bu) + std::abs(bv);
    if (l1 != bl1) return l1 < bl1;
    if (v != bv) return v < bv;
    return u < bu;
  };
  for (int v = -r; v <= r; ++v) {
    for (int u = -r; u <= r; ++u) {
      const double e = shifted_mse(a, b, u, v);
      if (e < best || (e == best && better_tie(u, v, best_u, best_v))) {
        best = e;
        best_u = u;
        best_v = v;
      }
    }
  }
  return FlowField(a.height(), a.width(), best_u, best_v);
}

// Middlebury .flo: f32 202021.25, i32 width, i32 height, then interleaved (u, v) f32, all LE.
inline constexpr float kFloMagic = 202021.25f;

inline Bytes encode_flo(const FlowField& flow) {
  Bytes out;
  out.reserve(12 + 8 * flow.height() * flow.width());
  detail::put_f32le(out, kFloMagic);
  detail::put_u32le(out, static_cast<std::uint32_t>(flow.width()));
  detail::put_u32le(out, static_cast<std::uint32_t>(flow.height()));
  for (std::size_t y = 0; y < flow.height(); ++y) {
    for (std::size_t x = 0; x < flow.width(); ++x) {
      detail::put_f32le(out, static_cast<float>(flow.u(y, x)));
      detail::put_f32le(out, static_cast<float>(flow.v(y, x)));
    }
  }
  return out;
}

inline FlowField decode_flo(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("flo: truncated header");
  if (detail::get_f32le(bytes, 0) != kFloMagic) throw FormatError("flo: bad magic");
  const auto w = static_cast<std::int32_t>(detail::get_u32le(bytes, 4));
  const auto h = static_cast<std::int32_t>(detail::get_u32le(bytes, 8));
  if (w <= 0 || h <= 0) throw FormatError("flo: non-positive dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() != 12 + 8 * n) throw FormatError("flo: payload size does not match header");
  FeatureMap uv(2, static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  for (std::size_t i = 0; i < n; ++i) {
    const float u = detail::get_f32le(bytes, 12 + 8 * i);
    const float v = detail::get_f32le(bytes, 16 + 8 * i);
    if (!std::isfinite(u) || !std::isfinite(v)) throw FormatError("flo: non-finite displacement");
    uv.plane(0)[i] = u;
    uv.plane(1)[i] = v;
  }
  return FlowField(std::move(uv));
}

inline void save_flo(const FlowField& flow, const std::filesystem::path& path) {
  write_file(path, encode_flo(flow));
}

inline FlowField load_flo(const std::filesystem::path& path) { return decode_flo(read_file(path)); }

}  // namespace refsr
