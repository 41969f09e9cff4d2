#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <span>
#include <vector>

#include <json.hpp>

#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"

namespace refsr {

inline constexpr double kCharbonnierEpsilon = 1e-6;

namespace detail {

inline void require_same_dims(const FeatureMap& x, const FeatureMap& y, const char* what) {
  if (!x.same_dims(y)) {
    throw GeometryError(std::string(what) + ": " + x.dims_string() + " vs " + y.dims_string());
  }
}

}  // namespace detail

/// Mean of sqrt((x - y)^2 + eps^2).
///
/// Accumulated as eps + mean(d^2 / (sqrt(d^2 + eps^2) + eps)), which equals the
/// direct form and returns eps exactly when x == y.
inline double charbonnier(const FeatureMap& x, const FeatureMap& y, double eps = kCharbonnierEpsilon) {
  detail::require_same_dims(x, y, "charbonnier");
  const auto a = x.data(), b = y.data();
  const double eps2 = eps * eps;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d2 = (a[i] - b[i]) * (a[i] - b[i]);
    if (d2 > 0.0) sum += d2 / (std::sqrt(d2 + eps2) + eps);
  }
  return eps + sum / static_cast<double>(a.size());
}

struct LossWeights {
  double charbonnier = 1.0;
  double perceptual = 0.01;
  double domain = 1000.0;
};

/// Weighted sum of the reconstruction, perceptual and domain terms. The
/// perceptual term is computed elsewhere and passed in as a scalar.
inline double total_loss(double cha, double per, double dom, const LossWeights& w = {}) {
  for (double v : {cha, per, dom}) {
    if (!std::isfinite(v) || v < 0.0) throw ParameterError("total_loss: components must be finite and >= 0");
  }
  return w.charbonnier * cha + w.perceptual * per + w.domain * dom;
}

inline double mse(const FeatureMap& x, const FeatureMap& y) {
  detail::require_same_dims(x, y, "mse");
  const auto a = x.data(), b = y.data();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

/// PSNR in dB with peak 1. Returns +infinity when MSE < 1e-12.
inline double psnr(const FeatureMap& x, const FeatureMap& y) {
  const double e = mse(x, y);
  if (e < 1e-12) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / e);
}

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

namespace detail {

inline std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> g{};
  double sum = 0.0;
  const double half = (kSsimWindow - 1) / 2.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double t = static_cast<double>(i) - half;
    g[i] = std::exp(-t * t / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Valid-mode separable Gaussian filter of one plane.
inline std::vector<double> filter_valid(std::span<const double> in, std::size_t h, std::size_t w,
                                        const std::array<double, kSsimWindow>& g) {
  const std::size_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> tmp(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) s += g[k] * in[y * w + x + k];
      tmp[y * ow + x] = s;
    }
  }
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) s += g[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace detail

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, over valid window positions; channels are averaged.
inline double ssim(const FeatureMap& x, const FeatureMap& y) {
  detail::require_same_dims(x, y, "ssim");
  if (x.height() < kSsimWindow || x.width() < kSsimWindow) {
    throw GeometryError("ssim: image " + x.dims_string() + " smaller than the 11x11 window");
  }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto g = detail::gaussian_window();
  const std::size_t h = x.height(), w = x.width();
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xx(h * w), yy(h * w), xy(h * w);
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const auto px = x.plane(c), py = y.plane(c);
    for (std::size_t i = 0; i < px.size(); ++i) {
      xx[i] = px[i] * px[i];
      yy[i] = py[i] * py[i];
      xy[i] = px[i] * py[i];
    }
    const auto mx = detail::filter_valid(px, h, w, g), my = detail::filter_valid(py, h, w, g);
    const auto sxx = detail::filter_valid(xx, h, w, g), syy = detail::filter_valid(yy, h, w, g);
    const auto sxy = detail::filter_valid(xy, h, w, g);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      total += num / den;
    }
    count += mx.size();
  }
  return total / static_cast<double>(count);
}

/// Serialized metric bundle. Non-finite PSNR is written as null.
struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double charbonnier = 0.0;
  double domain_loss = 0.0;
};

inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline void to_json(nlohmann::json& j, const MetricReport& m) {
  j = nlohmann::json{{"psnr", finite_or_null(m.psnr)},
                     {"ssim", m.ssim},
                     {"charbonnier", m.charbonnier},
                     {"domain_loss", m.domain_loss}};
}

inline MetricReport evaluate(const FeatureMap& out, const FeatureMap& gt) {
  return {psnr(out, gt), ssim(out, gt), charbonnier(out, gt), 0.0};
}

}  // namespace refsr
