#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"
#include "refsr/resample.hpp"

namespace refsr {

inline constexpr std::size_t kEmbeddingSize = 1024;
inline constexpr std::size_t kHistogramBins = 512;
inline constexpr std::size_t kSpectrumBins = kEmbeddingSize - kHistogramBins;

/// Global summary of the gap between a degraded image and its high-resolution
/// counterpart. Always 1024 finite values.
class DomainEmbedding {
 public:
  DomainEmbedding() : values_(kEmbeddingSize, 0.0) {}
  explicit DomainEmbedding(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() != kEmbeddingSize) {
      throw GeometryError("DomainEmbedding: expected 1024 values, got " + std::to_string(values_.size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw ParameterError("DomainEmbedding: non-finite value");
    }
  }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> histogram() const noexcept { return values().first(kHistogramBins); }
  std::span<const double> spectrum() const noexcept { return values().last(kSpectrumBins); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

 private:
  std::vector<double> values_;
};

/// L1 distance between two embeddings.
inline double domain_loss(const DomainEmbedding& z, const DomainEmbedding& z_gt) {
  double s = 0.0;
  for (std::size_t i = 0; i < kEmbeddingSize; ++i) s += std::abs(z[i] - z_gt[i]);
  return s;
}

namespace detail {

// Radially binned power spectrum of one plane, L1-normalized.
inline std::vector<double> radial_spectrum(std::span<const double> plane, std::size_t h, std::size_t w) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> grid(h * w), line, freq;
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = plane[i];
  for (std::size_t y = 0; y < h; ++y) {
    line.assign(grid.begin() + y * w, grid.begin() + (y + 1) * w);
    fft.fwd(freq, line);
    std::copy(freq.begin(), freq.end(), grid.begin() + y * w);
  }
  line.resize(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) line[y] = grid[y * w + x];
    fft.fwd(freq, line);
    for (std::size_t y = 0; y < h; ++y) grid[y * w + x] = freq[y];
  }

  std::vector<double> energy(kSpectrumBins, 0.0);
  std::vector<std::size_t> hits(kSpectrumBins, 0);
  const double rmax = std::sqrt(0.5);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = (y <= h / 2 ? static_cast<double>(y) : static_cast<double>(y) - static_cast<double>(h)) /
                      static_cast<double>(h);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = (x <= w / 2 ? static_cast<double>(x) : static_cast<double>(x) - static_cast<double>(w)) /
                        static_cast<double>(w);
      const double radius = std::sqrt(fy * fy + fx * fx) / rmax;
      const auto bin = std::min(kSpectrumBins - 1, static_cast<std::size_t>(radius * kSpectrumBins));
      energy[bin] += std::norm(grid[y * w + x]);
      ++hits[bin];
    }
  }
  double total = 0.0;
  for (std::size_t b = 0; b < kSpectrumBins; ++b) {
    if (hits[b] > 0) energy[b] /= static_cast<double>(hits[b]);
    total += energy[b];
  }
  if (total > 0.0) {
    for (double& e : energy) e /= total;
  }
  return energy;
}

}  // namespace detail

/// Deterministic stand-in for a learned prior extractor.
///
/// The residual r = b - bicubic(a -> dims of b) cancels shared content and
/// keeps degradation statistics. The first 512 entries are a histogram of |r|
/// over [0, 1] normalized to unit mass; the last 512 are mean power of the
/// residual luminance in radial frequency bins, normalized to unit L1 norm.
inline DomainEmbedding extract_embedding(const FeatureMap& a, const FeatureMap& b) {
  if (a.channels() != b.channels()) {
    throw GeometryError("extract_embedding: channel mismatch " + a.dims_string() + " vs " + b.dims_string());
  }
  const FeatureMap up = resize(a, b.height(), b.width(), Interp::kBicubic);
  FeatureMap residual(b.channels(), b.height(), b.width());
  for (std::size_t i = 0; i < residual.size(); ++i) residual.data()[i] = b.data()[i] - up.data()[i];

  std::vector<double> values(kEmbeddingSize, 0.0);
  for (double r : residual.data()) {
    const auto bin = std::min(kHistogramBins - 1, static_cast<std::size_t>(std::abs(r) * kHistogramBins));
    values[bin] += 1.0;
  }
  const double inv = 1.0 / static_cast<double>(residual.size());
  for (std::size_t i = 0; i < kHistogramBins; ++i) values[i] *= inv;

  const FeatureMap lum = luminance(residual);
  const auto spectrum = detail::radial_spectrum(lum.plane(0), lum.height(), lum.width());
  std::copy(spectrum.begin(), spectrum.end(), values.begin() + kHistogramBins);
  return DomainEmbedding(std::move(values));
}

/// Per-channel affine parameters applied to a feature map.
struct ModulationParams {
  std::vector<double> gamma;
  std::vector<double> beta;
};

inline FeatureMap modulate(const FeatureMap& f, const ModulationParams& p) {
  if (p.gamma.size() != f.channels() || p.beta.size() != f.channels()) {
    throw ParameterError("modulate: expected " + std::to_string(f.channels()) + " gamma/beta values");
  }
  FeatureMap out = f;
  for (std::size_t c = 0; c < f.channels(); ++c) {
    for (double& v : out.plane(c)) v = p.gamma[c] * v + p.beta[c];
  }
  return out;
}

}  // namespace refsr
