#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "refsr/error.hpp"
#include "refsr/features.hpp"
#include "refsr/patch_grid.hpp"

namespace refsr {

inline constexpr double kZeroNorm = 1e-12;
inline constexpr std::size_t kDefaultPatchSize = 4;

/// Per-scale best-match record: one key index and one confidence per query patch.
struct MatchResult {
  std::size_t scale = 1;  // 1, 2 or 3 (relative resolution 1, 1/2, 1/4)
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t key_rows = 0;
  std::size_t key_cols = 0;
  std::vector<std::size_t> indices;
  std::vector<double> confidences;
  std::uint64_t comparisons = 0;  // similarity evaluations spent in matching

  std::size_t count() const noexcept { return rows * cols; }
};

inline void to_json(nlohmann::json& j, const MatchResult& m) {
  j = nlohmann::json{{"scale", m.scale},           {"rows", m.rows},
                     {"cols", m.cols},             {"key_rows", m.key_rows},
                     {"key_cols", m.key_cols},     {"comparisons", m.comparisons},
                     {"indices", m.indices},       {"confidences", m.confidences}};
}

inline void from_json(const nlohmann::json& j, MatchResult& m) {
  j.at("scale").get_to(m.scale);
  j.at("rows").get_to(m.rows);
  j.at("cols").get_to(m.cols);
  m.key_rows = j.value("key_rows", std::size_t{0});
  m.key_cols = j.value("key_cols", std::size_t{0});
  m.comparisons = j.value("comparisons", std::uint64_t{0});
  j.at("indices").get_to(m.indices);
  j.at("confidences").get_to(m.confidences);
}

struct PruneConfig {
  std::size_t interval = 16;  // anchor spacing in key-grid units, both axes
  double threshold = 0.7;

  void validate() const {
    if (interval < 1) throw ParameterError("prune interval must be >= 1");
    if (!(threshold > -1.0 && threshold <= 1.0)) {
      throw ParameterError("prune threshold must lie in (-1, 1]");
    }
  }
};

/// Keys that survived pruning, kept in increasing original order.
struct PrunedKeySet {
  std::size_t dim = 0;
  std::size_t original_count = 0;
  std::size_t key_rows = 0;
  std::size_t key_cols = 0;
  std::vector<std::size_t> indices;
  std::vector<double> values;     // indices.size() * dim
  std::uint64_t comparisons = 0;  // anchor-vs-key evaluations spent pruning

  std::size_t size() const noexcept { return indices.size(); }
  std::span<const double> patch(std::size_t i) const noexcept {
    return {values.data() + i * dim, dim};
  }
};

namespace detail {

inline double dot_sequential(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Shared finalization so every path rounds identically.
inline double cosine_from_parts(double dot, double norm2_a, double norm2_b) noexcept {
  if (std::sqrt(norm2_a) < kZeroNorm || std::sqrt(norm2_b) < kZeroNorm) return 0.0;
  return std::clamp(dot / std::sqrt(norm2_a * norm2_b), -1.0, 1.0);
}

}  // namespace detail

/// dot(a, b) / sqrt(|a|^2 |b|^2), or 0 when either norm is below 1e-12.
inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ParameterError("cosine_sim: length " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  return detail::cosine_from_parts(detail::dot_sequential(a, b), detail::dot_sequential(a, a),
                                   detail::dot_sequential(b, b));
}

namespace detail {

inline constexpr std::size_t kKeyBlock = 8;

/// Keys repacked dimension-major in blocks of kKeyBlock so one query can be
/// dotted against a block with independent accumulators. Each accumulator
/// still sums in dimension order, which keeps results identical to the
/// scalar loop.
class PackedKeys {
 public:
  PackedKeys(std::size_t dim, std::size_t count, auto&& key_at) : dim_(dim), count_(count) {
    const std::size_t blocks = (count + kKeyBlock - 1) / kKeyBlock;
    packed_.assign(blocks * kKeyBlock * dim, 0.0);
    norm2_.assign(count, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
      std::span<const double> v = key_at(k);
      norm2_[k] = dot_sequential(v, v);
      double* blk = packed_.data() + (k / kKeyBlock) * kKeyBlock * dim;
      for (std::size_t d = 0; d < dim; ++d) blk[d * kKeyBlock + k % kKeyBlock] = v[d];
    }
  }

  std::size_t count() const noexcept { return count_; }

  /// Best (index, similarity) for one query; ties resolve to the smallest position.
  std::pair<std::size_t, double> best(std::span<const double> q) const noexcept {
    const double qn2 = dot_sequential(q, q);
    double best_sim = -std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t b = 0; b * kKeyBlock < count_; ++b) {
      const double* blk = packed_.data() + b * kKeyBlock * dim_;
      std::array<double, kKeyBlock> acc{};
      for (std::size_t d = 0; d < dim_; ++d) {
        const double qd = q[d];
        const double* row = blk + d * kKeyBlock;
        for (std::size_t k = 0; k < kKeyBlock; ++k) acc[k] += qd * row[k];
      }
      const std::size_t n = std::min(kKeyBlock, count_ - b * kKeyBlock);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = b * kKeyBlock + k;
        const double s = cosine_from_parts(acc[k], qn2, norm2_[idx]);
        if (s > best_sim) {
          best_sim = s;
          best_idx = idx;
        }
      }
    }
    return {best_idx, best_sim};
  }

 private:
  std::size_t dim_;
  std::size_t count_;
  std::vector<double> packed_;
  std::vector<double> norm2_;
};

/// Splits [0, n) into contiguous chunks across hardware threads. Each index is
/// handled by exactly one call, so disjoint output writes stay schedule-independent.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(hw, std::max<std::size_t>(1, n / 64));
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo < hi) pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
}

inline MatchResult match_packed(const PatchGrid& q, const PackedKeys& keys,
                                std::span<const std::size_t> index_map) {
  MatchResult r;
  r.rows = q.rows;
  r.cols = q.cols;
  r.indices.resize(q.count());
  r.confidences.resize(q.count());
  parallel_for(q.count(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      const auto [idx, sim] = keys.best(q.patch(j));
      r.indices[j] = index_map.empty() ? idx : index_map[idx];
      r.confidences[j] = sim;
    }
  });
  r.comparisons = static_cast<std::uint64_t>(q.count()) * keys.count();
  return r;
}

}  // namespace detail

/// Exhaustive cosine argmax of every query patch over every key patch.
inline MatchResult match(const PatchGrid& q, const PatchGrid& k) {
  if (k.count() == 0) throw ParameterError("match: empty key grid");
  if (q.dim() != k.dim()) {
    throw ParameterError("match: query dim " + std::to_string(q.dim()) + " vs key dim " +
                         std::to_string(k.dim()));
  }
  const detail::PackedKeys keys(k.dim(), k.count(), [&](std::size_t i) { return k.patch(i); });
  MatchResult r = detail::match_packed(q, keys, {});
  r.key_rows = k.rows;
  r.key_cols = k.cols;
  return r;
}

/// Key Pruning: keys on the anchor lattice (row and col multiples of the
/// interval) always survive; any other key whose similarity to some anchor
/// strictly exceeds the threshold is dropped.
inline PrunedKeySet prune_keys(const PatchGrid& k, const PruneConfig& cfg) {
  cfg.validate();
  PrunedKeySet out;
  out.dim = k.dim();
  out.original_count = k.count();
  out.key_rows = k.rows;
  out.key_cols = k.cols;
  if (k.count() == 0) return out;

  auto is_anchor = [&](std::size_t i) {
    return (i / k.cols) % cfg.interval == 0 && (i % k.cols) % cfg.interval == 0;
  };
  std::vector<std::size_t> anchors;
  for (std::size_t i = 0; i < k.count(); ++i) {
    if (is_anchor(i)) anchors.push_back(i);
  }
  const detail::PackedKeys anchor_keys(k.dim(), anchors.size(),
                                       [&](std::size_t a) { return k.patch(anchors[a]); });

  std::vector<char> keep(k.count(), 1);
  std::size_t non_anchors = 0;
  for (std::size_t i = 0; i < k.count(); ++i) {
    if (is_anchor(i)) continue;
    ++non_anchors;
    if (anchor_keys.best(k.patch(i)).second > cfg.threshold) keep[i] = 0;
  }
  out.comparisons = static_cast<std::uint64_t>(non_anchors) * anchors.size();

  for (std::size_t i = 0; i < k.count(); ++i) {
    if (!keep[i]) continue;
    out.indices.push_back(i);
    const auto v = k.patch(i);
    out.values.insert(out.values.end(), v.begin(), v.end());
  }
  return out;
}

/// Every key kept; lets the unpruned path share the pruned code.
inline PrunedKeySet keep_all_keys(const PatchGrid& k) {
  PrunedKeySet out;
  out.dim = k.dim();
  out.original_count = k.count();
  out.key_rows = k.rows;
  out.key_cols = k.cols;
  out.indices.resize(k.count());
  for (std::size_t i = 0; i < k.count(); ++i) out.indices[i] = i;
  out.values = k.values;
  return out;
}

/// Matching restricted to surviving keys; reported indices are original key positions.
inline MatchResult match_pruned(const PatchGrid& q, const PrunedKeySet& pk) {
  if (pk.size() == 0) throw ParameterError("match_pruned: empty retained key set");
  if (q.dim() != pk.dim) {
    throw ParameterError("match_pruned: query dim " + std::to_string(q.dim()) + " vs key dim " +
                         std::to_string(pk.dim));
  }
  const detail::PackedKeys keys(pk.dim, pk.size(), [&](std::size_t i) { return pk.patch(i); });
  MatchResult r = detail::match_packed(q, keys, pk.indices);
  r.key_rows = pk.key_rows;
  r.key_cols = pk.key_cols;
  return r;
}

inline constexpr std::array<bool, kPyramidLevels> kAllScales{true, true, true};

/// Per-scale statistics gathered alongside the match results.
struct MultiscaleMatch {
  std::vector<MatchResult> results;           // one per enabled scale, ascending
  std::vector<std::size_t> retained;          // retained keys per enabled scale
  std::vector<std::size_t> key_counts;        // original keys per enabled scale
  std::uint64_t prune_comparisons = 0;
  std::uint64_t match_comparisons = 0;
  std::size_t peak_patch_bytes = 0;           // largest query + searched-key buffer at any scale
};

/// Patchify each level with stride = patch size, optionally prune keys, then match.
inline MultiscaleMatch match_multiscale_detailed(const FeaturePyramid& qp, const FeaturePyramid& kp,
                                                 std::size_t patch_size,
                                                 const std::optional<PruneConfig>& prune,
                                                 const std::array<bool, kPyramidLevels>& scales = kAllScales) {
  if (qp.channels() != kp.channels()) throw ParameterError("match_multiscale: channel mismatch");
  if (patch_size < 1) throw ParameterError("match_multiscale: patch size must be >= 1");
  if (prune) prune->validate();
  MultiscaleMatch out;
  for (std::size_t i = 0; i < kPyramidLevels; ++i) {
    if (!scales[i]) continue;
    const PatchGrid qg = patchify(qp[i], patch_size, patch_size);
    const PatchGrid kg = patchify(kp[i], patch_size, patch_size);
    MatchResult r;
    std::size_t retained = kg.count();
    if (prune) {
      const PrunedKeySet pk = prune_keys(kg, *prune);
      r = match_pruned(qg, pk);
      retained = pk.size();
      out.prune_comparisons += pk.comparisons;
      out.peak_patch_bytes =
          std::max(out.peak_patch_bytes, (qg.values.size() + pk.values.size()) * sizeof(double));
    } else {
      r = match(qg, kg);
      out.peak_patch_bytes =
          std::max(out.peak_patch_bytes, (qg.values.size() + kg.values.size()) * sizeof(double));
    }
    r.scale = i + 1;
    out.match_comparisons += r.comparisons;
    out.retained.push_back(retained);
    out.key_counts.push_back(kg.count());
    out.results.push_back(std::move(r));
  }
  return out;
}

inline std::vector<MatchResult> match_multiscale(const FeaturePyramid& qp, const FeaturePyramid& kp,
                                                 std::size_t patch_size,
                                                 const std::optional<PruneConfig>& prune = std::nullopt) {
  return match_multiscale_detailed(qp, kp, patch_size, prune).results;
}

}  // namespace refsr
