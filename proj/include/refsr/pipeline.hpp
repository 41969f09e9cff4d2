#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "refsr/domain.hpp"
#include "refsr/error.hpp"
#include "refsr/feature_map.hpp"
#include "refsr/features.hpp"
#include "refsr/flow.hpp"
#include "refsr/image_io.hpp"
#include "refsr/matcher.hpp"
#include "refsr/metrics.hpp"
#include "refsr/reassembly.hpp"
#include "refsr/resample.hpp"

namespace refsr {

inline constexpr int kReportSchema = 1;

enum class AlignMode { kTranslation, kExternalFlo, kIdentity };

inline std::string_view to_string(AlignMode m) {
  switch (m) {
    case AlignMode::kTranslation: return "translation";
    case AlignMode::kExternalFlo: return "external-flo";
    case AlignMode::kIdentity: return "identity";
  }
  return "?";
}

inline AlignMode parse_align_mode(std::string_view s) {
  if (s == "translation") return AlignMode::kTranslation;
  if (s == "external-flo") return AlignMode::kExternalFlo;
  if (s == "identity") return AlignMode::kIdentity;
  throw ParameterError("unknown alignment mode: " + std::string(s));
}

struct FusionConfig {
  std::size_t zoom = 2;
  std::size_t patch_size = kDefaultPatchSize;
  std::optional<PruneConfig> prune = PruneConfig{};
  double alpha = 0.8;
  std::size_t feather = 8;
  AlignMode align = AlignMode::kTranslation;
  std::size_t search_radius = 4;
  std::array<bool, kPyramidLevels> scales = kAllScales;

  void validate() const {
    if (zoom < 2) throw ParameterError("zoom must be >= 2");
    if (patch_size < 2) throw ParameterError("patch size must be >= 2");
    if (std::none_of(scales.begin(), scales.end(), [](bool b) { return b; })) {
      throw ParameterError("at least one matching scale must be enabled");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in [0, 1]");
    if (prune) prune->validate();
  }
};

inline void to_json(nlohmann::json& j, const FusionConfig& c) {
  std::vector<std::size_t> scales;
  for (std::size_t i = 0; i < kPyramidLevels; ++i) {
    if (c.scales[i]) scales.push_back(i + 1);
  }
  j = nlohmann::json{{"d", c.zoom},
                     {"patch", c.patch_size},
                     {"alpha", c.alpha},
                     {"feather", c.feather},
                     {"align", to_string(c.align)},
                     {"search_radius", c.search_radius},
                     {"scales", scales}};
  if (c.prune) {
    j["prune"] = {{"interval", c.prune->interval}, {"threshold", c.prune->threshold}};
  } else {
    j["prune"] = nullptr;
  }
}

/// Parses "1,2,3"-style scale lists.
inline std::array<bool, kPyramidLevels> parse_scales(std::string_view s) {
  std::array<bool, kPyramidLevels> out{false, false, false};
  std::stringstream ss{std::string(s)};
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "1" || tok == "2" || tok == "3") {
      out[static_cast<std::size_t>(tok[0] - '1')] = true;
    } else {
      throw ParameterError("scales: expected a list drawn from 1,2,3, got '" + std::string(s) + "'");
    }
  }
  return out;
}

struct FusionInputs {
  FeatureMap lr;
  FeatureMap ref;
  std::optional<FeatureMap> gt;
  std::optional<FlowField> flow;
};

struct FusionOutput {
  ImageGeometry geom;
  FeatureMap image;
  FeatureMap baseline;  // bicubic upsample of lr
  FlowField coarse_flow;
  MultiscaleMatch matching;
  double match_ms = 0.0;
  double total_ms = 0.0;
  std::optional<MetricReport> metrics;
  std::optional<MetricReport> baseline_metrics;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

inline FlowField coarse_flow(const FusionInputs& in, const FeatureMap& lrc, const FusionConfig& cfg,
                             const ImageGeometry& geom) {
  switch (cfg.align) {
    case AlignMode::kIdentity:
      return FlowField(geom.center_h, geom.center_w);
    case AlignMode::kExternalFlo:
      if (!in.flow) throw ParameterError("alignment mode external-flo requires a flow field");
      return *in.flow;
    case AlignMode::kTranslation: {
      const FeatureMap a = luminance(lrc);
      const FeatureMap b = luminance(resize(in.ref, geom.center_h, geom.center_w, Interp::kBilinear));
      const std::size_t limit = (std::min(geom.center_h, geom.center_w) - 1) / 2;
      return estimate_translation(a, b, std::min(cfg.search_radius, limit));
    }
  }
  return FlowField(geom.center_h, geom.center_w);
}

}  // namespace detail

/// Validates dims; returns the geometry shared by every stage.
inline ImageGeometry check_inputs(const FusionInputs& in, const FusionConfig& cfg) {
  cfg.validate();
  if (in.lr.channels() != in.ref.channels()) {
    throw GeometryError("lr " + in.lr.dims_string() + " and ref " + in.ref.dims_string() +
                        " differ in channel count");
  }
  const ImageGeometry geom = ImageGeometry::make(cfg.zoom, in.lr.height(), in.lr.width());
  if (in.ref.height() != geom.zoom * geom.center_h || in.ref.width() != geom.zoom * geom.center_w) {
    throw GeometryError("ref " + in.ref.dims_string() + " must be d x the lr center (" +
                        std::to_string(geom.zoom * geom.center_h) + "x" +
                        std::to_string(geom.zoom * geom.center_w) + ")");
  }
  if (in.gt && (!in.gt->same_spatial(FeatureMap(1, geom.out_h(), geom.out_w())) ||
                in.gt->channels() != in.lr.channels())) {
    throw GeometryError("gt " + in.gt->dims_string() + " must be d x the lr dims");
  }
  return geom;
}

/// Full dataflow: center crop, features, alignment and warp, multi-scale
/// matching, reassembly, fusion and blending, then metrics when gt is given.
inline FusionOutput run_fusion(const FusionInputs& in, const FusionConfig& cfg) {
  const auto t0 = detail::Clock::now();
  FusionOutput out;
  out.geom = check_inputs(in, cfg);
  const ImageGeometry& geom = out.geom;

  const FeatureMap lrc = crop_center(in.lr, geom);
  const QueryKeyPyramids qk = extract_pair(in.lr, lrc);

  out.coarse_flow = detail::coarse_flow(in, lrc, cfg, geom);
  FlowField full_flow;
  if (out.coarse_flow.height() == geom.center_h && out.coarse_flow.width() == geom.center_w) {
    full_flow = upsample_flow(out.coarse_flow, geom.zoom);
  } else if (out.coarse_flow.height() == in.ref.height() && out.coarse_flow.width() == in.ref.width()) {
    full_flow = out.coarse_flow;
  } else {
    throw GeometryError("flow " + out.coarse_flow.uv.dims_string() + " matches neither the center (" +
                        std::to_string(geom.center_h) + "x" + std::to_string(geom.center_w) +
                        ") nor the reference");
  }
  const FeatureMap v = warp(in.ref, full_flow);

  const auto tm = detail::Clock::now();
  out.matching = match_multiscale_detailed(qk.query, qk.key, cfg.patch_size, cfg.prune, cfg.scales);
  out.match_ms = detail::elapsed_ms(tm);

  std::vector<ScaleCanvas> canvases;
  for (const auto& r : out.matching.results) canvases.push_back(reassemble_scale(v, r, geom, cfg.patch_size));
  const FusedReference fused = fuse_scales(canvases);

  out.baseline = clamp_values(resize(in.lr, geom.out_h(), geom.out_w(), Interp::kBicubic));
  out.image = blend_output(out.baseline, v, fused.image, fused.confidence, geom, cfg.alpha, cfg.feather);

  if (in.gt) {
    out.metrics = evaluate(out.image, *in.gt);
    out.baseline_metrics = evaluate(out.baseline, *in.gt);
    const DomainEmbedding z = extract_embedding(lrc, in.ref);
    const DomainEmbedding z_gt = extract_embedding(in.lr, *in.gt);
    out.metrics->domain_loss = domain_loss(z, z_gt);
    out.metrics->charbonnier = charbonnier(out.image, *in.gt);
  }
  out.total_ms = detail::elapsed_ms(t0);
  return out;
}

inline std::uint64_t total_comparisons(const MultiscaleMatch& m) {
  return m.match_comparisons + m.prune_comparisons;
}

/// Report with a versioned schema. Wall-clock figures live under "timing" so
/// the rest of the document is reproducible byte for byte.
inline nlohmann::json fusion_report(const FusionOutput& out, const FusionConfig& cfg) {
  nlohmann::json scales = nlohmann::json::array();
  for (std::size_t i = 0; i < out.matching.results.size(); ++i) {
    const auto& r = out.matching.results[i];
    scales.push_back({{"scale", r.scale},
                      {"query_patches", r.count()},
                      {"keys", out.matching.key_counts[i]},
                      {"retained", out.matching.retained[i]},
                      {"comparisons", r.comparisons}});
  }
  nlohmann::json j{
      {"schema", kReportSchema},
      {"config", cfg},
      {"geometry",
       {{"lr", {out.geom.full_h, out.geom.full_w}},
        {"center", {out.geom.center_h, out.geom.center_w}},
        {"offset", {out.geom.offset_row, out.geom.offset_col}},
        {"output", {out.geom.out_h(), out.geom.out_w()}}}},
      {"flow", {{"u", out.coarse_flow.u(0, 0)}, {"v", out.coarse_flow.v(0, 0)}}},
      {"matching",
       {{"scales", scales},
        {"match_comparisons", out.matching.match_comparisons},
        {"prune_comparisons", out.matching.prune_comparisons},
        {"comparisons", total_comparisons(out.matching)},
        {"peak_patch_bytes", out.matching.peak_patch_bytes}}},
      {"timing", {{"match_ms", out.match_ms}, {"total_ms", out.total_ms}}},
  };
  j["metrics"] = out.metrics ? nlohmann::json(*out.metrics) : nlohmann::json(nullptr);
  j["baseline_metrics"] = out.baseline_metrics ? nlohmann::json(*out.baseline_metrics) : nlohmann::json(nullptr);
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path.string());
  f << text;
  if (!f) throw FormatError("short write to " + path.string());
}

struct FusePaths {
  std::filesystem::path lr, ref;
  std::optional<std::filesystem::path> gt, flo;
  std::filesystem::path out = "out.png";
  std::optional<std::filesystem::path> report;
};

/// File-level entry point behind `fuse`. Nothing is written unless every stage succeeds.
inline nlohmann::json run_fuse(const FusePaths& paths, FusionConfig cfg) {
  FusionInputs in{load_image(paths.lr), load_image(paths.ref), std::nullopt, std::nullopt};
  if (paths.gt) in.gt = load_image(*paths.gt);
  if (paths.flo) {
    in.flow = load_flo(*paths.flo);
    cfg.align = AlignMode::kExternalFlo;
  }
  const FusionOutput out = run_fusion(in, cfg);
  nlohmann::json report = fusion_report(out, cfg);
  save_image(out.image, paths.out);
  if (paths.report) write_text(*paths.report, report.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// Matching-only entry point

inline nlohmann::json match_report(const std::vector<MatchResult>& results) {
  return nlohmann::json{{"schema", kReportSchema}, {"results", results}};
}

/// Feature extraction and matching between a query image and a key image.
inline std::vector<MatchResult> run_match(const FeatureMap& q_img, const FeatureMap& k_img,
                                          const FusionConfig& cfg) {
  cfg.validate();
  const QueryKeyPyramids qk = extract_pair(q_img, k_img);
  return match_multiscale_detailed(qk.query, qk.key, cfg.patch_size, cfg.prune, cfg.scales).results;
}

// ---------------------------------------------------------------------------
// Key Pruning benchmark harness

inline constexpr std::string_view kBenchCsvHeader =
    "run_id,interval,threshold,retained_l1,retained_l2,retained_l3,comparisons,match_ms,total_ms,psnr_db,ssim";

/// One sweep point; std::nullopt means pruning disabled.
using SweepPoint = std::optional<PruneConfig>;

/// Sweep file: one point per line, either "none" or "<interval> <threshold>"
/// (also accepted: "interval=16 threshold=0.7"). '#' starts a comment.
inline std::vector<SweepPoint> parse_sweep(std::istream& in) {
  std::vector<SweepPoint> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& ch : line) {
      if (ch == '=' || ch == ',' || ch == '\t') ch = ' ';
    }
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() == 1 && tok[0] == "none") {
      out.emplace_back(std::nullopt);
      continue;
    }
    if (tok.size() == 4 && tok[0] == "interval" && tok[2] == "threshold") tok = {tok[1], tok[3]};
    if (tok.size() != 2) throw ParameterError("sweep line " + std::to_string(lineno) + ": expected 'none' or '<interval> <threshold>'");
    PruneConfig p;
    try {
      std::size_t used = 0;
      const long iv = std::stol(tok[0], &used);
      if (used != tok[0].size() || iv < 1) throw std::invalid_argument("interval");
      p.interval = static_cast<std::size_t>(iv);
      p.threshold = std::stod(tok[1], &used);
      if (used != tok[1].size()) throw std::invalid_argument("threshold");
    } catch (const std::exception&) {
      throw ParameterError("sweep line " + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
    p.validate();
    out.emplace_back(p);
  }
  if (out.empty()) throw ParameterError("sweep file has no entries");
  return out;
}

struct BenchRow {
  std::size_t run_id = 0;
  SweepPoint prune;
  std::vector<std::optional<std::size_t>> retained;  // per pyramid level
  std::vector<std::size_t> key_counts;
  std::uint64_t comparisons = 0;  // matching + pruning
  double match_ms = 0.0;          // median over repeats
  double total_ms = 0.0;          // median over repeats
  std::size_t peak_patch_bytes = 0;
  std::optional<double> psnr_db;
  std::optional<double> ssim;
};

struct BenchReport {
  FusionConfig base;
  std::size_t repeats = 3;
  std::vector<BenchRow> rows;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Runs the pipeline once per repeat for every sweep point on identical inputs.
inline BenchReport run_bench(const FusionInputs& in, const FusionConfig& base,
                             const std::vector<SweepPoint>& sweep, std::size_t repeats = 3) {
  if (repeats < 1) throw ParameterError("bench: repeats must be >= 1");
  BenchReport rep{base, repeats, {}};
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    FusionConfig cfg = base;
    cfg.prune = sweep[i];
    std::vector<double> match_ms, total_ms;
    std::optional<FusionOutput> last;
    for (std::size_t r = 0; r < repeats; ++r) {
      last = run_fusion(in, cfg);
      match_ms.push_back(last->match_ms);
      total_ms.push_back(last->total_ms);
    }
    BenchRow row;
    row.run_id = i;
    row.prune = sweep[i];
    row.retained.assign(kPyramidLevels, std::nullopt);
    std::size_t k = 0;
    for (std::size_t lvl = 0; lvl < kPyramidLevels; ++lvl) {
      if (cfg.scales[lvl]) row.retained[lvl] = last->matching.retained[k++];
    }
    row.key_counts = last->matching.key_counts;
    row.comparisons = total_comparisons(last->matching);
    row.match_ms = detail::median(match_ms);
    row.total_ms = detail::median(total_ms);
    row.peak_patch_bytes = last->matching.peak_patch_bytes;
    if (last->metrics) {
      row.psnr_db = last->metrics->psnr;
      row.ssim = last->metrics->ssim;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

inline std::string bench_csv(const BenchReport& rep) {
  std::ostringstream os;
  os.precision(10);
  os << kBenchCsvHeader << "\n";
  for (const auto& r : rep.rows) {
    os << r.run_id << ",";
    if (r.prune) os << r.prune->interval << "," << r.prune->threshold << ",";
    else os << "none,none,";
    for (const auto& k : r.retained) {
      if (k) os << *k;
      os << ",";
    }
    os << r.comparisons << "," << r.match_ms << "," << r.total_ms << ",";
    if (r.psnr_db) os << *r.psnr_db;
    os << ",";
    if (r.ssim) os << *r.ssim;
    os << "\n";
  }
  return os.str();
}

inline nlohmann::json bench_json(const BenchReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    nlohmann::json retained = nlohmann::json::array();
    for (const auto& k : r.retained) retained.push_back(k ? nlohmann::json(*k) : nlohmann::json(nullptr));
    nlohmann::json prune = nullptr;
    if (r.prune) prune = {{"interval", r.prune->interval}, {"threshold", r.prune->threshold}};
    rows.push_back({{"run_id", r.run_id},
                    {"prune", prune},
                    {"retained", retained},
                    {"keys", r.key_counts},
                    {"comparisons", r.comparisons},
                    {"peak_patch_bytes", r.peak_patch_bytes},
                    {"match_ms", r.match_ms},
                    {"total_ms", r.total_ms},
                    {"psnr_db", r.psnr_db ? finite_or_null(*r.psnr_db) : nlohmann::json(nullptr)},
                    {"ssim", r.ssim ? nlohmann::json(*r.ssim) : nlohmann::json(nullptr)}});
  }
  return nlohmann::json{{"schema", kReportSchema}, {"config", rep.base}, {"repeats", rep.repeats}, {"rows", rows}};
}

}  // namespace refsr
