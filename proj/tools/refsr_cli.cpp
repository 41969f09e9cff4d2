// Command-line front end: fuse, bench, match and synth subcommands.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "refsr/refsr.hpp"

namespace {

using refsr::ExitCode;

/// Reads key=value lines (blank lines and '#' comments ignored) and turns them
/// into "--key=value" tokens.
std::vector<std::string> config_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw refsr::FormatError("cannot open config " + path.string());
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw refsr::ParameterError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    out.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
  }
  return out;
}

/// Config-file tokens go in front of the user's flags so that flags win.
std::vector<std::string> expand_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::optional<std::string> path;
    std::size_t span = 1;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      span = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
    if (!path) continue;
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + span));
    // Tokens land right after the subcommand name (assumed to be args[0]).
    const auto tokens = config_tokens(*path);
    args.insert(args.begin() + (args.empty() ? 0 : 1), tokens.begin(), tokens.end());
    break;
  }
  return args;
}

struct PipelineFlags {
  std::size_t zoom = 2;
  std::size_t patch = refsr::kDefaultPatchSize;
  std::size_t prune_interval = 16;
  double prune_threshold = 0.7;
  bool no_prune = false;
  double alpha = 0.8;
  std::size_t feather = 8;
  std::string scales = "1,2,3";
  std::string align = "translation";
  std::size_t search_radius = 4;

  void attach(CLI::App* app) {
    app->add_option("--d", zoom, "Zoom factor between wide and tele images")->capture_default_str();
    app->add_option("--patch", patch, "Patch size in feature pixels")->capture_default_str();
    app->add_option("--prune-interval", prune_interval, "Key Pruning anchor interval (key-grid units)")
        ->capture_default_str();
    app->add_option("--prune-threshold", prune_threshold, "Key Pruning cosine threshold")->capture_default_str();
    app->add_flag("--no-prune", no_prune, "Disable Key Pruning");
    app->add_option("--alpha", alpha, "Transfer strength in the corner blend")->capture_default_str();
    app->add_option("--feather", feather, "Center feather width in output pixels")->capture_default_str();
    app->add_option("--scales", scales, "Matching scales to enable, e.g. 1,2,3")->capture_default_str();
    app->add_option("--align", align, "translation | external-flo | identity")->capture_default_str();
    app->add_option("--search-radius", search_radius, "Translation search radius (center pixels)")
        ->capture_default_str();
  }

  refsr::FusionConfig config() const {
    refsr::FusionConfig c;
    c.zoom = zoom;
    c.patch_size = patch;
    if (no_prune) {
      c.prune.reset();
    } else {
      c.prune = refsr::PruneConfig{prune_interval, prune_threshold};
    }
    c.alpha = alpha;
    c.feather = feather;
    c.scales = refsr::parse_scales(scales);
    c.align = refsr::parse_align_mode(align);
    c.search_radius = search_radius;
    c.validate();
    return c;
  }
};

void emit(const std::string& text, const std::optional<std::string>& path) {
  if (path) {
    refsr::write_text(*path, text);
  } else {
    std::cout << text;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-based dual-camera super-resolution by multi-scale patch matching"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  PipelineFlags flags;
  std::string lr, ref, out = "out.png";
  std::optional<std::string> gt, flo, report, csv;

  auto* fuse = app.add_subcommand("fuse", "Super-resolve a wide image with a tele reference");
  flags.attach(fuse);
  fuse->add_option("--lr", lr, "Wide (low-resolution) image")->required();
  fuse->add_option("--ref", ref, "Tele reference image")->required();
  fuse->add_option("--gt", gt, "Ground truth for metrics");
  fuse->add_option("--flo", flo, "External coarse flow (.flo) between center crop and reference");
  fuse->add_option("--out", out, "Output image (.png/.ppm/.pgm)")->capture_default_str();
  fuse->add_option("--report", report, "JSON report path (stdout when omitted)");

  std::string sweep_path;
  std::size_t repeats = 3;
  auto* bench = app.add_subcommand("bench", "Key Pruning sweep harness");
  PipelineFlags bench_flags;
  bench_flags.attach(bench);
  bench->add_option("--sweep", sweep_path, "Sweep file: 'none' or '<interval> <threshold>' per line")->required();
  bench->add_option("--lr", lr, "Wide (low-resolution) image")->required();
  bench->add_option("--ref", ref, "Tele reference image")->required();
  bench->add_option("--gt", gt, "Ground truth for PSNR/SSIM");
  bench->add_option("--repeats", repeats, "Timed runs per sweep point (median reported)")->capture_default_str();
  bench->add_option("--csv", csv, "CSV output (stdout when omitted)");
  bench->add_option("--report", report, "JSON output");

  std::string q_path, k_path;
  auto* match = app.add_subcommand("match", "Feature extraction and matching only");
  PipelineFlags match_flags;
  match_flags.attach(match);
  match->add_option("--q", q_path, "Query image")->required();
  match->add_option("--k", k_path, "Key image")->required();
  match->add_option("--out", report, "JSON output (stdout when omitted)");

  std::string synth_dir = ".";
  std::size_t synth_size = 256, synth_period = 24;
  std::uint64_t synth_seed = 1;
  double synth_noise = 0.0;
  std::string synth_kind = "self-similar";
  std::size_t synth_zoom = 2;
  auto* synth = app.add_subcommand("synth", "Write a synthetic lr/ref/gt triple");
  synth->add_option("--out-dir", synth_dir, "Output directory")->capture_default_str();
  synth->add_option("--size", synth_size, "LR side length")->capture_default_str();
  synth->add_option("--d", synth_zoom, "Zoom factor")->capture_default_str();
  synth->add_option("--kind", synth_kind, "tiled | self-similar")->capture_default_str();
  synth->add_option("--period", synth_period, "Texture period in ground-truth pixels")->capture_default_str();
  synth->add_option("--noise", synth_noise, "Gaussian noise sigma added to lr")->capture_default_str();
  synth->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();

  std::vector<std::string> args;
  try {
    args = expand_args(argc, argv);
  } catch (const refsr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*fuse) {
      refsr::FusePaths paths{lr, ref, std::nullopt, std::nullopt, out, std::nullopt};
      if (gt) paths.gt = *gt;
      if (flo) paths.flo = *flo;
      if (report) paths.report = *report;
      const auto rep = refsr::run_fuse(paths, flags.config());
      if (!report) std::cout << rep.dump(2) << "\n";
    } else if (*bench) {
      const refsr::FusionConfig cfg = bench_flags.config();
      std::ifstream sf(sweep_path);
      if (!sf) throw refsr::FormatError("cannot open sweep file " + sweep_path);
      const auto sweep = refsr::parse_sweep(sf);
      refsr::FusionInputs in{refsr::load_image(lr), refsr::load_image(ref), std::nullopt, std::nullopt};
      if (gt) in.gt = refsr::load_image(*gt);
      const auto rep = refsr::run_bench(in, cfg, sweep, repeats);
      emit(refsr::bench_csv(rep), csv);
      if (report) refsr::write_text(*report, refsr::bench_json(rep).dump(2) + "\n");
    } else if (*match) {
      const auto results =
          refsr::run_match(refsr::load_image(q_path), refsr::load_image(k_path), match_flags.config());
      emit(refsr::match_report(results).dump() + "\n", report);
    } else if (*synth) {
      if (synth_zoom < 2) throw refsr::ParameterError("synth: d must be >= 2");
      const std::size_t big = synth_size * synth_zoom;
      refsr::FeatureMap gt_img =
          synth_kind == "tiled" ? refsr::synth::tiled_texture(big, big, 3, synth_period, synth_seed)
          : synth_kind == "self-similar"
              ? refsr::synth::self_similar_texture(big, big, 3, synth_seed, synth_period)
              : throw refsr::ParameterError("synth: unknown kind " + synth_kind);
      const auto scene = refsr::synth::make_scene(std::move(gt_img), synth_zoom, synth_noise, synth_seed);
      const std::filesystem::path dir(synth_dir);
      std::filesystem::create_directories(dir);
      refsr::save_image(scene.gt, dir / "gt.png");
      refsr::save_image(scene.lr, dir / "lr.png");
      refsr::save_image(scene.ref, dir / "ref.png");
    }
  } catch (const refsr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kIo);
  }
  return 0;
}
