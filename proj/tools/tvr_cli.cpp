// Command-line front end: resurface, inject, eval, surface and sweep over
// single PNG files or directories of them.

#include <algorithm>
#include <atomic>
#include <array>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tvr/tvr.hpp"

namespace fs = std::filesystem;

namespace {

constexpr std::array<int, 5> kSweepBlockSizes{7, 14, 28, 56, 112};

struct Options {
  std::string input;
  std::string output;
  int block_size = 28;
  double iqr_factor = 1.5;
  std::string inpaint = "diffusion";
  bool channel_union = false;
  std::optional<double> floor;
  std::string generator_cmd;

  std::string truth;

  int count = 1;
  double area = 0.04;
  std::string texture = "noise";
  std::string texture_file;
  std::vector<std::string> corners;
  int checker_cell = 1;
  std::vector<double> solid_color{1.0, 0.0, 0.0};
  double min_scale = 1.0;
  std::uint64_t seed = 0;
};

tvr::ResurfaceConfig resurface_config(const Options& o, int block_size) {
  tvr::ResurfaceConfig cfg;
  cfg.detector.block_side = block_size;
  cfg.detector.iqr_factor = o.iqr_factor;
  cfg.detector.absolute_floor = o.floor;
  cfg.channel_union = o.channel_union;
  cfg.inpainter = tvr::parse_inpaint_method(o.inpaint);
  cfg.generator_command = o.generator_cmd;
  cfg.validate();
  return cfg;
}

tvr::PatchSpec patch_spec(const Options& o) {
  tvr::PatchSpec spec;
  spec.count = o.count;
  spec.area_fraction = o.area;
  spec.seed = o.seed;
  spec.min_scale = o.min_scale;
  spec.checker_cell = o.checker_cell;
  if (o.solid_color.size() != 3) throw tvr::DomainError("--solid-color needs three values");
  std::copy(o.solid_color.begin(), o.solid_color.end(), spec.solid_color.begin());
  static const std::map<std::string, tvr::Texture> textures{
      {"noise", tvr::Texture::Noise},
      {"checkerboard", tvr::Texture::Checkerboard},
      {"solid", tvr::Texture::Solid},
      {"image-file", tvr::Texture::ImageFile}};
  spec.texture = textures.at(o.texture);
  spec.texture_file = o.texture_file;
  if (!o.corners.empty()) {
    spec.placement = tvr::Placement::Explicit;
    for (const auto& corner : o.corners) {
      std::array<int, 2> rc{};
      char sep = 0;
      std::istringstream in(corner);
      if (!(in >> rc[0] >> sep >> rc[1]) || sep != ',' || !in.eof()) {
        throw tvr::DomainError("corner '" + corner + "' is not of the form ROW,COL");
      }
      spec.corners.push_back(rc);
    }
  }
  spec.validate();
  return spec;
}

tvr::json sweep_entry(const tvr::ResurfaceResult& result, const tvr::PixelMask* truth) {
  const int nk = result.grid.block_count();
  tvr::json per_channel = tvr::json::array();
  std::set<int> unioned;
  for (int c = 0; c < tvr::kChannels; ++c) {
    std::set<int> blocks;
    for (const auto& f : result.detected)
      if (f.channel == c) blocks.insert(f.block);
    unioned.insert(blocks.begin(), blocks.end());
    per_channel.push_back(blocks);
  }
  tvr::json doc{
      {"block_size", result.grid.block_side},
      {"block_count", nk},
      {"thresholds", result.grid.thresholds},
      {"flagged_blocks", {{"per_channel", std::move(per_channel)}, {"union", unioned}}},
      {"masked_fraction",
       static_cast<double>(result.mask.count()) / static_cast<double>(result.mask.size())},
  };
  doc["detection"] = truth ? tvr::report_to_json(tvr::evaluate_detection(result, *truth))
                           : tvr::json(nullptr);
  return doc;
}

using Job = std::function<void(const fs::path& input, const fs::path& outdir)>;

fs::path truth_for(const Options& o, const fs::path& input, bool batch) {
  if (o.truth.empty()) return {};
  return batch ? fs::path(o.truth) / input.filename() : fs::path(o.truth);
}

// Runs job on one file, or on every *.png of a directory (outputs keyed by
// file stem). Returns the process exit code.
int dispatch(const Options& o, const Job& job) {
  const fs::path input(o.input);
  const fs::path output(o.output);
  std::vector<std::pair<fs::path, fs::path>> work;
  if (fs::is_directory(input)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(input))
      if (entry.is_regular_file() && entry.path().extension() == ".png")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) work.emplace_back(f, output / f.stem());
  } else {
    work.emplace_back(input, output);
  }

  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(work.size(), std::thread::hardware_concurrency()));
  std::vector<std::string> errors(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        fs::create_directories(work[i].second);
        job(work[i].first, work[i].second);
      } catch (const std::exception& e) {
        errors[i] = work[i].first.string() + ": " + e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = 0;
  for (const auto& e : errors) {
    if (e.empty()) continue;
    std::cerr << "tvr: " << e << "\n";
    code = 2;
  }
  return code;
}

void add_io(CLI::App* cmd, Options& o) {
  cmd->add_option("-i,--input", o.input, "Input PNG (8-bit RGB, square) or directory of PNGs")
      ->required();
  cmd->add_option("-o,--output", o.output, "Output directory (created if missing)")->required();
}

void add_detector(CLI::App* cmd, Options& o, bool block_size = true) {
  if (block_size) {
    cmd->add_option("-k,--block-size", o.block_size,
                    "Block side in pixels; must divide the image side")
        ->capture_default_str();
  }
  cmd->add_option("--iqr-factor", o.iqr_factor,
                  "Outlier cutoff is Q3 + factor * (Q3 - Q1) of each channel's block scores")
      ->capture_default_str();
  cmd->add_option("--floor", o.floor, "Never flag blocks scoring at or below this TV (default: off)");
  cmd->add_option("--inpaint", o.inpaint, "Inpainting method")
      ->check(CLI::IsMember({"zero", "mean-fill", "diffusion", "external-bridge"}))
      ->capture_default_str();
  cmd->add_flag("--channel-union", o.channel_union,
                "Mask a block in all channels when any channel flags it");
  cmd->add_option("--generator-cmd", o.generator_cmd,
                  "Shell command for --inpaint external-bridge; receives a workspace directory "
                  "holding cropped.png and mask.png and must write generated.png (workspace root: $" +
                      std::string(tvr::kBridgeTmpEnv) + ")");
}

void add_patch(CLI::App* cmd, Options& o) {
  cmd->add_option("--count", o.count, "Number of patches")->capture_default_str();
  cmd->add_option("--area", o.area, "Total patch area as a fraction of the image area")
      ->capture_default_str();
  cmd->add_option("--texture", o.texture, "Patch texture")
      ->check(CLI::IsMember({"noise", "checkerboard", "solid", "image-file"}))
      ->capture_default_str();
  cmd->add_option("--texture-file", o.texture_file, "PNG used by --texture image-file");
  cmd->add_option("--corner", o.corners,
                  "Explicit top-left corner ROW,COL, once per patch (default: uniform random, "
                  "non-overlapping)");
  cmd->add_option("--checker-cell", o.checker_cell, "Checkerboard cell side in pixels")
      ->capture_default_str();
  cmd->add_option("--solid-color", o.solid_color, "Solid texture colour R G B in [0,1]")
      ->expected(3)
      ->capture_default_str();
  cmd->add_option("--min-scale", o.min_scale,
                  "Scale each patch side by a draw from [min-scale, 1]")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "PRNG seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect and remove localized adversarial patches by block-wise total-variation "
               "outlier masking and inpainting."};
  app.require_subcommand(1);
  Options o;

  auto* resurface = app.add_subcommand(
      "resurface", "Cleanse an image; writes reconstructed.png, cropped.png, mask.png, surface.json");
  add_io(resurface, o);
  add_detector(resurface, o);

  auto* inject = app.add_subcommand("inject", "Stamp synthetic patches; writes patched.png, truth.png");
  add_io(inject, o);
  add_patch(inject, o);

  auto* eval = app.add_subcommand("eval", "Resurface and score against ground truth; writes report.json");
  add_io(eval, o);
  add_detector(eval, o);
  eval->add_option("--truth", o.truth, "Ground-truth PNG from inject (a directory in batch mode)")
      ->required();

  auto* surface = app.add_subcommand("surface", "Export the per-block TV surface; writes surface.json");
  add_io(surface, o);
  add_detector(surface, o);

  auto* sweep = app.add_subcommand(
      "sweep", "Resurface at block sizes 7, 14, 28, 56, 112; writes block-<k>/report.json");
  add_io(sweep, o);
  add_detector(sweep, o, /*block_size=*/false);
  sweep->add_option("--truth", o.truth, "Optional ground-truth PNG; adds detection metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  // Flag values that fail validation are usage errors; everything after this
  // point is processing.
  std::optional<tvr::ResurfaceConfig> cfg;
  std::optional<tvr::PatchSpec> spec;
  try {
    if (inject->parsed()) {
      spec = patch_spec(o);
    } else {
      cfg = resurface_config(o, o.block_size);
    }
  } catch (const tvr::Error& e) {
    std::cerr << "tvr: " << e.what() << "\n";
    return 1;
  }

  const bool batch = fs::is_directory(o.input);
  if (resurface->parsed()) {
    const tvr::Resurfacer run(*cfg);
    return dispatch(o, [&](const fs::path& in, const fs::path& out) {
      const auto result = run(tvr::read_png(in));
      tvr::write_png(out / "reconstructed.png", result.reconstructed);
      tvr::write_png(out / "cropped.png", result.cropped);
      tvr::write_png(out / "mask.png", result.mask);
      tvr::export_surface(result.grid, out / "surface.json");
    });
  }
  if (inject->parsed()) {
    return dispatch(o, [&](const fs::path& in, const fs::path& out) {
      const auto injected = tvr::inject_patches(tvr::read_png(in), *spec);
      tvr::write_png(out / "patched.png", injected.patched);
      tvr::write_truth_png(out / "truth.png", injected.truth);
    });
  }
  if (eval->parsed()) {
    const tvr::Resurfacer run(*cfg);
    return dispatch(o, [&](const fs::path& in, const fs::path& out) {
      const auto truth = tvr::read_truth_png(truth_for(o, in, batch));
      const auto report = tvr::evaluate_detection(run(tvr::read_png(in)), truth);
      tvr::write_json(out / "report.json", tvr::report_to_json(report));
    });
  }
  if (surface->parsed()) {
    return dispatch(o, [&](const fs::path& in, const fs::path& out) {
      const auto blocks = tvr::image_to_block(tvr::read_png(in), cfg->detector.block_side);
      tvr::export_surface(tvr::score_grid(blocks, cfg->detector), out / "surface.json");
    });
  }
  if (sweep->parsed()) {
    std::vector<tvr::Resurfacer> runs;
    for (int k : kSweepBlockSizes) {
      auto sized = *cfg;
      sized.detector.block_side = k;
      runs.emplace_back(std::move(sized));
    }
    return dispatch(o, [&](const fs::path& in, const fs::path& out) {
      const auto image = tvr::read_png(in);
      std::optional<tvr::PixelMask> truth;
      if (!o.truth.empty()) truth = tvr::read_truth_png(truth_for(o, in, batch));
      std::vector<tvr::json> docs;
      for (const auto& run : runs) docs.push_back(sweep_entry(run(image), truth ? &*truth : nullptr));
      for (const auto& doc : docs) {
        const auto dir = out / ("block-" + std::to_string(doc.at("block_size").get<int>()));
        fs::create_directories(dir);
        tvr::write_json(dir / "report.json", doc);
      }
    });
  }
  return 1;
}
