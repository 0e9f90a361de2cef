#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "tvr/error.hpp"
#include "tvr/image.hpp"
#include "tvr/png_io.hpp"
#include "tvr/resurface.hpp"

namespace tvr {

/// Seeded generator with draws defined bit-for-bit here rather than by the
/// standard library's distributions, so runs reproduce across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  int integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

enum class Placement { UniformRandom, Explicit };
enum class Texture { Noise, Checkerboard, Solid, ImageFile };

/// Synthetic patch description. The total area fraction is split evenly
/// across count square patches.
struct PatchSpec {
  int count = 1;
  double area_fraction = 0.04;
  Placement placement = Placement::UniformRandom;
  /// (row, col) top-left corners, one per patch, for Placement::Explicit.
  std::vector<std::array<int, 2>> corners;
  Texture texture = Texture::Noise;
  std::array<double, kChannels> solid_color{1.0, 0.0, 0.0};
  int checker_cell = 1;
  std::filesystem::path texture_file;
  std::uint64_t seed = 0;
  /// Each patch side is scaled by a draw from [min_scale, 1]; 1 disables jitter.
  double min_scale = 1.0;

  double per_patch_area() const { return area_fraction / count; }

  void validate() const {
    if (count < 1) throw DomainError(detail::concat("patch count must be >= 1, got ", count));
    if (!(area_fraction > 0.0 && area_fraction < 1.0)) {
      throw DomainError(detail::concat("area fraction must lie in (0,1), got ", area_fraction));
    }
    if (!(min_scale > 0.0 && min_scale <= 1.0)) {
      throw DomainError(detail::concat("min scale must lie in (0,1], got ", min_scale));
    }
    if (placement == Placement::Explicit && corners.size() != static_cast<std::size_t>(count)) {
      throw DomainError(detail::concat("explicit placement needs ", count, " corners, got ",
                                       corners.size()));
    }
    if (texture == Texture::Checkerboard && checker_cell < 1) {
      throw DomainError("checkerboard cell must be >= 1");
    }
    if (texture == Texture::ImageFile && texture_file.empty()) {
      throw DomainError("image-file texture needs a texture file");
    }
    for (double v : solid_color) {
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("solid colour components must lie in [0,1]");
    }
  }
};

/// Channel-agnostic pixel-level binary mask, n x n, row-major.
struct PixelMask {
  int side = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t operator()(int row, int col) const {
    return data[static_cast<std::size_t>(row) * side + col];
  }
  std::size_t count() const {
    std::size_t total = 0;
    for (auto v : data) total += v;
    return total;
  }
  friend bool operator==(const PixelMask&, const PixelMask&) = default;
};

struct PatchPlacement {
  int row = 0;
  int col = 0;
  int side = 0;
  friend bool operator==(const PatchPlacement&, const PatchPlacement&) = default;
};

struct InjectedImage {
  ImageTensor patched;
  PixelMask truth;
  std::vector<PatchPlacement> patches;
};

/// Nominal patch side round(n * sqrt(area_fraction / count)).
inline int nominal_patch_side(int image_side, const PatchSpec& spec) {
  return static_cast<int>(std::lround(image_side * std::sqrt(spec.per_patch_area())));
}

namespace detail {

inline bool overlaps(const PatchPlacement& a, const PatchPlacement& b) {
  return a.row < b.row + b.side && b.row < a.row + a.side && a.col < b.col + b.side &&
         b.col < a.col + a.side;
}

inline std::vector<PatchPlacement> place_patches(int n, const PatchSpec& spec, Rng& rng) {
  const int base = nominal_patch_side(n, spec);
  if (base < 1 || base > n) {
    throw PlacementError(concat("patch side ", base, " does not fit an image of side ", n));
  }
  std::vector<int> sides(spec.count);
  for (auto& s : sides) {
    const double scale = spec.min_scale < 1.0 ? rng.uniform(spec.min_scale, 1.0) : 1.0;
    s = std::max(1, static_cast<int>(std::lround(base * scale)));
  }

  std::vector<PatchPlacement> placed;
  if (spec.placement == Placement::Explicit) {
    for (int p = 0; p < spec.count; ++p) {
      const PatchPlacement cand{spec.corners[p][0], spec.corners[p][1], sides[p]};
      if (cand.row < 0 || cand.col < 0 || cand.row + cand.side > n || cand.col + cand.side > n) {
        throw PlacementError(concat("patch ", p, " at (", cand.row, ",", cand.col, ") of side ",
                                    cand.side, " does not fit an image of side ", n));
      }
      for (const auto& other : placed) {
        if (overlaps(cand, other)) throw PlacementError(concat("patch ", p, " overlaps another"));
      }
      placed.push_back(cand);
    }
    return placed;
  }

  constexpr int kMaxAttempts = 1000;
  int attempts = 0;
  for (int p = 0; p < spec.count; ++p) {
    while (true) {
      if (attempts++ >= kMaxAttempts) {
        throw PlacementError(concat("could not place ", spec.count,
                                    " disjoint patches of side ~", base, " in an image of side ",
                                    n, " after ", kMaxAttempts, " attempts"));
      }
      const PatchPlacement cand{rng.integer(0, n - sides[p]), rng.integer(0, n - sides[p]),
                                sides[p]};
      if (std::none_of(placed.begin(), placed.end(),
                       [&](const auto& other) { return overlaps(cand, other); })) {
        placed.push_back(cand);
        break;
      }
    }
  }
  return placed;
}

}  // namespace detail

/// Stamps square synthetic patches into x. Deterministic for a fixed seed.
inline InjectedImage inject_patches(const ImageTensor& x, const PatchSpec& spec) {
  spec.validate();
  const int n = x.side();
  Rng rng(spec.seed);
  auto patches = detail::place_patches(n, spec, rng);

  std::optional<ImageTensor> texture_image;
  if (spec.texture == Texture::ImageFile) texture_image = read_png(spec.texture_file);

  std::vector<double> data(x.values().begin(), x.values().end());
  PixelMask truth{n, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 0)};
  for (const auto& patch : patches) {
    for (int i = 0; i < patch.side; ++i) {
      for (int j = 0; j < patch.side; ++j) {
        const int row = patch.row + i;
        const int col = patch.col + j;
        truth.data[static_cast<std::size_t>(row) * n + col] = 1;
        for (int c = 0; c < kChannels; ++c) {
          double v = 0.0;
          switch (spec.texture) {
            case Texture::Noise:
              v = rng.uniform();
              break;
            case Texture::Checkerboard:
              v = ((i / spec.checker_cell) + (j / spec.checker_cell)) % 2 == 0 ? 1.0 : 0.0;
              break;
            case Texture::Solid:
              v = spec.solid_color[c];
              break;
            case Texture::ImageFile: {
              const int ts = texture_image->side();
              v = (*texture_image)(c, i * ts / patch.side, j * ts / patch.side);
              break;
            }
          }
          data[x.index(c, row, col)] = v;
        }
      }
    }
  }
  return InjectedImage{ImageTensor(n, std::move(data)), std::move(truth), std::move(patches)};
}

/// Block-level detection quality against pixel-level ground truth.
struct DetectionReport {
  int block_size = 0;
  std::set<int> true_patch_blocks;
  /// True patch blocks that are only partly covered by patch pixels.
  std::set<int> straddling_blocks;
  std::array<std::set<int>, kChannels> flagged_per_channel;
  std::set<int> flagged_union;
  double precision = 0.0;
  double recall = 0.0;
  double iou = 0.0;
  std::array<double, kChannels> channel_recall{};
  double residual_overlap = 0.0;

  friend bool operator==(const DetectionReport&, const DetectionReport&) = default;
};

namespace detail {

inline std::size_t intersection_size(const std::set<int>& a, const std::set<int>& b) {
  std::size_t n = 0;
  for (int v : a) n += b.count(v);
  return n;
}

}  // namespace detail

/// Blocks containing at least one truth pixel are the true patch blocks.
/// Empty flag sets have precision 1, empty truth has recall 1, and IoU of two
/// empty sets is 1.
inline DetectionReport evaluate_detection(const ResurfaceResult& result, const PixelMask& truth) {
  const Mask& mask = result.mask;
  const int n = mask.side();
  if (truth.side != n || truth.data.size() != static_cast<std::size_t>(n) * n) {
    throw ShapeError(detail::concat("ground truth of side ", truth.side,
                                    " does not match mask side ", n));
  }
  const int k = mask.block_side();
  const int per_row = n / k;
  DetectionReport rep;
  rep.block_size = k;

  std::vector<int> covered(static_cast<std::size_t>(per_row) * per_row, 0);
  std::size_t truth_entries = 0;
  std::size_t surviving = 0;
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < n; ++col) {
      if (!truth(r, col)) continue;
      ++covered[static_cast<std::size_t>(r / k) * per_row + col / k];
      for (int c = 0; c < kChannels; ++c) {
        ++truth_entries;
        if (!mask(c, r, col)) ++surviving;
      }
    }
  }
  for (int b = 0; b < per_row * per_row; ++b) {
    if (covered[b] == 0) continue;
    rep.true_patch_blocks.insert(b);
    if (covered[b] < k * k) rep.straddling_blocks.insert(b);
  }
  for (int c = 0; c < kChannels; ++c) {
    for (int b = 0; b < per_row * per_row; ++b) {
      if (mask(c, (b / per_row) * k, (b % per_row) * k)) {
        rep.flagged_per_channel[c].insert(b);
        rep.flagged_union.insert(b);
      }
    }
  }

  const auto& truth_blocks = rep.true_patch_blocks;
  const double hit = static_cast<double>(detail::intersection_size(rep.flagged_union, truth_blocks));
  const double flagged = static_cast<double>(rep.flagged_union.size());
  const double actual = static_cast<double>(truth_blocks.size());
  const double joint = flagged + actual - hit;
  rep.precision = flagged > 0 ? hit / flagged : 1.0;
  rep.recall = actual > 0 ? hit / actual : 1.0;
  rep.iou = joint > 0 ? hit / joint : 1.0;
  for (int c = 0; c < kChannels; ++c) {
    const double ch = static_cast<double>(
        detail::intersection_size(rep.flagged_per_channel[c], truth_blocks));
    rep.channel_recall[c] = actual > 0 ? ch / actual : 1.0;
  }
  rep.residual_overlap =
      truth_entries ? static_cast<double>(surviving) / static_cast<double>(truth_entries) : 0.0;
  return rep;
}

inline PixelMask read_truth_png(const std::filesystem::path& path) {
  const Rgb8 raster = read_rgb8(path);
  if (raster.width != raster.height) {
    throw ShapeError(detail::concat(path.string(), ": ground truth must be square"));
  }
  PixelMask truth{raster.width,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(raster.width) * raster.width)};
  for (std::size_t p = 0; p < truth.data.size(); ++p) {
    const auto* px = &raster.pixels[p * kChannels];
    if (px[0] != px[1] || px[1] != px[2] || (px[0] != 0 && px[0] != 255)) {
      throw DomainError(detail::concat(path.string(), ": ground truth pixel ", p,
                                       " is not pure black or white"));
    }
    truth.data[p] = px[0] ? 1 : 0;
  }
  return truth;
}

inline void write_truth_png(const std::filesystem::path& path, const PixelMask& truth) {
  Rgb8 raster{truth.side, truth.side,
              std::vector<std::uint8_t>(truth.data.size() * kChannels)};
  for (std::size_t p = 0; p < truth.data.size(); ++p)
    std::fill_n(raster.pixels.begin() + static_cast<std::ptrdiff_t>(p * kChannels), kChannels,
                truth.data[p] ? 255 : 0);
  atomic_write(path, encode_rgb8(raster));
}

}  // namespace tvr
