#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tvr/bridge.hpp"
#include "tvr/error.hpp"
#include "tvr/image.hpp"
#include "tvr/total_variation.hpp"

namespace tvr {

enum class InpaintMethod { Zero, MeanFill, Diffusion, ExternalBridge };

inline constexpr std::array<std::pair<std::string_view, InpaintMethod>, 4> kInpaintMethods{{
    {"zero", InpaintMethod::Zero},
    {"mean-fill", InpaintMethod::MeanFill},
    {"diffusion", InpaintMethod::Diffusion},
    {"external-bridge", InpaintMethod::ExternalBridge},
}};

inline std::string_view to_string(InpaintMethod m) {
  for (const auto& [name, method] : kInpaintMethods)
    if (method == m) return name;
  return "unknown";
}

inline InpaintMethod parse_inpaint_method(std::string_view name) {
  for (const auto& [known, method] : kInpaintMethods)
    if (known == name) return method;
  throw DomainError(detail::concat("unknown inpainting method '", name,
                                   "' (expected zero, mean-fill, diffusion or external-bridge)"));
}

/// Stopping rule of the diffusion inpainter.
struct DiffusionLimits {
  double tolerance = 1e-4;
  int max_iterations = 10000;
};

struct ResurfaceConfig {
  DetectorConfig detector;
  /// When set, a block flagged in any channel is masked in all three.
  bool channel_union = false;
  InpaintMethod inpainter = InpaintMethod::Diffusion;
  /// Shell command for InpaintMethod::ExternalBridge; receives the workspace path.
  std::string generator_command;
  DiffusionLimits diffusion;

  void validate() const {
    detector.validate();
    if (inpainter == InpaintMethod::ExternalBridge && generator_command.empty()) {
      throw DomainError("the external-bridge inpainter needs a generator command");
    }
  }
};

struct ResurfaceResult {
  ImageTensor cropped;
  Mask mask;
  ImageTensor generated;
  ImageTensor reconstructed;
  TvGrid grid;
  /// Raw detector output before any channel union.
  FlagSet detected;
};

/// Zeroes every flagged block (in all channels when channel_union is set) and
/// returns the cropped image together with the matching binary mask.
inline std::pair<ImageTensor, Mask> crop_and_mask(const ImageTensor& x, const FlagSet& flags,
                                                  const ResurfaceConfig& cfg) {
  const int k = cfg.detector.block_side;
  BlockSet blocks = image_to_block(x, k);
  const int nk = blocks.block_count();
  std::vector<std::uint8_t> block_flags(static_cast<std::size_t>(kChannels) * nk, 0);
  for (const auto& f : flags) {
    if (f.channel < 0 || f.channel >= kChannels || f.block < 0 || f.block >= nk) {
      throw IndexError(detail::concat("flag (channel ", f.channel, ", block ", f.block,
                                      ") is outside the ", kChannels, "x", nk, " block grid"));
    }
    if (cfg.channel_union) {
      for (int c = 0; c < kChannels; ++c) block_flags[static_cast<std::size_t>(c) * nk + f.block] = 1;
    } else {
      block_flags[static_cast<std::size_t>(f.channel) * nk + f.block] = 1;
    }
  }

  std::vector<double> data(blocks.values().begin(), blocks.values().end());
  const std::size_t area = static_cast<std::size_t>(k) * k;
  for (std::size_t cb = 0; cb < block_flags.size(); ++cb) {
    if (block_flags[cb]) std::fill_n(data.begin() + static_cast<std::ptrdiff_t>(cb * area), area, 0.0);
  }
  ImageTensor cropped = block_to_image(BlockSet(k, nk, std::move(data)));
  Mask mask = mask_to_image(MaskSet::from_block_flags(k, nk, block_flags));
  return {std::move(cropped), std::move(mask)};
}

namespace detail {

inline void check_same_shape(const ImageTensor& x, const Mask& m) {
  if (x.side() != m.side()) {
    throw ShapeError(concat("image side ", x.side(), " does not match mask side ", m.side()));
  }
}

// Per-channel mean of unmasked pixels; 0 for a channel that is fully masked.
inline std::array<double, kChannels> unmasked_means(const ImageTensor& x, const Mask& m) {
  std::array<double, kChannels> means{};
  const std::size_t plane = static_cast<std::size_t>(x.side()) * x.side();
  for (int c = 0; c < kChannels; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t idx = c * plane + p;
      if (!m.values()[idx]) {
        sum += x.values()[idx];
        ++count;
      }
    }
    means[c] = count ? sum / static_cast<double>(count) : 0.0;
  }
  return means;
}

inline std::vector<double> mean_fill(const ImageTensor& x, const Mask& m) {
  const auto means = unmasked_means(x, m);
  std::vector<double> out(x.values().begin(), x.values().end());
  const std::size_t plane = static_cast<std::size_t>(x.side()) * x.side();
  for (std::size_t idx = 0; idx < out.size(); ++idx)
    if (m.values()[idx]) out[idx] = means[idx / plane];
  return out;
}

// Gauss-Seidel sweeps in raster order: each masked pixel becomes the mean of
// its in-image 4-neighbours while unmasked pixels stay fixed. Starts from the
// mean fill and stops once the largest change in a sweep drops below
// tolerance or the iteration cap is hit.
inline std::vector<double> diffuse(const ImageTensor& x, const Mask& m,
                                   const DiffusionLimits& limits) {
  std::vector<double> out = mean_fill(x, m);
  const int n = x.side();
  std::vector<std::size_t> holes;
  for (std::size_t idx = 0; idx < out.size(); ++idx)
    if (m.values()[idx]) holes.push_back(idx);
  if (holes.empty()) return out;

  const std::size_t plane = static_cast<std::size_t>(n) * n;
  for (int iter = 0; iter < limits.max_iterations; ++iter) {
    double max_update = 0.0;
    for (const std::size_t idx : holes) {
      const std::size_t p = idx % plane;
      const int row = static_cast<int>(p / n);
      const int col = static_cast<int>(p % n);
      double sum = 0.0;
      int count = 0;
      if (row > 0) { sum += out[idx - n]; ++count; }
      if (row + 1 < n) { sum += out[idx + n]; ++count; }
      if (col > 0) { sum += out[idx - 1]; ++count; }
      if (col + 1 < n) { sum += out[idx + 1]; ++count; }
      if (count == 0) continue;
      const double next = sum / count;
      max_update = std::max(max_update, std::abs(next - out[idx]));
      out[idx] = next;
    }
    if (max_update < limits.tolerance) break;
  }
  return out;
}

}  // namespace detail

/// Produces the generated image x_g. Only its values under the mask are used
/// by compose().
inline ImageTensor inpaint(const ImageTensor& cropped, const Mask& mask, InpaintMethod method,
                           const std::string& generator_command = {},
                           const DiffusionLimits& limits = {}) {
  detail::check_same_shape(cropped, mask);
  for (std::size_t idx = 0; idx < cropped.size(); ++idx) {
    if (mask.values()[idx] && cropped.values()[idx] != 0.0) {
      throw DomainError(detail::concat("cropped image is nonzero under the mask at flat index ",
                                       idx));
    }
  }
  switch (method) {
    case InpaintMethod::Zero:
      return cropped;
    case InpaintMethod::MeanFill:
      return ImageTensor(cropped.side(), detail::mean_fill(cropped, mask));
    case InpaintMethod::Diffusion:
      return ImageTensor(cropped.side(), detail::diffuse(cropped, mask, limits));
    case InpaintMethod::ExternalBridge:
      return run_external_generator(cropped, mask, generator_command);
  }
  throw DomainError("unregistered inpainting method");
}

/// x_r = (1 - m) * x_c + m * x_g, entrywise, clamped to [0,1].
inline ImageTensor compose(const ImageTensor& cropped, const ImageTensor& generated,
                           const Mask& mask) {
  if (cropped.side() != generated.side() || cropped.side() != mask.side()) {
    throw ShapeError(detail::concat("compose needs equal shapes; got sides ", cropped.side(),
                                    ", ", generated.side(), ", ", mask.side()));
  }
  std::vector<double> out(cropped.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = mask.values()[i];
    out[i] = std::clamp((1.0 - m) * cropped.values()[i] + m * generated.values()[i], 0.0, 1.0);
  }
  return ImageTensor(cropped.side(), std::move(out));
}

/// The full cleansing pipeline: tile, score, flag, crop, inpaint, compose.
/// Immutable once built; one instance may serve many threads.
class Resurfacer {
 public:
  explicit Resurfacer(ResurfaceConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const ResurfaceConfig& config() const { return cfg_; }

  ResurfaceResult operator()(const ImageTensor& x) const {
    TvGrid grid = score_grid(image_to_block(x, cfg_.detector.block_side), cfg_.detector);
    FlagSet detected = flag_blocks(grid);
    auto [cropped, mask] = crop_and_mask(x, detected, cfg_);
    ImageTensor generated =
        inpaint(cropped, mask, cfg_.inpainter, cfg_.generator_command, cfg_.diffusion);
    ImageTensor reconstructed = compose(cropped, generated, mask);
    return ResurfaceResult{std::move(cropped),       std::move(mask), std::move(generated),
                           std::move(reconstructed), std::move(grid), std::move(detected)};
  }

 private:
  ResurfaceConfig cfg_;
};

inline ResurfaceResult resurface(const ImageTensor& x, const ResurfaceConfig& cfg) {
  return Resurfacer(cfg)(x);
}

}  // namespace tvr
