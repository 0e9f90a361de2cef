#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "tvr/error.hpp"
#include "tvr/image.hpp"

namespace tvr {

/// Detector parameters. Only the isotropic l2 norm raised to q = 1 is
/// supported; the norm fields exist so that other requests fail loudly.
struct DetectorConfig {
  int block_side = 28;
  double iqr_factor = 1.5;
  /// Blocks scoring at or below this value are never flagged. Disabled when empty.
  std::optional<double> absolute_floor;
  int norm_p = 2;
  int norm_q = 1;

  void validate() const {
    if (block_side < 2) {
      throw DomainError(detail::concat("block side must be >= 2 for TV scoring, got ",
                                       block_side));
    }
    if (!(iqr_factor > 0.0) || !std::isfinite(iqr_factor)) {
      throw DomainError(detail::concat("iqr factor must be a positive finite value, got ",
                                       iqr_factor));
    }
    if (absolute_floor && !(*absolute_floor >= 0.0 && std::isfinite(*absolute_floor))) {
      throw DomainError(detail::concat("absolute floor must be finite and >= 0, got ",
                                       *absolute_floor));
    }
    if (norm_p != 2 || norm_q != 1) {
      throw DomainError(detail::concat("only the l2 norm with exponent q=1 is supported, got p=",
                                       norm_p, " q=", norm_q));
    }
  }
};

/// Total variation of one single-channel k x k block: the sum of
/// |a - b| over every horizontally or vertically adjacent pair inside the
/// block, 2k(k-1) pairs in all. For scalar intensities the l2 norm of the
/// difference is its absolute value.
inline double tv_score(std::span<const double> block, int block_side) {
  const int k = block_side;
  if (k < 2) {
    throw DomainError(detail::concat("TV of a ", k, "x", k, " block is degenerate; need k >= 2"));
  }
  if (block.size() != static_cast<std::size_t>(k) * k) {
    throw ShapeError(detail::concat("block of side ", k, " needs ", k * k, " values, got ",
                                    block.size()));
  }
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    const double* row = block.data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j + 1 < k; ++j) total += std::abs(row[j + 1] - row[j]);
  }
  for (int i = 0; i + 1 < k; ++i) {
    const double* row = block.data() + static_cast<std::size_t>(i) * k;
    const double* next = row + k;
    for (int j = 0; j < k; ++j) total += std::abs(next[j] - row[j]);
  }
  return total;
}

/// Percentile by linear interpolation between order statistics at position
/// p * (n - 1) of the sorted sample.
inline double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw StatisticsError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError(detail::concat("quantile level ", p, " outside [0,1]"));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct OutlierCutoff {
  double q1 = 0.0;
  double q3 = 0.0;
  double threshold = 0.0;
};

/// Quartiles of one channel's block scores and the cutoff
/// Q3 + iqr_factor * (Q3 - Q1) above which a block counts as an outlier.
inline OutlierCutoff outlier_cutoff(std::span<const double> scores, double iqr_factor) {
  OutlierCutoff cut;
  cut.q1 = quantile(scores, 0.25);
  cut.q3 = quantile(scores, 0.75);
  cut.threshold = cut.q3 + iqr_factor * (cut.q3 - cut.q1);
  return cut;
}

/// Per-channel, per-block TV scores plus the per-channel outlier cutoff.
struct TvGrid {
  int block_side = 0;
  int blocks_per_row = 0;
  /// scores[c * block_count() + b]
  std::vector<double> scores;
  std::array<double, kChannels> q1{};
  std::array<double, kChannels> q3{};
  std::array<double, kChannels> thresholds{};
  double iqr_factor = 1.5;
  std::optional<double> absolute_floor;

  int block_count() const { return blocks_per_row * blocks_per_row; }
  double score(int c, int b) const {
    return scores[static_cast<std::size_t>(c) * block_count() + b];
  }
  std::span<const double> channel_scores(int c) const {
    return std::span<const double>(scores).subspan(static_cast<std::size_t>(c) * block_count(),
                                                   block_count());
  }
};

/// A flagged block of one channel.
struct BlockRef {
  int channel = 0;
  int block = 0;
  auto operator<=>(const BlockRef&) const = default;
};

using FlagSet = std::set<BlockRef>;

/// Scores every block and derives each channel's outlier cutoff from that
/// channel's scores.
inline TvGrid score_grid(const BlockSet& blocks, const DetectorConfig& cfg) {
  cfg.validate();
  if (blocks.block_side() != cfg.block_side) {
    throw ShapeError(detail::concat("block set has block side ", blocks.block_side(),
                                    " but the detector is configured for ", cfg.block_side));
  }
  const int nk = blocks.block_count();
  if (nk < 4) {
    throw StatisticsError(detail::concat("only ", nk,
                                         " blocks per channel; quartiles need at least 4"));
  }
  TvGrid grid;
  grid.block_side = blocks.block_side();
  grid.blocks_per_row = blocks.blocks_per_row();
  grid.iqr_factor = cfg.iqr_factor;
  grid.absolute_floor = cfg.absolute_floor;
  grid.scores.resize(static_cast<std::size_t>(kChannels) * nk);
  for (int c = 0; c < kChannels; ++c) {
    for (int b = 0; b < nk; ++b) {
      grid.scores[static_cast<std::size_t>(c) * nk + b] =
          tv_score(blocks.block(c, b), blocks.block_side());
    }
    const auto cut = outlier_cutoff(grid.channel_scores(c), cfg.iqr_factor);
    grid.q1[c] = cut.q1;
    grid.q3[c] = cut.q3;
    grid.thresholds[c] = cut.threshold;
  }
  return grid;
}

/// Blocks whose score strictly exceeds their channel's cutoff (and the
/// absolute floor, when one is set). Only the high tail is treated as suspect.
inline FlagSet flag_blocks(const TvGrid& grid) {
  FlagSet flags;
  const int nk = grid.block_count();
  for (int c = 0; c < kChannels; ++c) {
    for (int b = 0; b < nk; ++b) {
      const double s = grid.score(c, b);
      if (s <= grid.thresholds[c]) continue;
      if (grid.absolute_floor && s <= *grid.absolute_floor) continue;
      flags.insert({c, b});
    }
  }
  return flags;
}

}  // namespace tvr
