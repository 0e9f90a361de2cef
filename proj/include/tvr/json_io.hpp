#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "tvr/error.hpp"
#include "tvr/harness.hpp"
#include "tvr/png_io.hpp"
#include "tvr/total_variation.hpp"

namespace tvr {

using json = nlohmann::json;

// Surface layout:
//   {"block_size": k, "nrow": r, "channels": [[r x r] x 3],
//    "thresholds": [3], "mean": [r x r]}
// Matrices are lists of grid rows; cell (i, j) holds block i * r + j.

inline json surface_to_json(const TvGrid& grid) {
  const int r = grid.blocks_per_row;
  const auto matrix = [r](auto&& cell) {
    json rows = json::array();
    for (int i = 0; i < r; ++i) {
      json row = json::array();
      for (int j = 0; j < r; ++j) row.push_back(cell(i * r + j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  json channels = json::array();
  for (int c = 0; c < kChannels; ++c)
    channels.push_back(matrix([&](int b) { return grid.score(c, b); }));
  return json{
      {"block_size", grid.block_side},
      {"nrow", r},
      {"channels", std::move(channels)},
      {"thresholds", grid.thresholds},
      {"mean", matrix([&](int b) {
         double sum = 0.0;
         for (int c = 0; c < kChannels; ++c) sum += grid.score(c, b);
         return sum / kChannels;
       })},
  };
}

/// Rebuilds scores and thresholds from a surface document. Quartiles are not
/// part of the format and come back zeroed.
inline TvGrid surface_from_json(const json& doc) {
  try {
    TvGrid grid;
    grid.block_side = doc.at("block_size").get<int>();
    grid.blocks_per_row = doc.at("nrow").get<int>();
    const int r = grid.blocks_per_row;
    const auto& channels = doc.at("channels");
    if (r < 1 || channels.size() != kChannels) {
      throw ShapeError("surface document needs nrow >= 1 and three channel matrices");
    }
    grid.scores.reserve(static_cast<std::size_t>(kChannels) * r * r);
    for (const auto& m : channels) {
      if (m.size() != static_cast<std::size_t>(r)) throw ShapeError("channel matrix has wrong row count");
      for (const auto& row : m) {
        if (row.size() != static_cast<std::size_t>(r)) throw ShapeError("channel matrix has wrong column count");
        for (const auto& v : row) grid.scores.push_back(v.get<double>());
      }
    }
    grid.thresholds = doc.at("thresholds").get<std::array<double, kChannels>>();
    return grid;
  } catch (const json::exception& e) {
    throw IoError(detail::concat("malformed surface document: ", e.what()));
  }
}

inline json report_to_json(const DetectionReport& rep) {
  json per_channel = json::array();
  for (const auto& s : rep.flagged_per_channel) per_channel.push_back(s);
  return json{
      {"block_size", rep.block_size},
      {"true_patch_blocks", rep.true_patch_blocks},
      {"straddling_blocks", rep.straddling_blocks},
      {"flagged_blocks", {{"per_channel", std::move(per_channel)}, {"union", rep.flagged_union}}},
      {"precision", rep.precision},
      {"recall", rep.recall},
      {"iou", rep.iou},
      {"channel_recall", rep.channel_recall},
      {"residual_overlap", rep.residual_overlap},
  };
}

inline DetectionReport report_from_json(const json& doc) {
  try {
    DetectionReport rep;
    rep.block_size = doc.at("block_size").get<int>();
    rep.true_patch_blocks = doc.at("true_patch_blocks").get<std::set<int>>();
    rep.straddling_blocks = doc.at("straddling_blocks").get<std::set<int>>();
    const auto& flagged = doc.at("flagged_blocks");
    rep.flagged_per_channel =
        flagged.at("per_channel").get<std::array<std::set<int>, kChannels>>();
    rep.flagged_union = flagged.at("union").get<std::set<int>>();
    rep.precision = doc.at("precision").get<double>();
    rep.recall = doc.at("recall").get<double>();
    rep.iou = doc.at("iou").get<double>();
    rep.channel_recall = doc.at("channel_recall").get<std::array<double, kChannels>>();
    rep.residual_overlap = doc.at("residual_overlap").get<double>();
    return rep;
  } catch (const json::exception& e) {
    throw IoError(detail::concat("malformed report document: ", e.what()));
  }
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(detail::concat("cannot open ", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(detail::concat(path.string(), ": ", e.what()));
  }
}

inline void write_json(const std::filesystem::path& path, const json& doc) {
  atomic_write(path, doc.dump(2) + "\n");
}

inline void export_surface(const TvGrid& grid, const std::filesystem::path& path) {
  write_json(path, surface_to_json(grid));
}

inline TvGrid import_surface(const std::filesystem::path& path) {
  return surface_from_json(read_json(path));
}

}  // namespace tvr
