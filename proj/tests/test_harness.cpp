#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "tvr/harness.hpp"
#include "tvr/json_io.hpp"

using namespace tvr;

namespace {

ResurfaceConfig mean_fill(int k = 28) {
  ResurfaceConfig cfg;
  cfg.detector.block_side = k;
  cfg.inpainter = InpaintMethod::MeanFill;
  return cfg;
}

PatchSpec aligned(std::vector<std::array<int, 2>> corners, double area) {
  PatchSpec spec;
  spec.count = static_cast<int>(corners.size());
  spec.area_fraction = area;
  spec.placement = Placement::Explicit;
  spec.corners = std::move(corners);
  return spec;
}

}  // namespace

TEST(InjectTest, SinglePatchSideFollowsAreaFraction) {
  PatchSpec spec;
  spec.area_fraction = 0.04;
  EXPECT_EQ(nominal_patch_side(224, spec), 45);
  const auto out = inject_patches(ImageTensor::filled(224, 0.5), spec);
  ASSERT_EQ(out.patches.size(), 1u);
  EXPECT_EQ(out.patches[0].side, 45);
  EXPECT_EQ(out.truth.count(), 45u * 45u);
}

TEST(InjectTest, MultiPatchSplitsAreaEvenly) {
  PatchSpec spec;
  spec.count = 4;
  spec.area_fraction = 0.08;
  spec.seed = 3;
  const int n = 224;
  const auto out = inject_patches(ImageTensor::filled(n, 0.5), spec);
  ASSERT_EQ(out.patches.size(), 4u);
  const int side = static_cast<int>(std::lround(n * std::sqrt(0.02)));
  for (const auto& p : out.patches) EXPECT_EQ(p.side, side);
  // Each patch is within one pixel of side of 0.02 n^2.
  EXPECT_NEAR(side * side, 0.02 * n * n, 2.0 * side);
  EXPECT_EQ(out.truth.count(), 4u * side * side);
}

TEST(InjectTest, DeterministicUnderFixedSeed) {
  PatchSpec spec;
  spec.count = 3;
  spec.area_fraction = 0.12;
  spec.seed = 1234;
  spec.min_scale = 0.7;
  std::mt19937_64 rng(8);
  const auto x = oracle::random_image(rng, 224);
  const auto a = inject_patches(x, spec);
  const auto b = inject_patches(x, spec);
  EXPECT_EQ(a.patched, b.patched);
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_EQ(a.patches, b.patches);
  spec.seed = 1235;
  EXPECT_NE(inject_patches(x, spec).patched, a.patched);
}

TEST(InjectTest, PatchesAreDisjointAndInside) {
  PatchSpec spec;
  spec.count = 6;
  spec.area_fraction = 0.3;
  spec.min_scale = 0.7;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    const auto out = inject_patches(ImageTensor::filled(112, 0.2), spec);
    std::size_t area = 0;
    for (const auto& p : out.patches) {
      EXPECT_GE(p.row, 0);
      EXPECT_LE(p.row + p.side, 112);
      EXPECT_LE(p.col + p.side, 112);
      area += static_cast<std::size_t>(p.side) * p.side;
    }
    EXPECT_EQ(out.truth.count(), area);  // disjoint iff no pixel is counted twice
  }
}

TEST(InjectTest, ScaleJitterStaysInRange) {
  PatchSpec spec;
  spec.area_fraction = 0.1;
  spec.min_scale = 0.7;
  const int base = nominal_patch_side(224, spec);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    spec.seed = seed;
    const int side = inject_patches(ImageTensor::filled(224, 0.5), spec).patches[0].side;
    EXPECT_GE(side, std::lround(base * 0.7));
    EXPECT_LE(side, base);
  }
}

TEST(InjectTest, PlacementErrors) {
  PatchSpec spec;
  spec.count = 2;
  spec.area_fraction = 0.9;  // two patches of side ~0.67 n never fit
  EXPECT_THROW(inject_patches(ImageTensor::filled(64, 0.5), spec), PlacementError);
  auto overlap = aligned({{0, 0}, {10, 10}}, 0.2);
  EXPECT_THROW(inject_patches(ImageTensor::filled(64, 0.5), overlap), PlacementError);
  auto outside = aligned({{60, 60}}, 0.1);
  EXPECT_THROW(inject_patches(ImageTensor::filled(64, 0.5), outside), PlacementError);
  spec = {};
  spec.area_fraction = 1.0;
  EXPECT_THROW(inject_patches(ImageTensor::filled(64, 0.5), spec), DomainError);
}

TEST(InjectTest, Textures) {
  auto spec = aligned({{8, 8}}, 0.25);  // side 8 in a 16 image
  spec.texture = Texture::Solid;
  spec.solid_color = {0.25, 0.5, 0.75};
  const auto solid = inject_patches(ImageTensor::filled(16, 0.0), spec).patched;
  EXPECT_EQ(solid(0, 8, 8), 0.25);
  EXPECT_EQ(solid(2, 15, 15), 0.75);
  EXPECT_EQ(solid(1, 7, 7), 0.0);

  spec.texture = Texture::Checkerboard;
  spec.checker_cell = 2;
  const auto board = inject_patches(ImageTensor::filled(16, 0.5), spec).patched;
  EXPECT_EQ(board(0, 8, 8), 1.0);
  EXPECT_EQ(board(0, 8, 9), 1.0);
  EXPECT_EQ(board(0, 8, 10), 0.0);
  EXPECT_EQ(board(0, 10, 10), 1.0);
}

TEST(InjectTest, ImageFileTexture) {
  const auto path = std::filesystem::temp_directory_path() / "tvr_texture_test.png";
  std::vector<double> data(3 * 4 * 4, 0.0);
  for (int c = 0; c < 3; ++c) data[c * 16 + 0] = 1.0;  // top-left pixel white
  write_png(path, ImageTensor(4, data));
  auto spec = aligned({{0, 0}}, 0.25);
  spec.texture = Texture::ImageFile;
  spec.texture_file = path;
  const auto out = inject_patches(ImageTensor::filled(16, 0.5), spec).patched;
  EXPECT_EQ(out(0, 0, 0), 1.0);
  EXPECT_EQ(out(0, 1, 1), 1.0);  // nearest-neighbour upscale by 2
  EXPECT_EQ(out(0, 2, 2), 0.0);
  std::filesystem::remove(path);
}

TEST(EvaluateTest, PerfectDetection) {
  const auto injected =
      inject_patches(ImageTensor::filled(224, 0.5), aligned({{56, 84}}, 784.0 / (224 * 224)));
  const auto result = resurface(injected.patched, mean_fill());
  const auto rep = evaluate_detection(result, injected.truth);
  EXPECT_EQ(rep.true_patch_blocks, (std::set<int>{2 * 8 + 3}));
  EXPECT_TRUE(rep.straddling_blocks.empty());
  EXPECT_EQ(rep.precision, 1.0);
  EXPECT_EQ(rep.recall, 1.0);
  EXPECT_EQ(rep.iou, 1.0);
  EXPECT_EQ(rep.residual_overlap, 0.0);
}

TEST(EvaluateTest, EmptyFlagsWithPatch) {
  const auto x = ImageTensor::filled(224, 0.5);
  const auto result = resurface(x, mean_fill());
  PixelMask truth{224, std::vector<std::uint8_t>(224 * 224, 0)};
  for (int r = 10; r < 40; ++r)
    for (int c = 10; c < 40; ++c) truth.data[r * 224 + c] = 1;
  const auto rep = evaluate_detection(result, truth);
  EXPECT_EQ(rep.recall, 0.0);
  EXPECT_EQ(rep.residual_overlap, 1.0);
  EXPECT_EQ(rep.precision, 1.0);
  EXPECT_EQ(rep.iou, 0.0);
  EXPECT_EQ(rep.true_patch_blocks, (std::set<int>{0, 1, 8, 9}));
  EXPECT_EQ(rep.straddling_blocks, rep.true_patch_blocks);
}

TEST(EvaluateTest, ShapeMismatch) {
  const auto result = resurface(ImageTensor::filled(224, 0.5), mean_fill());
  EXPECT_THROW(evaluate_detection(result, PixelMask{112, std::vector<std::uint8_t>(112 * 112)}),
               ShapeError);
}

TEST(EvaluateTest, ReportAlgebraOnRandomPatches) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    PatchSpec spec;
    spec.count = 1 + trial % 4;
    spec.area_fraction = 0.04 + 0.02 * (trial % 5);
    spec.seed = trial;
    const auto x = oracle::random_image(rng, 112);
    const auto injected = inject_patches(x, spec);
    const auto rep = evaluate_detection(resurface(injected.patched, mean_fill(14)), injected.truth);
    const double hit = static_cast<double>(std::count_if(
        rep.flagged_union.begin(), rep.flagged_union.end(),
        [&](int b) { return rep.true_patch_blocks.count(b) > 0; }));
    if (!rep.flagged_union.empty()) {
      EXPECT_NEAR(rep.precision * rep.flagged_union.size(), hit, 1e-12);
    }
    EXPECT_NEAR(rep.recall * rep.true_patch_blocks.size(), hit, 1e-12);
    for (double v : {rep.precision, rep.recall, rep.iou, rep.residual_overlap}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(SurfaceTest, ConstantImageExportsZeros) {
  const auto grid = score_grid(image_to_block(ImageTensor::filled(224, 0.5), 28), DetectorConfig{});
  const auto doc = surface_to_json(grid);
  EXPECT_EQ(doc.at("block_size"), 28);
  EXPECT_EQ(doc.at("nrow"), 8);
  for (const auto& m : doc.at("channels"))
    for (const auto& row : m)
      for (const auto& v : row) EXPECT_EQ(v.get<double>(), 0.0);
  for (const auto& t : doc.at("thresholds")) EXPECT_EQ(t.get<double>(), 0.0);
  EXPECT_EQ(doc.at("mean").size(), 8u);
}

TEST(SurfaceTest, MeanMatrixPeaksAtNoiseBlock) {
  const auto x = oracle::noise_block_image(224, 28, 0.5, {{2, 6}}, 5);
  const auto doc = surface_to_json(score_grid(image_to_block(x, 28), DetectorConfig{}));
  const auto& mean = doc.at("mean");
  int best_r = -1, best_c = -1;
  double best = -1.0;
  int ties = 0;
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      const double v = mean[r][c].get<double>();
      if (v > best) { best = v; best_r = r; best_c = c; ties = 0; }
      else if (v == best) ++ties;
    }
  EXPECT_EQ(best_r, 2);
  EXPECT_EQ(best_c, 6);
  EXPECT_EQ(ties, 0);
}

TEST(SurfaceTest, FileRoundTrip) {
  std::mt19937_64 rng(6);
  DetectorConfig cfg;
  cfg.block_side = 14;
  const auto grid = score_grid(image_to_block(oracle::random_image(rng, 112), 14), cfg);
  const auto path = std::filesystem::temp_directory_path() / "tvr_surface_test.json";
  export_surface(grid, path);
  const auto back = import_surface(path);
  EXPECT_EQ(back.block_side, 14);
  EXPECT_EQ(back.blocks_per_row, 8);
  ASSERT_EQ(back.scores.size(), grid.scores.size());
  for (std::size_t i = 0; i < grid.scores.size(); ++i) EXPECT_NEAR(back.scores[i], grid.scores[i], 1e-9);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(back.thresholds[c], grid.thresholds[c], 1e-9);
  std::filesystem::remove(path);
}

TEST(SurfaceTest, MalformedDocument) {
  EXPECT_THROW(surface_from_json(json{{"block_size", 2}}), IoError);
  EXPECT_THROW(surface_from_json(json{{"block_size", 2}, {"nrow", 2}, {"channels", json::array()},
                                      {"thresholds", {0, 0, 0}}}),
               ShapeError);
}

TEST(ReportJsonTest, RoundTrip) {
  PatchSpec spec;
  spec.count = 2;
  spec.area_fraction = 0.08;
  spec.seed = 5;
  std::mt19937_64 rng(2);
  const auto injected = inject_patches(oracle::random_image(rng, 224), spec);
  const auto rep = evaluate_detection(resurface(injected.patched, mean_fill()), injected.truth);
  const auto text = report_to_json(rep).dump();
  EXPECT_EQ(report_from_json(json::parse(text)), rep);
  EXPECT_EQ(report_to_json(report_from_json(json::parse(text))).dump(), text);
}

TEST(TruthPngTest, RoundTripAndValidation) {
  const auto path = std::filesystem::temp_directory_path() / "tvr_truth_test.png";
  PixelMask truth{8, std::vector<std::uint8_t>(64, 0)};
  truth.data[9] = truth.data[10] = 1;
  write_truth_png(path, truth);
  EXPECT_EQ(read_truth_png(path), truth);
  write_png(path, ImageTensor::filled(8, 0.5));
  EXPECT_THROW(read_truth_png(path), DomainError);
  std::filesystem::remove(path);
}
