#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tvr/error.hpp"

namespace tvr {

inline constexpr int kChannels = 3;

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

inline void check_unit_interval(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError(concat(what, ": intensity ", v, " at flat index ", i,
                               " lies outside [0,1]"));
    }
  }
}

inline std::vector<std::uint8_t> to_binary(std::span<const double> values, const char* what) {
  std::vector<std::uint8_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 0.0) {
      out[i] = 0;
    } else if (values[i] == 1.0) {
      out[i] = 1;
    } else {
      throw DomainError(concat(what, ": entry ", values[i], " at flat index ", i,
                               " is not binary"));
    }
  }
  return out;
}

// Integer square root for exact perfect-square checks.
inline long isqrt(long v) {
  if (v < 0) return -1;
  long r = static_cast<long>(std::sqrt(static_cast<double>(v)));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

}  // namespace detail

/// A 3 x n x n image with intensities in [0,1], stored channel-major then
/// row-major: value(c, row, col) sits at ((c * n) + row) * n + col.
class ImageTensor {
 public:
  ImageTensor(int side, std::vector<double> data) : side_(side), data_(std::move(data)) {
    if (side_ < 1) {
      throw ShapeError(detail::concat("image side must be >= 1, got ", side_));
    }
    const std::size_t expected = static_cast<std::size_t>(kChannels) * side_ * side_;
    if (data_.size() != expected) {
      throw ShapeError(detail::concat("image of side ", side_, " needs ", expected,
                                      " values, got ", data_.size()));
    }
    detail::check_unit_interval(data_, "image");
  }

  static ImageTensor filled(int side, double value) {
    return ImageTensor(side, std::vector<double>(
                                 static_cast<std::size_t>(kChannels) * side * side, value));
  }

  int side() const { return side_; }
  std::size_t size() const { return data_.size(); }

  double operator()(int c, int row, int col) const { return data_[index(c, row, col)]; }

  std::size_t index(int c, int row, int col) const {
    return (static_cast<std::size_t>(c) * side_ + row) * side_ + col;
  }

  std::span<const double> values() const { return data_; }
  std::span<const double> channel(int c) const {
    return std::span<const double>(data_).subspan(
        static_cast<std::size_t>(c) * side_ * side_, static_cast<std::size_t>(side_) * side_);
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  int side_;
  std::vector<double> data_;
};

/// Image-shaped binary tensor, constant over every block_side x block_side
/// tile of each channel. Same flat layout as ImageTensor.
class Mask {
 public:
  Mask(int side, int block_side, std::vector<std::uint8_t> data)
      : side_(side), block_side_(block_side), data_(std::move(data)) {
    validate();
  }

  Mask(int side, int block_side, std::span<const double> values)
      : Mask(side, block_side, detail::to_binary(values, "mask")) {}

  static Mask zeros(int side, int block_side) {
    return Mask(side, block_side,
                std::vector<std::uint8_t>(static_cast<std::size_t>(kChannels) * side * side, 0));
  }

  int side() const { return side_; }
  int block_side() const { return block_side_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t operator()(int c, int row, int col) const {
    return data_[(static_cast<std::size_t>(c) * side_ + row) * side_ + col];
  }

  std::span<const std::uint8_t> values() const { return data_; }

  std::size_t count() const {
    std::size_t total = 0;
    for (auto v : data_) total += v;
    return total;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  void validate() const {
    if (side_ < 1 || block_side_ < 1 || side_ % block_side_ != 0) {
      throw TilingError(detail::concat("mask side ", side_, " is not tiled by block side ",
                                       block_side_));
    }
    const std::size_t expected = static_cast<std::size_t>(kChannels) * side_ * side_;
    if (data_.size() != expected) {
      throw ShapeError(detail::concat("mask of side ", side_, " needs ", expected,
                                      " values, got ", data_.size()));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (data_[i] > 1) {
        throw DomainError(detail::concat("mask entry at flat index ", i, " is not binary"));
      }
    }
    const int k = block_side_;
    for (int c = 0; c < kChannels; ++c) {
      for (int r = 0; r < side_; ++r) {
        for (int col = 0; col < side_; ++col) {
          if ((*this)(c, r, col) != (*this)(c, r - r % k, col - col % k)) {
            throw DomainError(detail::concat("mask is not constant over the ", k, "x", k,
                                             " tile containing (", c, ",", r, ",", col, ")"));
          }
        }
      }
    }
  }

  int side_;
  int block_side_;
  std::vector<std::uint8_t> data_;
};

/// Channel-major collection of k x k blocks. value(c, b, i, j) sits at
/// ((c * block_count + b) * k + i) * k + j. Blocks are numbered row-major
/// over the block grid, blocks_per_row = n / k of them per grid row.
class BlockSet {
 public:
  BlockSet(int block_side, int block_count, std::vector<double> data)
      : block_side_(block_side), block_count_(block_count), data_(std::move(data)) {
    if (block_side_ < 1) {
      throw ShapeError(detail::concat("block side must be >= 1, got ", block_side_));
    }
    const long root = detail::isqrt(block_count_);
    if (block_count_ < 1 || root * root != block_count_) {
      throw ShapeError(detail::concat("block count ", block_count_,
                                      " does not form a square block grid"));
    }
    blocks_per_row_ = static_cast<int>(root);
    const std::size_t expected =
        static_cast<std::size_t>(kChannels) * block_count_ * block_side_ * block_side_;
    if (data_.size() != expected) {
      throw ShapeError(detail::concat("block set of ", block_count_, " blocks of side ",
                                      block_side_, " needs ", expected, " values, got ",
                                      data_.size()));
    }
    detail::check_unit_interval(data_, "block set");
  }

  int block_side() const { return block_side_; }
  int block_count() const { return block_count_; }
  int blocks_per_row() const { return blocks_per_row_; }
  int image_side() const { return blocks_per_row_ * block_side_; }

  double operator()(int c, int b, int i, int j) const {
    return data_[((static_cast<std::size_t>(c) * block_count_ + b) * block_side_ + i) *
                     block_side_ +
                 j];
  }

  /// The k*k values of one block, row-major.
  std::span<const double> block(int c, int b) const {
    const std::size_t area = static_cast<std::size_t>(block_side_) * block_side_;
    return std::span<const double>(data_).subspan(
        (static_cast<std::size_t>(c) * block_count_ + b) * area, area);
  }

  std::span<const double> values() const { return data_; }

  friend bool operator==(const BlockSet&, const BlockSet&) = default;

 private:
  int block_side_;
  int block_count_;
  int blocks_per_row_ = 0;
  std::vector<double> data_;
};

/// Binary block-granular mask in BlockSet layout. Entries are stored per
/// pixel so the shape mirrors BlockSet, but every (channel, block) is uniform.
class MaskSet {
 public:
  MaskSet(int block_side, int block_count, std::span<const double> values)
      : MaskSet(block_side, block_count, detail::to_binary(values, "mask set")) {}

  MaskSet(int block_side, int block_count, std::vector<std::uint8_t> data)
      : block_side_(block_side), block_count_(block_count), data_(std::move(data)) {
    if (block_side_ < 1) {
      throw ShapeError(detail::concat("block side must be >= 1, got ", block_side_));
    }
    const long root = detail::isqrt(block_count_);
    if (block_count_ < 1 || root * root != block_count_) {
      throw ShapeError(detail::concat("block count ", block_count_,
                                      " does not form a square block grid"));
    }
    blocks_per_row_ = static_cast<int>(root);
    const std::size_t area = static_cast<std::size_t>(block_side_) * block_side_;
    if (data_.size() != static_cast<std::size_t>(kChannels) * block_count_ * area) {
      throw ShapeError(detail::concat("mask set of ", block_count_, " blocks of side ",
                                      block_side_, " has ", data_.size(), " entries"));
    }
    for (std::size_t start = 0; start < data_.size(); start += area) {
      for (std::size_t i = start; i < start + area; ++i) {
        if (data_[i] > 1) {
          throw DomainError(detail::concat("mask set entry at flat index ", i,
                                           " is not binary"));
        }
        if (data_[i] != data_[start]) {
          throw DomainError(detail::concat("mask set block starting at flat index ", start,
                                           " is not uniform"));
        }
      }
    }
  }

  /// Builds a mask set from one flag per (channel, block), flags[c * nk + b].
  static MaskSet from_block_flags(int block_side, int block_count,
                                  std::span<const std::uint8_t> flags) {
    if (flags.size() != static_cast<std::size_t>(kChannels) * block_count) {
      throw ShapeError(detail::concat("expected ", kChannels * block_count,
                                      " block flags, got ", flags.size()));
    }
    const std::size_t area = static_cast<std::size_t>(block_side) * block_side;
    std::vector<std::uint8_t> data;
    data.reserve(flags.size() * area);
    for (auto f : flags) data.insert(data.end(), area, f ? 1 : 0);
    return MaskSet(block_side, block_count, std::move(data));
  }

  int block_side() const { return block_side_; }
  int block_count() const { return block_count_; }
  int blocks_per_row() const { return blocks_per_row_; }
  int image_side() const { return blocks_per_row_ * block_side_; }

  std::uint8_t operator()(int c, int b, int i, int j) const {
    return data_[((static_cast<std::size_t>(c) * block_count_ + b) * block_side_ + i) *
                     block_side_ +
                 j];
  }

  bool flagged(int c, int b) const { return (*this)(c, b, 0, 0) == 1; }

  std::span<const std::uint8_t> values() const { return data_; }

 private:
  int block_side_;
  int block_count_;
  int blocks_per_row_ = 0;
  std::vector<std::uint8_t> data_;
};

namespace detail {

inline void check_tiling(int side, int block_side) {
  if (block_side < 1 || block_side > side || side % block_side != 0) {
    throw TilingError(concat("block side k=", block_side, " does not tile image side n=", side,
                             " (k must satisfy 1 <= k <= n and divide n)"));
  }
}

// Flat image offset of pixel (i, j) of block b. The single index law shared
// by the forward tiling and both inverses.
inline std::size_t image_offset(int side, int block_side, int blocks_per_row, int c, int b,
                                int i, int j) {
  const int row = (b / blocks_per_row) * block_side + i;
  const int col = (b % blocks_per_row) * block_side + j;
  return (static_cast<std::size_t>(c) * side + row) * side + col;
}

template <typename T, typename Src>
std::vector<T> gather_blocks(const Src& src, int side, int block_side) {
  const int per_row = side / block_side;
  const int count = per_row * per_row;
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(kChannels) * side * side);
  const auto flat = src.values();
  for (int c = 0; c < kChannels; ++c)
    for (int b = 0; b < count; ++b)
      for (int i = 0; i < block_side; ++i)
        for (int j = 0; j < block_side; ++j)
          out.push_back(flat[image_offset(side, block_side, per_row, c, b, i, j)]);
  return out;
}

template <typename T, typename Src>
std::vector<T> scatter_blocks(const Src& blocks) {
  const int side = blocks.image_side();
  const int k = blocks.block_side();
  const int per_row = blocks.blocks_per_row();
  std::vector<T> out(static_cast<std::size_t>(kChannels) * side * side);
  const auto flat = blocks.values();
  std::size_t src = 0;
  for (int c = 0; c < kChannels; ++c)
    for (int b = 0; b < blocks.block_count(); ++b)
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) out[image_offset(side, k, per_row, c, b, i, j)] = flat[src++];
  return out;
}

}  // namespace detail

/// Splits x into (n/k)^2 blocks of side k per channel. Block b covers rows
/// [(b / nrow) k, +k) and columns [(b % nrow) k, +k), nrow = n / k.
inline BlockSet image_to_block(const ImageTensor& x, int block_side) {
  detail::check_tiling(x.side(), block_side);
  const int per_row = x.side() / block_side;
  return BlockSet(block_side, per_row * per_row,
                  detail::gather_blocks<double>(x, x.side(), block_side));
}

/// Exact inverse of image_to_block.
inline ImageTensor block_to_image(const BlockSet& blocks) {
  return ImageTensor(blocks.image_side(), detail::scatter_blocks<double>(blocks));
}

inline Mask mask_to_image(const MaskSet& masks) {
  return Mask(masks.image_side(), masks.block_side(),
              detail::scatter_blocks<std::uint8_t>(masks));
}

}  // namespace tvr
