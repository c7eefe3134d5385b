#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace magnet {

using TokenId = std::int32_t;

/// Boolean K x T masking state; true means the cell is masked.
class MaskGrid {
 public:
  MaskGrid() = default;
  MaskGrid(int levels, int length, bool value = false);

  int levels() const { return levels_; }
  int length() const { return length_; }

  bool at(int level, int t) const { return bits_[index(level, t)] != 0; }
  void set(int level, int t, bool value) { bits_[index(level, t)] = value ? 1 : 0; }

  std::span<const std::uint8_t> row(int level) const;
  std::size_t count() const;
  std::size_t count(int level) const;

  bool operator==(const MaskGrid&) const = default;

 private:
  std::size_t index(int level, int t) const {
    return static_cast<std::size_t>(level) * static_cast<std::size_t>(length_) +
           static_cast<std::size_t>(t);
  }

  int levels_ = 0;
  int length_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// K x T grid of codebook tokens, stored level-major.
///
/// Vocabulary ids are 0..N-1. Id N is the mask token and id N+1 the padding
/// sentinel used by the delayed layout; neither is ever a vocabulary token.
/// Levels are 0-based throughout the library.
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(int levels, int length, int vocab, TokenId fill);

  static TokenGrid fully_masked(int levels, int length, int vocab);

  int levels() const { return levels_; }
  int length() const { return length_; }
  int vocab() const { return vocab_; }
  TokenId mask_id() const { return vocab_; }
  TokenId pad_id() const { return vocab_ + 1; }

  TokenId at(int level, int t) const { return cells_[index(level, t)]; }
  void set(int level, int t, TokenId id);

  std::span<const TokenId> row(int level) const;
  std::span<TokenId> row(int level);
  std::span<const TokenId> cells() const { return cells_; }

  bool is_masked(int level, int t) const { return at(level, t) == mask_id(); }
  MaskGrid mask() const;
  std::size_t count(TokenId id) const;
  std::size_t count(TokenId id, int level) const;

  bool operator==(const TokenGrid&) const = default;

 private:
  std::size_t index(int level, int t) const {
    return static_cast<std::size_t>(level) * static_cast<std::size_t>(length_) +
           static_cast<std::size_t>(t);
  }

  int levels_ = 0;
  int length_ = 0;
  int vocab_ = 0;
  std::vector<TokenId> cells_;
};

/// Geometry of the delay pattern: level k is shifted right by k steps, so
/// one delayed step carries (k, step - k) for every level.
class DelayLayout {
 public:
  DelayLayout(int levels, int length);

  int levels() const { return levels_; }
  int length() const { return length_; }
  int total_steps() const { return length_ + levels_ - 1; }

  int step_of(int level, int t) const { return t + level; }
  /// Undelayed time of a delayed cell, or nullopt for a padding slot.
  std::optional<int> time_of(int level, int step) const;
  bool is_padding(int level, int step) const { return !time_of(level, step).has_value(); }

 private:
  int levels_;
  int length_;
};

TokenGrid to_delayed(const TokenGrid& grid);
TokenGrid from_delayed(const TokenGrid& delayed, int length);

/// Text format: "MAGNET-GRID v1 K T N" then K lines of T ids.
void write_grid(std::ostream& out, const TokenGrid& grid);
TokenGrid read_grid(std::istream& in);

}  // namespace magnet
