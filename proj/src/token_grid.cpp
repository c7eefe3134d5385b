#include "magnet/token_grid.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace magnet {

namespace {

void require_dims(int levels, int length) {
  if (levels < 1 || length < 1) {
    throw std::invalid_argument("grid dimensions must be positive (K=" + std::to_string(levels) +
                                ", T=" + std::to_string(length) + ")");
  }
}

}  // namespace

MaskGrid::MaskGrid(int levels, int length, bool value) : levels_(levels), length_(length) {
  require_dims(levels, length);
  bits_.assign(static_cast<std::size_t>(levels) * length, value ? 1 : 0);
}

std::span<const std::uint8_t> MaskGrid::row(int level) const {
  return std::span<const std::uint8_t>(bits_).subspan(index(level, 0), length_);
}

std::size_t MaskGrid::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

std::size_t MaskGrid::count(int level) const {
  auto r = row(level);
  return static_cast<std::size_t>(std::count(r.begin(), r.end(), 1));
}

TokenGrid::TokenGrid(int levels, int length, int vocab, TokenId fill)
    : levels_(levels), length_(length), vocab_(vocab) {
  require_dims(levels, length);
  if (vocab < 1) throw std::invalid_argument("vocabulary size must be positive");
  if (fill < 0 || fill > vocab + 1) throw std::invalid_argument("fill id out of range");
  cells_.assign(static_cast<std::size_t>(levels) * length, fill);
}

TokenGrid TokenGrid::fully_masked(int levels, int length, int vocab) {
  if (vocab < 1) throw std::invalid_argument("vocabulary size must be positive");
  return TokenGrid(levels, length, vocab, vocab);
}

void TokenGrid::set(int level, int t, TokenId id) {
  if (id < 0 || id > pad_id()) {
    throw std::invalid_argument("token id " + std::to_string(id) + " outside [0, N+1]");
  }
  cells_[index(level, t)] = id;
}

std::span<const TokenId> TokenGrid::row(int level) const {
  return std::span<const TokenId>(cells_).subspan(index(level, 0), length_);
}

std::span<TokenId> TokenGrid::row(int level) {
  return std::span<TokenId>(cells_).subspan(index(level, 0), length_);
}

MaskGrid TokenGrid::mask() const {
  MaskGrid m(levels_, length_);
  for (int k = 0; k < levels_; ++k)
    for (int t = 0; t < length_; ++t) m.set(k, t, is_masked(k, t));
  return m;
}

std::size_t TokenGrid::count(TokenId id) const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), id));
}

std::size_t TokenGrid::count(TokenId id, int level) const {
  auto r = row(level);
  return static_cast<std::size_t>(std::count(r.begin(), r.end(), id));
}

DelayLayout::DelayLayout(int levels, int length) : levels_(levels), length_(length) {
  require_dims(levels, length);
}

std::optional<int> DelayLayout::time_of(int level, int step) const {
  const int t = step - level;
  if (t < 0 || t >= length_) return std::nullopt;
  return t;
}

TokenGrid to_delayed(const TokenGrid& grid) {
  const DelayLayout layout(grid.levels(), grid.length());
  TokenGrid delayed(grid.levels(), layout.total_steps(), grid.vocab(), grid.pad_id());
  for (int k = 0; k < grid.levels(); ++k)
    for (int t = 0; t < grid.length(); ++t) delayed.set(k, layout.step_of(k, t), grid.at(k, t));
  return delayed;
}

TokenGrid from_delayed(const TokenGrid& delayed, int length) {
  if (length < 1 || delayed.length() != length + delayed.levels() - 1) {
    throw std::invalid_argument("delayed width " + std::to_string(delayed.length()) +
                                " does not match T+K-1 for T=" + std::to_string(length));
  }
  const DelayLayout layout(delayed.levels(), length);
  TokenGrid grid(delayed.levels(), length, delayed.vocab(), delayed.mask_id());
  for (int k = 0; k < delayed.levels(); ++k)
    for (int t = 0; t < length; ++t) grid.set(k, t, delayed.at(k, layout.step_of(k, t)));
  return grid;
}

void write_grid(std::ostream& out, const TokenGrid& grid) {
  out << "MAGNET-GRID v1 " << grid.levels() << ' ' << grid.length() << ' ' << grid.vocab() << '\n';
  for (int k = 0; k < grid.levels(); ++k) {
    for (int t = 0; t < grid.length(); ++t) {
      if (t) out << ' ';
      out << grid.at(k, t);
    }
    out << '\n';
  }
}

TokenGrid read_grid(std::istream& in) {
  std::string magic, version;
  int levels = 0, length = 0, vocab = 0;
  if (!(in >> magic >> version >> levels >> length >> vocab) || magic != "MAGNET-GRID" ||
      version != "v1") {
    throw std::invalid_argument("not a MAGNET-GRID v1 stream");
  }
  TokenGrid grid(levels, length, vocab, 0);
  for (int k = 0; k < levels; ++k) {
    for (int t = 0; t < length; ++t) {
      long long id = 0;
      if (!(in >> id)) throw std::invalid_argument("truncated grid body");
      if (id < 0 || id > vocab) throw std::invalid_argument("grid cell out of range: " + std::to_string(id));
      grid.set(k, t, static_cast<TokenId>(id));
    }
  }
  return grid;
}

}  // namespace magnet
