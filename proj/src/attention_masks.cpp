#include "magnet/attention_masks.hpp"

#include <algorithm>
#include <cstdlib>
#include <ostream>
#include <stdexcept>
#include <string>

namespace magnet {

AttnMask::AttnMask(int size, bool value) : size_(size) {
  if (size < 1) throw std::invalid_argument("attention mask size must be positive");
  bits_.assign(static_cast<std::size_t>(size) * size, value ? 1 : 0);
}

int AttnMask::row_count(int query) const {
  const auto first = bits_.begin() + static_cast<std::ptrdiff_t>(index(query, 0));
  return static_cast<int>(std::count(first, first + size_, 1));
}

bool AttnMask::is_symmetric() const {
  for (int q = 0; q < size_; ++q)
    for (int k = q + 1; k < size_; ++k)
      if (allowed(q, k) != allowed(k, q)) return false;
  return true;
}

bool AttnMask::has_full_diagonal() const {
  for (int q = 0; q < size_; ++q)
    if (!allowed(q, q)) return false;
  return true;
}

AttnMask AttnMask::operator&(const AttnMask& other) const {
  if (other.size_ != size_) throw std::invalid_argument("mask size mismatch");
  AttnMask out(size_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
  return out;
}

bool AttnMask::implies(const AttnMask& other) const {
  if (other.size_ != size_) throw std::invalid_argument("mask size mismatch");
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] && !other.bits_[i]) return false;
  return true;
}

AttnMask full_mask(int length) { return AttnMask(length, true); }

AttnMask causal_mask(int length) {
  AttnMask mask(length);
  for (int q = 0; q < length; ++q)
    for (int k = 0; k <= q; ++k) mask.set(q, k, true);
  return mask;
}

AttnMask restricted_mask(int length, int window) {
  if (window < 0) throw std::invalid_argument("attention window must be non-negative");
  AttnMask mask(length);
  for (int q = 0; q < length; ++q) {
    const int lo = std::max(0, q - window);
    const int hi = std::min(length - 1, q + window);
    for (int k = lo; k <= hi; ++k) mask.set(q, k, true);
  }
  return mask;
}

AttnMask hybrid_mask(const DelayLayout& layout, int t_switch, int level, bool isolate_padding,
                     int window) {
  if (t_switch < 0 || t_switch > layout.length()) {
    throw std::invalid_argument("t_switch " + std::to_string(t_switch) + " outside [0, " +
                                std::to_string(layout.length()) + "]");
  }
  if (level < 0 || level >= layout.levels()) throw std::invalid_argument("level out of range");
  const int n = layout.total_steps();
  AttnMask mask(n);
  for (int q = 0; q < n; ++q) {
    const bool q_pad = layout.is_padding(level, q);
    if (q_pad && isolate_padding) {
      mask.set(q, q, true);
      continue;
    }
    const bool causal = (q - level) < t_switch;
    for (int k = 0; k < n; ++k) {
      if (isolate_padding && layout.is_padding(level, k)) continue;
      if (causal && k > q) continue;
      if (!causal && window >= 0 && std::abs(q - k) > window) continue;
      mask.set(q, k, true);
    }
    mask.set(q, q, true);
  }
  return mask;
}

void write_pgm(std::ostream& out, const AttnMask& mask) {
  out << "P2\n" << mask.size() << ' ' << mask.size() << "\n255\n";
  for (int q = 0; q < mask.size(); ++q) {
    for (int k = 0; k < mask.size(); ++k) {
      if (k) out << ' ';
      out << (mask.allowed(q, k) ? 255 : 0);
    }
    out << '\n';
  }
}

}  // namespace magnet
