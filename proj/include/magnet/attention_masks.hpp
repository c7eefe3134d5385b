#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "magnet/token_grid.hpp"

namespace magnet {

/// Dense square attention mask; allowed(q, k) means query q may attend key k.
class AttnMask {
 public:
  AttnMask() = default;
  explicit AttnMask(int size, bool value = false);

  int size() const { return size_; }
  bool allowed(int query, int key) const { return bits_[index(query, key)] != 0; }
  void set(int query, int key, bool value) { bits_[index(query, key)] = value ? 1 : 0; }
  int row_count(int query) const;
  bool is_symmetric() const;
  bool has_full_diagonal() const;

  /// Elementwise AND.
  AttnMask operator&(const AttnMask& other) const;
  /// True when every allowed cell of *this is allowed in `other`.
  bool implies(const AttnMask& other) const;

  bool operator==(const AttnMask&) const = default;

 private:
  std::size_t index(int q, int k) const {
    return static_cast<std::size_t>(q) * static_cast<std::size_t>(size_) + static_cast<std::size_t>(k);
  }

  int size_ = 0;
  std::vector<std::uint8_t> bits_;
};

AttnMask full_mask(int length);
AttnMask causal_mask(int length);
/// |q - k| <= window.
AttnMask restricted_mask(int length, int window);

/// Mask over the delayed layout for one codebook level. A query whose
/// undelayed time (step - level) precedes t_switch attends causally; later
/// queries attend every position. With `isolate_padding`, padding slots of
/// this level attend only themselves and are hidden from every other query.
/// With `window`, rows past t_switch are further limited to |q - k| <= window.
AttnMask hybrid_mask(const DelayLayout& layout, int t_switch, int level, bool isolate_padding = true,
                     int window = -1);

/// Plain-text PGM (P2): allowed cells white, blocked cells black.
void write_pgm(std::ostream& out, const AttnMask& mask);

}  // namespace magnet
