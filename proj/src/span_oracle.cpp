#include "magnet/span_oracle.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "magnet/span_math.hpp"

namespace magnet {

double enumerate_circular_mask_rate(int length, int span_len, int num_spans) {
  if (length < 1 || length > 24) throw std::invalid_argument("enumeration supports 1 <= T <= 24");
  if (span_len < 1 || span_len > length || num_spans < 0 || num_spans > length) {
    throw std::invalid_argument("enumeration parameters out of range");
  }
  const std::uint32_t full = (1u << length) - 1u;
  std::uint64_t covered_total = 0;
  std::uint64_t placements = 0;
  for (std::uint32_t starts = 0; starts <= full; ++starts) {
    if (std::popcount(starts) != num_spans) continue;
    std::uint32_t covered = 0;
    for (int s = 0; s < length; ++s) {
      if (!(starts >> s & 1u)) continue;
      for (int j = 0; j < span_len; ++j) covered |= 1u << ((s + j) % length);
    }
    covered_total += static_cast<std::uint64_t>(std::popcount(covered));
    ++placements;
  }
  return static_cast<double>(covered_total) / (static_cast<double>(placements) * length);
}

std::vector<SpanCheckRow> verify_span_math(int tmax, int lmax) {
  if (tmax < 1 || lmax < 1) throw std::invalid_argument("tmax and lmax must be positive");
  std::vector<SpanCheckRow> rows;
  for (int t = 1; t <= tmax; ++t) {
    for (int l = 1; l <= std::min(lmax, t); ++l) {
      for (int u = 0; u <= t; ++u) {
        const double formula = expected_mask_rate(t, l, u);
        const double oracle = enumerate_circular_mask_rate(t, l, u);
        rows.push_back({t, l, u, formula, oracle, std::abs(formula - oracle)});
      }
    }
  }
  return rows;
}

}  // namespace magnet
