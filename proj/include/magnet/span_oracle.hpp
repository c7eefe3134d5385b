#pragma once

#include <vector>

namespace magnet {

/// Exact mean coverage of u circular spans of length l over T positions,
/// averaged over all C(T, u) start subsets by enumeration. Exponential in T;
/// intended for T <= ~20.
double enumerate_circular_mask_rate(int length, int span_len, int num_spans);

struct SpanCheckRow {
  int length;
  int span_len;
  int num_spans;
  double formula;
  double oracle;
  double abs_error;
};

/// Formula-vs-enumeration table over T <= tmax, l <= min(lmax, T), u <= T.
std::vector<SpanCheckRow> verify_span_math(int tmax, int lmax);

}  // namespace magnet
