#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "magnet/random.hpp"

namespace magnet {

/// Contiguous non-overlapping spans of `span_len` tokens covering
/// [offset, offset + length). The last span is shorter when span_len does not
/// divide length.
class SpanPartition {
 public:
  SpanPartition(int length, int span_len, int offset = 0);

  int length() const { return length_; }
  int span_len() const { return span_len_; }
  int offset() const { return offset_; }
  int size() const { return n_spans_; }

  /// Absolute [begin, end) of span j.
  int begin(int span) const { return offset_ + span * span_len_; }
  int end(int span) const;
  /// Index of the span containing absolute position t.
  int span_of(int t) const { return (t - offset_) / span_len_; }

 private:
  int length_;
  int span_len_;
  int offset_;
  int n_spans_;
};

enum class SpanBoundary { kTruncate, kCircular };

/// 1 - C(T-l, u) / C(T, u): the expected fraction of tokens covered by u
/// uniformly placed span starts.
double expected_mask_rate(int length, int span_len, int num_spans);

/// Smallest u with expected_mask_rate(T, l, u) >= target.
int solve_num_spans(int length, int span_len, double target_rate);

/// Draws u distinct span starts uniformly and returns the union of the spans.
std::vector<std::uint8_t> sample_training_spans(int length, int span_len, int num_spans, Rng& rng,
                                                SpanBoundary boundary = SpanBoundary::kTruncate);

/// Span confidence = max token probability inside the span. `token_probs` is
/// indexed relative to the partition offset.
std::vector<double> span_scores(std::span<const double> token_probs, const SpanPartition& partition);

/// The n lowest-scoring spans that are not fixed, ties broken by lower index.
/// Returned in ascending index order.
std::vector<int> select_spans_to_mask(std::span<const double> scores,
                                      std::span<const std::uint8_t> fixed, int n_mask);

}  // namespace magnet
