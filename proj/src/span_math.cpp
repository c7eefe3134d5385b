#include "magnet/span_math.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace magnet {

SpanPartition::SpanPartition(int length, int span_len, int offset)
    : length_(length), span_len_(span_len), offset_(offset) {
  if (length < 1 || span_len < 1 || offset < 0) {
    throw std::invalid_argument("span partition needs length >= 1, span_len >= 1, offset >= 0");
  }
  n_spans_ = (length + span_len - 1) / span_len;
}

int SpanPartition::end(int span) const {
  return std::min(offset_ + (span + 1) * span_len_, offset_ + length_);
}

double expected_mask_rate(int length, int span_len, int num_spans) {
  if (length < 1 || span_len < 1 || span_len > length) {
    throw std::invalid_argument("expected_mask_rate needs 1 <= l <= T");
  }
  if (num_spans < 0 || num_spans > length) {
    throw std::invalid_argument("expected_mask_rate needs 0 <= u <= T, got u=" + std::to_string(num_spans));
  }
  if (num_spans > length - span_len) return 1.0;
  // C(T-l, u) / C(T, u) = prod_{j<u} (T-l-j) / (T-j); every factor is in [0, 1).
  double unmasked = 1.0;
  for (int j = 0; j < num_spans; ++j) {
    unmasked *= static_cast<double>(length - span_len - j) / static_cast<double>(length - j);
  }
  return 1.0 - unmasked;
}

int solve_num_spans(int length, int span_len, double target_rate) {
  if (!(target_rate >= 0.0 && target_rate <= 1.0)) {
    throw std::invalid_argument("target masking rate must lie in [0, 1]");
  }
  int lo = 0;
  int hi = length - span_len + 1;  // rate(hi) == 1
  if (expected_mask_rate(length, span_len, lo) >= target_rate) return lo;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (expected_mask_rate(length, span_len, mid) >= target_rate) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::vector<std::uint8_t> sample_training_spans(int length, int span_len, int num_spans, Rng& rng,
                                                SpanBoundary boundary) {
  if (length < 1 || span_len < 1) throw std::invalid_argument("span sampling needs T >= 1 and l >= 1");
  if (num_spans < 0 || num_spans > length) {
    throw std::invalid_argument("cannot place " + std::to_string(num_spans) + " span starts in " +
                                std::to_string(length) + " positions");
  }
  std::vector<int> starts(length);
  std::iota(starts.begin(), starts.end(), 0);
  // Partial Fisher-Yates: the first u entries are a uniform u-subset.
  for (int i = 0; i < num_spans; ++i) {
    std::uniform_int_distribution<int> pick(i, length - 1);
    std::swap(starts[i], starts[pick(rng)]);
  }
  std::vector<std::uint8_t> row(length, 0);
  for (int i = 0; i < num_spans; ++i) {
    for (int j = 0; j < span_len; ++j) {
      int t = starts[i] + j;
      if (t >= length) {
        if (boundary == SpanBoundary::kTruncate) break;
        t %= length;
      }
      row[t] = 1;
    }
  }
  return row;
}

std::vector<double> span_scores(std::span<const double> token_probs, const SpanPartition& partition) {
  if (static_cast<int>(token_probs.size()) != partition.length()) {
    throw std::invalid_argument("token_probs has " + std::to_string(token_probs.size()) +
                                " entries, partition covers " + std::to_string(partition.length()));
  }
  std::vector<double> scores(partition.size());
  for (int j = 0; j < partition.size(); ++j) {
    const auto first = token_probs.begin() + (partition.begin(j) - partition.offset());
    const auto last = token_probs.begin() + (partition.end(j) - partition.offset());
    scores[j] = *std::max_element(first, last);
  }
  return scores;
}

std::vector<int> select_spans_to_mask(std::span<const double> scores,
                                      std::span<const std::uint8_t> fixed, int n_mask) {
  if (scores.size() != fixed.size()) throw std::invalid_argument("scores/fixed size mismatch");
  std::vector<int> candidates;
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (!fixed[j]) candidates.push_back(static_cast<int>(j));
  if (n_mask < 0 || n_mask > static_cast<int>(candidates.size())) {
    throw std::invalid_argument("asked to mask " + std::to_string(n_mask) + " spans but only " +
                                std::to_string(candidates.size()) + " are not fixed");
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int a, int b) { return scores[a] < scores[b]; });
  candidates.resize(n_mask);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace magnet
