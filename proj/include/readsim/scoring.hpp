#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "readsim/errors.hpp"

namespace readsim {

inline constexpr int kCornerCount = 24;   // 12 cervical + 12 lumbar corners
inline constexpr int kMaxGrade = 3;       // ordinal grades 0..3
inline constexpr double kMaxTotal = 72.0; // 24 * 3

/// One vertebral-corner grade: an ordinal in {0,1,2,3} or Missing.
/// Missing is a distinct state, never a number; it must not enter sums.
class CornerScore {
 public:
  constexpr CornerScore() : v_(0) {}
  explicit constexpr CornerScore(int grade) : v_(static_cast<std::int8_t>(grade)) {}

  static constexpr CornerScore missing() {
    CornerScore s;
    s.v_ = -1;
    return s;
  }

  [[nodiscard]] constexpr bool is_missing() const { return v_ < 0; }
  [[nodiscard]] constexpr int grade() const { return v_; }
  [[nodiscard]] constexpr bool valid() const { return v_ == -1 || (v_ >= 0 && v_ <= kMaxGrade); }

  friend constexpr bool operator==(CornerScore a, CornerScore b) { return a.v_ == b.v_; }

 private:
  std::int8_t v_;  // -1 encodes Missing
};

/// One patient-visit reading: 24 corner grades in anatomical order.
using CornerVector = std::array<CornerScore, kCornerCount>;

inline bool is_complete(const CornerVector& reading) {
  return std::none_of(reading.begin(), reading.end(),
                      [](CornerScore c) { return c.is_missing(); });
}

inline CornerVector uniform_corners(int grade) {
  CornerVector v;
  v.fill(CornerScore(grade));
  return v;
}

/// Summed reading score in [0, 72]; integer for a single read, real after
/// consensus pooling.
class TotalScore {
 public:
  explicit TotalScore(double value) : value_(value) {
    if (!(value >= 0.0 && value <= kMaxTotal))
      throw Error("TotalScore out of range [0,72]: " + std::to_string(value));
  }

  [[nodiscard]] double value() const { return value_; }

  friend bool operator==(TotalScore a, TotalScore b) { return a.value_ == b.value_; }

 private:
  double value_;
};

/// Sum of the 24 corner grades.
inline TotalScore total_score(const CornerVector& reading) {
  int sum = 0;
  for (CornerScore c : reading) {
    if (c.is_missing())
      throw IncompleteReading("total_score: reading has a missing corner");
    sum += c.grade();
  }
  return TotalScore(static_cast<double>(sum));
}

/// Follow-up minus baseline; negative values are possible under reader noise.
inline double worsening(TotalScore baseline, TotalScore followup) {
  return followup.value() - baseline.value();
}

/// When to escalate a pair of reads: either an absolute gap on the total
/// score, or membership in the top-q fraction of a batch's discrepancies.
struct DisagreementRule {
  enum class Mode { kThreshold, kPercentile };

  Mode mode = Mode::kThreshold;
  int delta = 0;    // threshold mode: flag iff |t1 - t2| > delta
  double q = 0.05;  // percentile mode: flag the top-q fraction of the batch

  static DisagreementRule threshold(int delta) {
    if (delta < 0) throw Error("DisagreementRule: delta must be >= 0");
    DisagreementRule r;
    r.mode = Mode::kThreshold;
    r.delta = delta;
    return r;
  }

  static DisagreementRule percentile(double q) {
    if (!(q > 0.0 && q <= 1.0)) throw Error("DisagreementRule: q must be in (0,1]");
    DisagreementRule r;
    r.mode = Mode::kPercentile;
    r.q = q;
    return r;
  }
};

/// Smallest discrepancy still inside the top-q fraction of the batch.
/// Flagging |d| >= cut keeps exactly ceil(q*N) items plus any ties at the
/// cut value.
inline double percentile_cut(std::span<const double> batch_discrepancies, double q) {
  if (batch_discrepancies.empty())
    throw MissingBatchContext("percentile_cut: empty batch");
  std::vector<double> sorted(batch_discrepancies.begin(), batch_discrepancies.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto n = sorted.size();
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  return sorted[std::min(k, n) - 1];
}

inline bool is_disagreement(TotalScore t1, TotalScore t2, const DisagreementRule& rule,
                            std::optional<std::span<const double>> batch_context = std::nullopt) {
  const double gap = std::abs(t1.value() - t2.value());
  if (rule.mode == DisagreementRule::Mode::kThreshold)
    return gap > static_cast<double>(rule.delta);
  if (!batch_context)
    throw MissingBatchContext("is_disagreement: percentile mode requires batch context");
  return gap >= percentile_cut(*batch_context, rule.q);
}

/// How pooled consensus treats the arbitrator's read.
enum class PoolingPolicy {
  kMeanOfAllReads,           // default: arithmetic mean over every read taken
  kMeanExcludingArbitrator,  // mean of the non-arbitrator reads
  kArbitratorOverrides,      // arbitrator's read stands alone when present
};

/// Pool reads into one consensus total. Real-valued on purpose: rounding
/// would bias the worsening endpoint.
inline TotalScore pool_consensus(std::span<const TotalScore> reads, PoolingPolicy policy,
                                 std::optional<std::size_t> arbitrator_index = std::nullopt) {
  if (reads.empty()) throw EmptyPool("pool_consensus: no reads to pool");
  if (arbitrator_index && *arbitrator_index >= reads.size())
    throw Error("pool_consensus: arbitrator index out of range");

  auto mean_over = [&](bool skip_arbitrator) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < reads.size(); ++i) {
      if (skip_arbitrator && arbitrator_index && i == *arbitrator_index) continue;
      sum += reads[i].value();
      ++n;
    }
    if (n == 0) throw EmptyPool("pool_consensus: all reads excluded");
    return TotalScore(sum / static_cast<double>(n));
  };

  switch (policy) {
    case PoolingPolicy::kMeanOfAllReads:
      return mean_over(false);
    case PoolingPolicy::kMeanExcludingArbitrator:
      return mean_over(true);
    case PoolingPolicy::kArbitratorOverrides:
      if (arbitrator_index) return reads[*arbitrator_index];
      return mean_over(false);
  }
  throw Error("pool_consensus: unknown policy");
}

}  // namespace readsim
