#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "readsim/rng.hpp"
#include "readsim/scoring.hpp"

using namespace readsim;
using Catch::Approx;

namespace {

CornerVector corners_from(std::initializer_list<int> grades) {
  CornerVector v = uniform_corners(0);
  std::size_t i = 0;
  for (int g : grades) v[i++] = CornerScore(g);
  return v;
}

}  // namespace

TEST_CASE("total_score sums the 24 corners") {
  REQUIRE(total_score(uniform_corners(0)).value() == 0.0);
  REQUIRE(total_score(uniform_corners(3)).value() == 72.0);

  CornerVector v = uniform_corners(0);
  v[0] = CornerScore(3);
  v[1] = CornerScore(1);
  v[23] = CornerScore(2);
  REQUIRE(total_score(v).value() == 6.0);
}

TEST_CASE("total_score rejects incomplete readings") {
  CornerVector v = uniform_corners(1);
  v[7] = CornerScore::missing();
  REQUIRE_FALSE(is_complete(v));
  REQUIRE_THROWS_AS(total_score(v), IncompleteReading);
}

TEST_CASE("total_score is permutation invariant and bounded") {
  RngStream rng(101);
  for (int rep = 0; rep < 50; ++rep) {
    CornerVector v;
    for (int i = 0; i < kCornerCount; ++i) v[i] = CornerScore(static_cast<int>(rng.next_index(4)));
    const double t = total_score(v).value();
    REQUIRE(t >= 0.0);
    REQUIRE(t <= 72.0);
    CornerVector shuffled = v;
    for (int i = kCornerCount - 1; i > 0; --i)
      std::swap(shuffled[i], shuffled[rng.next_index(static_cast<std::uint32_t>(i + 1))]);
    REQUIRE(total_score(shuffled).value() == t);
  }
}

TEST_CASE("worsening is the signed follow-up difference") {
  REQUIRE(worsening(TotalScore(10), TotalScore(10)) == 0.0);
  REQUIRE(worsening(TotalScore(10), TotalScore(12)) == 2.0);
  REQUIRE(worsening(TotalScore(12), TotalScore(10)) == -2.0);
}

TEST_CASE("TotalScore rejects out-of-range values") {
  REQUIRE_THROWS_AS(TotalScore(-0.5), Error);
  REQUIRE_THROWS_AS(TotalScore(72.5), Error);
}

TEST_CASE("threshold disagreement compares the absolute gap") {
  const auto rule0 = DisagreementRule::threshold(0);
  const auto rule1 = DisagreementRule::threshold(1);
  REQUIRE_FALSE(is_disagreement(TotalScore(10), TotalScore(10), rule0));
  REQUIRE(is_disagreement(TotalScore(10), TotalScore(12), rule1));
  REQUIRE_FALSE(is_disagreement(TotalScore(10), TotalScore(11), rule1));
}

TEST_CASE("threshold(0) flags exactly the unequal pairs, symmetrically") {
  const auto rule = DisagreementRule::threshold(0);
  RngStream rng(7);
  for (int rep = 0; rep < 300; ++rep) {
    const TotalScore a(static_cast<double>(rng.next_index(73)));
    const TotalScore b(static_cast<double>(rng.next_index(73)));
    REQUIRE(is_disagreement(a, b, rule) == (a.value() != b.value()));
    REQUIRE(is_disagreement(a, b, rule) == is_disagreement(b, a, rule));
  }
}

TEST_CASE("percentile mode keeps the top-q fraction of the batch") {
  const std::vector<double> batch = {0, 0, 1, 5, 9};
  const auto rule = DisagreementRule::percentile(0.2);
  // cut at the single largest discrepancy
  REQUIRE(is_disagreement(TotalScore(0), TotalScore(9), rule, std::span<const double>(batch)));
  REQUIRE_FALSE(
      is_disagreement(TotalScore(0), TotalScore(5), rule, std::span<const double>(batch)));
  REQUIRE_FALSE(
      is_disagreement(TotalScore(10), TotalScore(10), rule, std::span<const double>(batch)));
}

TEST_CASE("percentile mode without a batch is an error") {
  REQUIRE_THROWS_AS(
      is_disagreement(TotalScore(1), TotalScore(2), DisagreementRule::percentile(0.05)),
      MissingBatchContext);
}

TEST_CASE("percentile cut flags ceil(q*N) items up to tie expansion") {
  RngStream rng(33);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + static_cast<int>(rng.next_index(60));
    std::vector<double> batch(static_cast<std::size_t>(n));
    for (auto& d : batch) d = static_cast<double>(rng.next_index(12));
    const double q = 0.01 + 0.99 * rng.next_unit();
    const double cut = percentile_cut(batch, q);

    // sort-based oracle
    std::vector<double> sorted = batch;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto k = static_cast<std::size_t>(std::ceil(q * n));
    REQUIRE(cut == sorted[std::min(k, sorted.size()) - 1]);

    std::size_t flagged = 0, ties_at_cut = 0;
    for (double d : batch) {
      flagged += (d >= cut) ? 1 : 0;
      ties_at_cut += (d == cut) ? 1 : 0;
    }
    REQUIRE(flagged >= k);
    REQUIRE(flagged <= k - 1 + ties_at_cut);
  }
}

TEST_CASE("pool_consensus averages the listed reads") {
  const std::vector<TotalScore> two = {TotalScore(10), TotalScore(12)};
  REQUIRE(pool_consensus(two, PoolingPolicy::kMeanOfAllReads).value() == Approx(11.0));

  const std::vector<TotalScore> triple = {TotalScore(36), TotalScore(10), TotalScore(10)};
  REQUIRE(pool_consensus(triple, PoolingPolicy::kMeanOfAllReads).value() ==
          Approx(18.666666666666668));

  const std::vector<TotalScore> zeros = {TotalScore(0), TotalScore(0), TotalScore(0)};
  for (auto policy : {PoolingPolicy::kMeanOfAllReads, PoolingPolicy::kMeanExcludingArbitrator,
                      PoolingPolicy::kArbitratorOverrides})
    REQUIRE(pool_consensus(zeros, policy, 2).value() == 0.0);
}

TEST_CASE("pool_consensus arbitrator policies") {
  const std::vector<TotalScore> reads = {TotalScore(10), TotalScore(12), TotalScore(20)};
  REQUIRE(pool_consensus(reads, PoolingPolicy::kMeanOfAllReads, 2).value() == Approx(14.0));
  REQUIRE(pool_consensus(reads, PoolingPolicy::kMeanExcludingArbitrator, 2).value() ==
          Approx(11.0));
  REQUIRE(pool_consensus(reads, PoolingPolicy::kArbitratorOverrides, 2).value() == Approx(20.0));
  // without an arbitrator the override policy falls back to the mean
  REQUIRE(pool_consensus(reads, PoolingPolicy::kArbitratorOverrides).value() == Approx(14.0));
}

TEST_CASE("pool_consensus rejects an empty pool") {
  REQUIRE_THROWS_AS(pool_consensus({}, PoolingPolicy::kMeanOfAllReads), EmptyPool);
}

TEST_CASE("pooled mean lies within the read range and fixes single reads") {
  RngStream rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + static_cast<int>(rng.next_index(5));
    std::vector<TotalScore> reads;
    double lo = 72.0, hi = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = static_cast<double>(rng.next_index(73));
      reads.emplace_back(v);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double pooled = pool_consensus(reads, PoolingPolicy::kMeanOfAllReads).value();
    REQUIRE(pooled >= lo);
    REQUIRE(pooled <= hi);
    if (n == 1) REQUIRE(pooled == reads[0].value());
  }
}
