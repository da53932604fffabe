#pragma once

// Centralized multiple-testing procedures: Benjamini-Hochberg, Bonferroni and
// the p-rank quantized variant of BH. Every procedure treats hypotheses that
// are absent from its input (out of the global count N) as having p-value 1,
// which is how a node with partial knowledge of the graph runs its local test.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <vector>

namespace qute {

using HypothesisId = std::uint32_t;
using NodeId = std::uint32_t;

/// A p-value in [0, 1]. Default-constructed values are 1 (no evidence).
class PValue {
 public:
  constexpr PValue() noexcept = default;
  /// Throws std::invalid_argument for NaN or values outside [0, 1].
  explicit PValue(double value);

  constexpr double value() const noexcept { return value_; }

  friend constexpr bool operator==(PValue, PValue) noexcept = default;
  friend constexpr std::partial_ordering operator<=>(PValue a,
                                                     PValue b) noexcept {
    return a.value_ <=> b.value_;
  }

 private:
  double value_ = 1.0;
};

/// Target level alpha together with the global hypothesis count N.
class TestLevel {
 public:
  /// Requires 0 < alpha < 1 and n_total >= 1.
  TestLevel(double alpha, std::size_t n_total);

  double alpha() const noexcept { return alpha_; }
  std::size_t n_total() const noexcept { return n_total_; }

 private:
  double alpha_;
  std::size_t n_total_;
};

/// Integer quantization of a p-value in [1, N + 1]. N + 1 is the sentinel for
/// p-values that no BH threshold can reach.
class PRank {
 public:
  /// Throws std::out_of_range unless 1 <= rank <= level.n_total() + 1.
  PRank(std::uint32_t rank, const TestLevel& level);

  static PRank sentinel(const TestLevel& level);

  std::uint32_t rank() const noexcept { return rank_; }

  friend bool operator==(PRank, PRank) noexcept = default;
  friend auto operator<=>(PRank, PRank) noexcept = default;

 private:
  explicit PRank(std::uint32_t rank) noexcept : rank_(rank) {}
  std::uint32_t rank_;
};

/// Sorted, duplicate-free set of rejected hypothesis ids.
class RejectionSet {
 public:
  RejectionSet() = default;
  explicit RejectionSet(std::vector<HypothesisId> ids);
  RejectionSet(std::initializer_list<HypothesisId> ids);

  const std::vector<HypothesisId>& ids() const noexcept { return ids_; }
  /// Number of discoveries, k-hat.
  std::size_t k_hat() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  bool contains(HypothesisId id) const noexcept;
  bool is_subset_of(const RejectionSet& other) const noexcept;

  /// Set union.
  RejectionSet merged(const RejectionSet& other) const;

  friend bool operator==(const RejectionSet&, const RejectionSet&) = default;

 private:
  std::vector<HypothesisId> ids_;
};

using PValueMap = std::map<HypothesisId, PValue>;
using PRankMap = std::map<HypothesisId, PRank>;

/// The step-up threshold alpha * k / N. Every procedure in this library
/// compares against exactly this expression so that decisions agree bit for
/// bit. Throws std::out_of_range if k_hat > N.
double bh_threshold(std::size_t k_hat, const TestLevel& level);

/// k-hat of BH over `known` padded with ones up to N entries.
/// Throws std::invalid_argument if known.size() > N.
std::size_t bh_rejection_count(std::span<const double> known,
                               const TestLevel& level);

/// k-hat of quantized BH over `ranks` padded with sentinels up to N entries.
std::size_t quantized_rejection_count(std::span<const std::uint32_t> ranks,
                                      const TestLevel& level);

RejectionSet bh(const PValueMap& known, const TestLevel& level);

/// Rejects every p <= alpha / N.
RejectionSet bonferroni(const PValueMap& known, const TestLevel& level);

/// Smallest s >= 1 with p <= bh_threshold(s), or the sentinel when p exceeds
/// bh_threshold(N). Agrees with ceil(p N / alpha) away from rounding ties.
PRank prank_quantize(PValue p, const TestLevel& level);

RejectionSet quantized_bh(const PRankMap& ranks, const TestLevel& level);

/// Bits needed to transmit one p-rank, ceil(log2(N + 1)).
unsigned prank_bits(std::size_t n_total) noexcept;

}  // namespace qute
