#include "qute/multiple_testing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iterator>
#include <stdexcept>
#include <string>

namespace qute {

PValue::PValue(double value) : value_(value) {
  if (std::isnan(value) || value < 0.0 || value > 1.0) {
    throw std::invalid_argument("p-value outside [0, 1]: " +
                                std::to_string(value));
  }
}

TestLevel::TestLevel(double alpha, std::size_t n_total)
    : alpha_(alpha), n_total_(n_total) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1)");
  }
  if (n_total == 0) {
    throw std::invalid_argument("n_total must be positive");
  }
}

PRank::PRank(std::uint32_t rank, const TestLevel& level) : rank_(rank) {
  if (rank < 1 || rank > level.n_total() + 1) {
    throw std::out_of_range("p-rank outside [1, N + 1]");
  }
}

PRank PRank::sentinel(const TestLevel& level) {
  return PRank(static_cast<std::uint32_t>(level.n_total() + 1));
}

RejectionSet::RejectionSet(std::vector<HypothesisId> ids)
    : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

RejectionSet::RejectionSet(std::initializer_list<HypothesisId> ids)
    : RejectionSet(std::vector<HypothesisId>(ids)) {}

bool RejectionSet::contains(HypothesisId id) const noexcept {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

bool RejectionSet::is_subset_of(const RejectionSet& other) const noexcept {
  return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(),
                       ids_.end());
}

RejectionSet RejectionSet::merged(const RejectionSet& other) const {
  std::vector<HypothesisId> out;
  out.reserve(ids_.size() + other.ids_.size());
  std::set_union(ids_.begin(), ids_.end(), other.ids_.begin(),
                 other.ids_.end(), std::back_inserter(out));
  RejectionSet result;
  result.ids_ = std::move(out);
  return result;
}

double bh_threshold(std::size_t k_hat, const TestLevel& level) {
  if (k_hat > level.n_total()) {
    throw std::out_of_range("k_hat exceeds n_total");
  }
  return level.alpha() * static_cast<double>(k_hat) /
         static_cast<double>(level.n_total());
}

namespace {

void check_size(std::size_t known, const TestLevel& level) {
  if (known > level.n_total()) {
    throw std::invalid_argument("more known hypotheses (" +
                                std::to_string(known) + ") than n_total (" +
                                std::to_string(level.n_total()) + ")");
  }
}

}  // namespace

std::size_t bh_rejection_count(std::span<const double> known,
                               const TestLevel& level) {
  check_size(known.size(), level);
  std::vector<double> sorted(known.begin(), known.end());
  std::sort(sorted.begin(), sorted.end());
  // Padded ones never pass: alpha * k / N < 1 for every k.
  std::size_t k_hat = 0;
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    if (sorted[k - 1] <= bh_threshold(k, level)) k_hat = k;
  }
  return k_hat;
}

std::size_t quantized_rejection_count(std::span<const std::uint32_t> ranks,
                                      const TestLevel& level) {
  check_size(ranks.size(), level);
  std::vector<std::uint32_t> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t k_hat = 0;
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    if (sorted[k - 1] <= k) k_hat = k;
  }
  return k_hat;
}

RejectionSet bh(const PValueMap& known, const TestLevel& level) {
  std::vector<double> values;
  values.reserve(known.size());
  for (const auto& [id, p] : known) values.push_back(p.value());
  const std::size_t k_hat = bh_rejection_count(values, level);
  if (k_hat == 0) return {};
  const double threshold = bh_threshold(k_hat, level);
  std::vector<HypothesisId> ids;
  ids.reserve(k_hat);
  for (const auto& [id, p] : known) {
    if (p.value() <= threshold) ids.push_back(id);
  }
  return RejectionSet(std::move(ids));
}

RejectionSet bonferroni(const PValueMap& known, const TestLevel& level) {
  check_size(known.size(), level);
  const double threshold = bh_threshold(1, level);
  std::vector<HypothesisId> ids;
  for (const auto& [id, p] : known) {
    if (p.value() <= threshold) ids.push_back(id);
  }
  return RejectionSet(std::move(ids));
}

PRank prank_quantize(PValue p, const TestLevel& level) {
  const std::size_t n = level.n_total();
  if (p.value() > bh_threshold(n, level)) return PRank::sentinel(level);
  const double scaled =
      std::ceil(p.value() * static_cast<double>(n) / level.alpha());
  auto s = static_cast<std::size_t>(
      std::clamp(scaled, 1.0, static_cast<double>(n)));
  // Snap to the exact threshold grid so the rank and bh() never disagree on a
  // value that rounds across a boundary.
  while (s > 1 && p.value() <= bh_threshold(s - 1, level)) --s;
  while (s < n && p.value() > bh_threshold(s, level)) ++s;
  return PRank(static_cast<std::uint32_t>(s), level);
}

RejectionSet quantized_bh(const PRankMap& ranks, const TestLevel& level) {
  std::vector<std::uint32_t> values;
  values.reserve(ranks.size());
  for (const auto& [id, r] : ranks) values.push_back(r.rank());
  const std::size_t k_hat = quantized_rejection_count(values, level);
  std::vector<HypothesisId> ids;
  ids.reserve(k_hat);
  for (const auto& [id, r] : ranks) {
    if (r.rank() <= k_hat) ids.push_back(id);
  }
  return RejectionSet(std::move(ids));
}

unsigned prank_bits(std::size_t n_total) noexcept {
  // ceil(log2(N + 1)) is the bit width of N.
  return static_cast<unsigned>(std::bit_width(n_total));
}

}  // namespace qute
