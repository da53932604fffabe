#pragma once

// Round-synchronous Query-Test-Exchange engine.
//
// A run has three phases. In each of `rounds` query rounds every node sends
// everything it knows, as (hypothesis id, value) entries, over every active
// and non-dropped link; receivers keep the per-id minimum. Each node then
// runs BH at level alpha over all N hypotheses, with unknown p-values taken
// as 1. Finally `rounds` exchange rounds flood the resulting rejection
// indicators, and a node rejects each local hypothesis that any indicator it
// received (or its own test) marks.
//
// Entries carry a hop count and are only forwarded while it is below
// `rounds`, so knowledge and indicators never travel further than `rounds`
// hops. In a static run this is implied by the round count; in the
// sequential runner it keeps the stationary case equal to a static run.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <tuple>
#include <variant>
#include <vector>

#include "qute/graph.hpp"
#include "qute/multiple_testing.hpp"

namespace qute {

struct Hypothesis {
  HypothesisId id;
  NodeId home;
  std::uint32_t local_index;
  PValue p;
  std::optional<bool> is_null;
};

/// Global registry of hypotheses. Ids are dense 0..N-1 in insertion order and
/// local indices are dense per home node.
class HypothesisTable {
 public:
  struct Spec {
    NodeId home;
    PValue p;
    std::optional<bool> is_null = std::nullopt;
  };

  /// Throws std::invalid_argument when a home node is >= node_count.
  HypothesisTable(std::size_t node_count, std::vector<Spec> specs);

  /// One hypothesis per node, hypothesis i living at node i.
  static HypothesisTable one_per_node(std::span<const double> pvalues);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t node_count() const noexcept { return at_node_.size(); }
  const Hypothesis& operator[](HypothesisId id) const { return entries_.at(id); }
  std::span<const Hypothesis> entries() const noexcept { return entries_; }
  std::span<const HypothesisId> at_node(NodeId node) const {
    return at_node_.at(node);
  }

  PValueMap pvalues() const;
  /// Same layout with new p-values, indexed by hypothesis id.
  HypothesisTable with_pvalues(std::span<const double> pvalues) const;

 private:
  std::vector<Hypothesis> entries_;
  std::vector<std::vector<HypothesisId>> at_node_;
};

/// One node's view of the network: the best value known for each hypothesis
/// together with where and when it arrived. Values only ever decrease.
template <class Value>
class BasicKnowledgeTable {
 public:
  struct Entry {
    Value value{};
    NodeId origin = 0;
    std::size_t round = 0;
    std::uint32_t hops = 0;
  };

  explicit BasicKnowledgeTable(std::size_t n_total)
      : entries_(n_total), known_(n_total, 0) {}

  /// Keeps the smaller value; on a tie keeps the shorter hop count.
  /// Returns true when the table changed.
  bool offer(HypothesisId id, Value value, NodeId origin, std::size_t round,
             std::uint32_t hops) {
    Entry& e = entries_.at(id);
    if (!known_[id]) {
      known_[id] = 1;
      ids_.push_back(id);
    } else if (!(value < e.value) && !(value == e.value && hops < e.hops)) {
      return false;
    }
    e = Entry{value, origin, round, hops};
    return true;
  }

  bool knows(HypothesisId id) const { return known_.at(id) != 0; }
  const Entry& at(HypothesisId id) const { return entries_.at(id); }
  Value value_or(HypothesisId id, Value fallback) const {
    return knows(id) ? entries_[id].value : fallback;
  }
  /// Known ids in order of first arrival.
  std::span<const HypothesisId> known_ids() const noexcept { return ids_; }
  std::size_t size() const noexcept { return ids_.size(); }

 private:
  std::vector<Entry> entries_;
  std::vector<unsigned char> known_;
  std::vector<HypothesisId> ids_;
};

using KnowledgeTable = BasicKnowledgeTable<double>;
using RankKnowledgeTable = BasicKnowledgeTable<std::uint32_t>;

/// A single directed transmission, round `round`, from -> to.
struct DirectedLink {
  std::size_t round;
  NodeId from;
  NodeId to;
  friend auto operator<=>(const DirectedLink&, const DirectedLink&) = default;
};

struct NoDrops {};
/// Each (round, directed link) is dropped independently with `rate`.
struct BernoulliDrops {
  double rate = 0.0;
  std::uint64_t seed = 0;
};
/// Exactly the listed transmissions are dropped.
struct ScheduledDrops {
  std::set<DirectedLink> dropped;
};
using DropModel = std::variant<NoDrops, BernoulliDrops, ScheduledDrops>;

struct ProtocolConfig {
  double alpha = 0.2;
  std::size_t rounds = 1;
  /// Transmit p-ranks instead of raw p-values and test with quantized BH.
  bool quantized = false;
  DropModel drops = NoDrops{};
  /// Keep per-message records. Totals are collected either way.
  bool record_messages = true;

  /// Throws std::invalid_argument on alpha outside (0, 1) or a drop rate
  /// outside [0, 1].
  void validate() const;
};

enum class PayloadKind { kPValues, kPRanks, kIndicators };

const char* to_string(PayloadKind kind) noexcept;

/// Payload bits per entry: 64 for raw p-values, ceil(log2(N + 1)) for
/// p-ranks, 1 for rejection indicators.
std::uint64_t entry_bits(PayloadKind kind, std::size_t n_total) noexcept;

struct Message {
  std::size_t round;
  NodeId from;
  NodeId to;
  PayloadKind kind;
  std::size_t entries;
  std::uint64_t bits;
};

struct Transcript {
  std::size_t n_total = 0;
  /// Delivered messages grouped by round (empty when not recorded).
  std::vector<std::vector<Message>> rounds;
  /// k-hat of each node's most recent local test.
  std::vector<std::size_t> local_k_hat;
  /// Local hypotheses each node finally rejects.
  std::vector<std::vector<HypothesisId>> node_rejections;
  std::size_t delivered_messages = 0;
  std::uint64_t delivered_bits = 0;
};

struct MessageCost {
  std::size_t messages = 0;
  std::uint64_t bits = 0;
  friend bool operator==(const MessageCost&, const MessageCost&) = default;
};

/// Sums the recorded messages of `t`.
MessageCost message_cost(const Transcript& t);

struct QuteOutcome {
  RejectionSet rejected;
  Transcript transcript;
};

/// Throws std::invalid_argument if the table does not fit the schedule, the
/// config is invalid, or a scheduled drop names a link that is not active in
/// its round.
QuteOutcome run_qute(const GraphSchedule& schedule,
                     const HypothesisTable& table,
                     const ProtocolConfig& config);

/// Direct evaluation of the multi-step rejection rule: H at node b is
/// rejected iff p <= alpha * max_{a in ball(b, c)} k_a / N, where k_a is the
/// BH count over the p-values homed in ball(a, c). Static graph, no drops.
RejectionSet qute_closed_form(const Graph& g, const HypothesisTable& table,
                              double alpha, std::size_t rounds);

/// Per-hypothesis p-value streams, indexed by hypothesis id then time.
/// Streams shorter than the horizon hold their last value.
using PValueStreams = std::vector<std::vector<double>>;

/// Running-minimum p-values of every stream at time `t`.
std::vector<double> stream_snapshot(const PValueStreams& streams,
                                    std::size_t t);

struct SequentialOutcome {
  /// Cumulative rejections after each time step.
  std::vector<RejectionSet> cumulative;
  Transcript transcript;
};

/// Anytime-valid runner. Each step ingests the new stream values (running
/// minimum), then runs one query round (round 2t), a local test at every
/// node, and one exchange round (round 2t + 1). Rejections accumulate.
/// `layout` supplies home nodes; its p-values are ignored.
SequentialOutcome run_qute_sequential(const PValueStreams& streams,
                                      const HypothesisTable& layout,
                                      const GraphSchedule& schedule,
                                      const ProtocolConfig& config,
                                      std::size_t horizon);

/// One JSON object per delivered message:
/// {"round","from","to","kind","entries","bits"}.
void write_transcript_jsonl(std::ostream& out, const Transcript& t);

/// `hypothesis_id,home_node,rejected,pvalue` with a header row.
void write_rejections_csv(std::ostream& out, const HypothesisTable& table,
                          const RejectionSet& rejected);

/// Reads `home_node,pvalue[,is_null]` rows. A leading header row, blank lines
/// and '#' comments are skipped. Throws FormatError.
HypothesisTable read_pvalues_csv(std::istream& in, std::size_t node_count);

}  // namespace qute
