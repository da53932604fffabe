#include "qute/protocol.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qute/error.hpp"
#include "text.hpp"

namespace qute {

HypothesisTable::HypothesisTable(std::size_t node_count,
                                 std::vector<Spec> specs)
    : at_node_(node_count) {
  entries_.reserve(specs.size());
  for (const auto& spec : specs) {
    if (spec.home >= node_count) {
      throw std::invalid_argument("hypothesis home node " +
                                  std::to_string(spec.home) +
                                  " outside the graph");
    }
    const auto id = static_cast<HypothesisId>(entries_.size());
    auto& local = at_node_[spec.home];
    entries_.push_back(Hypothesis{id, spec.home,
                                  static_cast<std::uint32_t>(local.size()),
                                  spec.p, spec.is_null});
    local.push_back(id);
  }
}

HypothesisTable HypothesisTable::one_per_node(std::span<const double> pvalues) {
  std::vector<Spec> specs;
  specs.reserve(pvalues.size());
  for (std::size_t i = 0; i < pvalues.size(); ++i) {
    specs.push_back(Spec{static_cast<NodeId>(i), PValue(pvalues[i])});
  }
  return HypothesisTable(pvalues.size(), std::move(specs));
}

PValueMap HypothesisTable::pvalues() const {
  PValueMap out;
  for (const auto& h : entries_) out.emplace(h.id, h.p);
  return out;
}

HypothesisTable HypothesisTable::with_pvalues(
    std::span<const double> pvalues) const {
  if (pvalues.size() != entries_.size()) {
    throw std::invalid_argument("p-value count does not match the table");
  }
  HypothesisTable copy = *this;
  for (std::size_t i = 0; i < pvalues.size(); ++i) {
    copy.entries_[i].p = PValue(pvalues[i]);
  }
  return copy;
}

void ProtocolConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1)");
  }
  if (const auto* b = std::get_if<BernoulliDrops>(&drops)) {
    if (!(b->rate >= 0.0 && b->rate <= 1.0)) {
      throw std::invalid_argument("drop rate must lie in [0, 1]");
    }
  }
}

const char* to_string(PayloadKind kind) noexcept {
  switch (kind) {
    case PayloadKind::kPValues:
      return "pvalues";
    case PayloadKind::kPRanks:
      return "pranks";
    case PayloadKind::kIndicators:
      return "indicators";
  }
  return "unknown";
}

std::uint64_t entry_bits(PayloadKind kind, std::size_t n_total) noexcept {
  switch (kind) {
    case PayloadKind::kPValues:
      return 64;
    case PayloadKind::kPRanks:
      return prank_bits(n_total);
    case PayloadKind::kIndicators:
      return 1;
  }
  return 0;
}

MessageCost message_cost(const Transcript& t) {
  MessageCost cost;
  for (const auto& round : t.rounds) {
    for (const auto& m : round) {
      ++cost.messages;
      cost.bits += m.bits;
    }
  }
  return cost;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Drop decisions are a pure function of (round, from, to) so that two runs
// that differ only in payload see identical losses.
class DropOracle {
 public:
  explicit DropOracle(const DropModel& model) : model_(model) {}

  bool dropped(std::size_t round, NodeId from, NodeId to) const {
    if (const auto* b = std::get_if<BernoulliDrops>(&model_)) {
      if (b->rate <= 0.0) return false;
      if (b->rate >= 1.0) return true;
      std::uint64_t h = splitmix64(b->seed);
      h = splitmix64(h ^ static_cast<std::uint64_t>(round));
      h = splitmix64(h ^ (static_cast<std::uint64_t>(from) << 32 | to));
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      return u < b->rate;
    }
    if (const auto* s = std::get_if<ScheduledDrops>(&model_)) {
      return s->dropped.contains(DirectedLink{round, from, to});
    }
    return false;
  }

 private:
  const DropModel& model_;
};

using IndicatorTable = BasicKnowledgeTable<unsigned char>;

struct RawPayload {
  using Value = double;
  static constexpr PayloadKind kKind = PayloadKind::kPValues;
  static Value encode(double p, const TestLevel&) { return p; }
  static std::size_t count(std::span<const Value> v, const TestLevel& level) {
    return bh_rejection_count(v, level);
  }
  static bool rejects(Value v, std::size_t k_hat, const TestLevel& level) {
    return k_hat > 0 && v <= bh_threshold(k_hat, level);
  }
};

struct RankPayload {
  using Value = std::uint32_t;
  static constexpr PayloadKind kKind = PayloadKind::kPRanks;
  static Value encode(double p, const TestLevel& level) {
    return prank_quantize(PValue(p), level).rank();
  }
  static std::size_t count(std::span<const Value> v, const TestLevel& level) {
    return quantized_rejection_count(v, level);
  }
  static bool rejects(Value v, std::size_t k_hat, const TestLevel&) {
    return v <= k_hat;
  }
};

template <class Value>
void flood(std::vector<BasicKnowledgeTable<Value>>& tables,
           const Graph& graph, std::size_t round, const DropOracle& drops,
           std::uint32_t ttl, PayloadKind kind, bool record,
           Transcript& transcript) {
  if (record && transcript.rounds.size() <= round) {
    transcript.rounds.resize(round + 1);
  }
  if (ttl == 0) return;
  // Synchronous round: everyone sends what they knew at the start of it.
  const auto snapshot = tables;
  const std::uint64_t bits_per_entry = entry_bits(kind, transcript.n_total);
  for (NodeId from = 0; from < graph.node_count(); ++from) {
    const auto& sender = snapshot[from];
    for (const NodeId to : graph.neighbors(from)) {
      if (drops.dropped(round, from, to)) continue;
      std::size_t entries = 0;
      for (const HypothesisId id : sender.known_ids()) {
        const auto& e = sender.at(id);
        if (e.hops >= ttl) continue;
        ++entries;
        tables[to].offer(id, e.value, from, round, e.hops + 1);
      }
      if (entries == 0) continue;
      const std::uint64_t bits = entries * bits_per_entry;
      ++transcript.delivered_messages;
      transcript.delivered_bits += bits;
      if (record) {
        transcript.rounds[round].push_back(
            Message{round, from, to, kind, entries, bits});
      }
    }
  }
}

template <class Payload>
void local_tests(
    const std::vector<BasicKnowledgeTable<typename Payload::Value>>& tables,
    std::vector<IndicatorTable>& indicators, const TestLevel& level,
    std::size_t round, Transcript& transcript) {
  std::vector<typename Payload::Value> values;
  for (NodeId a = 0; a < tables.size(); ++a) {
    const auto& known = tables[a];
    values.clear();
    for (const HypothesisId id : known.known_ids()) {
      values.push_back(known.at(id).value);
    }
    const std::size_t k_hat = Payload::count(values, level);
    transcript.local_k_hat[a] = k_hat;
    if (k_hat == 0) continue;
    for (const HypothesisId id : known.known_ids()) {
      if (Payload::rejects(known.at(id).value, k_hat, level)) {
        indicators[a].offer(id, 1, a, round, 0);
      }
    }
  }
}

RejectionSet collect_marked(const HypothesisTable& table,
                            const std::vector<IndicatorTable>& indicators,
                            Transcript& transcript) {
  std::vector<HypothesisId> ids;
  for (NodeId node = 0; node < table.node_count(); ++node) {
    auto& local = transcript.node_rejections[node];
    local.clear();
    for (const HypothesisId id : table.at_node(node)) {
      if (indicators[node].knows(id)) {
        local.push_back(id);
        ids.push_back(id);
      }
    }
  }
  return RejectionSet(std::move(ids));
}

void check_inputs(const GraphSchedule& schedule, const HypothesisTable& table,
                  const ProtocolConfig& config) {
  config.validate();
  if (table.node_count() != schedule.node_count()) {
    throw std::invalid_argument(
        "hypothesis table node count does not match the graph");
  }
  if (const auto* s = std::get_if<ScheduledDrops>(&config.drops)) {
    for (const auto& link : s->dropped) {
      if (!schedule.at_round(link.round).has_edge(link.from, link.to)) {
        throw std::invalid_argument(
            "scheduled drop on a link that is not active in round " +
            std::to_string(link.round));
      }
    }
  }
}

Transcript fresh_transcript(const HypothesisTable& table) {
  Transcript t;
  t.n_total = table.size();
  t.local_k_hat.assign(table.node_count(), 0);
  t.node_rejections.assign(table.node_count(), {});
  return t;
}

template <class Payload>
QuteOutcome run_static(const GraphSchedule& schedule,
                       const HypothesisTable& table,
                       const ProtocolConfig& config) {
  using Value = typename Payload::Value;
  QuteOutcome out{{}, fresh_transcript(table)};
  const std::size_t n_total = table.size();
  if (n_total == 0) return out;
  const TestLevel level(config.alpha, n_total);
  const DropOracle drops(config.drops);
  const auto ttl = static_cast<std::uint32_t>(config.rounds);
  const std::size_t nodes = table.node_count();

  std::vector<BasicKnowledgeTable<Value>> knowledge(
      nodes, BasicKnowledgeTable<Value>(n_total));
  std::vector<IndicatorTable> indicators(nodes, IndicatorTable(n_total));
  for (const auto& h : table.entries()) {
    knowledge[h.home].offer(h.id, Payload::encode(h.p.value(), level), h.home,
                            0, 0);
  }

  std::size_t round = 0;
  for (std::size_t q = 0; q < config.rounds; ++q, ++round) {
    flood(knowledge, schedule.at_round(round), round, drops, ttl,
          Payload::kKind, config.record_messages, out.transcript);
  }
  local_tests<Payload>(knowledge, indicators, level, round, out.transcript);
  for (std::size_t e = 0; e < config.rounds; ++e, ++round) {
    flood(indicators, schedule.at_round(round), round, drops, ttl,
          PayloadKind::kIndicators, config.record_messages, out.transcript);
  }
  out.rejected = collect_marked(table, indicators, out.transcript);
  return out;
}

template <class Payload>
SequentialOutcome run_sequential(const PValueStreams& streams,
                                 const HypothesisTable& layout,
                                 const GraphSchedule& schedule,
                                 const ProtocolConfig& config,
                                 std::size_t horizon) {
  using Value = typename Payload::Value;
  SequentialOutcome out{{}, fresh_transcript(layout)};
  const std::size_t n_total = layout.size();
  out.cumulative.reserve(horizon);
  if (n_total == 0) {
    out.cumulative.assign(horizon, RejectionSet{});
    return out;
  }
  const TestLevel level(config.alpha, n_total);
  const DropOracle drops(config.drops);
  const auto ttl = static_cast<std::uint32_t>(config.rounds);
  const std::size_t nodes = layout.node_count();

  std::vector<BasicKnowledgeTable<Value>> knowledge(
      nodes, BasicKnowledgeTable<Value>(n_total));
  std::vector<IndicatorTable> indicators(nodes, IndicatorTable(n_total));
  RejectionSet cumulative;

  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t gossip_round = 2 * t;
    const std::size_t exchange_round = 2 * t + 1;
    const auto current = stream_snapshot(streams, t);
    for (const auto& h : layout.entries()) {
      knowledge[h.home].offer(h.id, Payload::encode(current[h.id], level),
                              h.home, gossip_round, 0);
    }
    flood(knowledge, schedule.at_round(gossip_round), gossip_round, drops, ttl,
          Payload::kKind, config.record_messages, out.transcript);
    local_tests<Payload>(knowledge, indicators, level, gossip_round,
                         out.transcript);
    flood(indicators, schedule.at_round(exchange_round), exchange_round, drops,
          ttl, PayloadKind::kIndicators, config.record_messages,
          out.transcript);
    cumulative =
        cumulative.merged(collect_marked(layout, indicators, out.transcript));
    out.cumulative.push_back(cumulative);
  }
  return out;
}

}  // namespace

QuteOutcome run_qute(const GraphSchedule& schedule,
                     const HypothesisTable& table,
                     const ProtocolConfig& config) {
  check_inputs(schedule, table, config);
  return config.quantized ? run_static<RankPayload>(schedule, table, config)
                          : run_static<RawPayload>(schedule, table, config);
}

RejectionSet qute_closed_form(const Graph& g, const HypothesisTable& table,
                              double alpha, std::size_t rounds) {
  if (table.node_count() != g.node_count()) {
    throw std::invalid_argument(
        "hypothesis table node count does not match the graph");
  }
  const std::size_t n_total = table.size();
  if (n_total == 0) return {};
  const TestLevel level(alpha, n_total);

  std::vector<std::vector<NodeId>> balls(g.node_count());
  std::vector<std::size_t> local_k(g.node_count(), 0);
  std::vector<double> values;
  for (NodeId a = 0; a < g.node_count(); ++a) {
    balls[a] = ball(g, a, rounds);
    values.clear();
    for (const NodeId b : balls[a]) {
      for (const HypothesisId id : table.at_node(b)) {
        values.push_back(table[id].p.value());
      }
    }
    local_k[a] = bh_rejection_count(values, level);
  }

  std::vector<HypothesisId> ids;
  for (NodeId b = 0; b < g.node_count(); ++b) {
    std::size_t k_max = 0;
    // Balls are symmetric: a is within c of b iff b is within c of a.
    for (const NodeId a : balls[b]) k_max = std::max(k_max, local_k[a]);
    if (k_max == 0) continue;
    const double threshold = bh_threshold(k_max, level);
    for (const HypothesisId id : table.at_node(b)) {
      if (table[id].p.value() <= threshold) ids.push_back(id);
    }
  }
  return RejectionSet(std::move(ids));
}

std::vector<double> stream_snapshot(const PValueStreams& streams,
                                    std::size_t t) {
  std::vector<double> out;
  out.reserve(streams.size());
  for (const auto& s : streams) {
    if (s.empty()) throw std::invalid_argument("empty p-value stream");
    const std::size_t last = std::min(t, s.size() - 1);
    double best = 1.0;
    for (std::size_t i = 0; i <= last; ++i) {
      best = std::min(best, PValue(s[i]).value());
    }
    out.push_back(best);
  }
  return out;
}

SequentialOutcome run_qute_sequential(const PValueStreams& streams,
                                      const HypothesisTable& layout,
                                      const GraphSchedule& schedule,
                                      const ProtocolConfig& config,
                                      std::size_t horizon) {
  check_inputs(schedule, layout, config);
  if (streams.size() != layout.size()) {
    throw std::invalid_argument("one stream per hypothesis is required");
  }
  if (horizon == 0) throw std::invalid_argument("horizon must be positive");
  return config.quantized
             ? run_sequential<RankPayload>(streams, layout, schedule, config,
                                           horizon)
             : run_sequential<RawPayload>(streams, layout, schedule, config,
                                          horizon);
}

void write_transcript_jsonl(std::ostream& out, const Transcript& t) {
  for (const auto& round : t.rounds) {
    for (const auto& m : round) {
      nlohmann::ordered_json j;
      j["round"] = m.round;
      j["from"] = m.from;
      j["to"] = m.to;
      j["kind"] = to_string(m.kind);
      j["entries"] = m.entries;
      j["bits"] = m.bits;
      out << j.dump() << '\n';
    }
  }
}

void write_rejections_csv(std::ostream& out, const HypothesisTable& table,
                          const RejectionSet& rejected) {
  out << "hypothesis_id,home_node,rejected,pvalue\n";
  for (const auto& h : table.entries()) {
    out << h.id << ',' << h.home << ',' << (rejected.contains(h.id) ? 1 : 0)
        << ',' << detail::format_double(h.p.value()) << '\n';
  }
}

HypothesisTable read_pvalues_csv(std::istream& in, std::size_t node_count) {
  std::vector<HypothesisTable::Spec> specs;
  std::string line;
  std::size_t line_no = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_skippable(line)) continue;
    const auto fields = detail::split(line, ',');
    const auto home = detail::parse_number<std::uint32_t>(fields[0]);
    if (first_row && !home) {
      first_row = false;
      continue;  // header
    }
    first_row = false;
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() < 2 || fields.size() > 3 || !home) {
      throw FormatError(where + "expected home_node,pvalue[,is_null]");
    }
    const auto p = detail::parse_number<double>(fields[1]);
    if (!p || !(*p >= 0.0 && *p <= 1.0)) {
      throw FormatError(where + "p-value must be a number in [0, 1]");
    }
    if (*home >= node_count) {
      throw FormatError(where + "home node outside the graph");
    }
    std::optional<bool> is_null;
    if (fields.size() == 3) {
      const auto flag = fields[2];
      if (flag == "1" || flag == "true") {
        is_null = true;
      } else if (flag == "0" || flag == "false") {
        is_null = false;
      } else if (!flag.empty()) {
        throw FormatError(where + "is_null must be 0/1/true/false");
      }
    }
    specs.push_back(HypothesisTable::Spec{*home, PValue(*p), is_null});
  }
  return HypothesisTable(node_count, std::move(specs));
}

}  // namespace qute
