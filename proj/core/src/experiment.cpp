#include "qute/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "text.hpp"

namespace qute {

void GaussianModel::validate() const {
  if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
  if (!(pi0 >= 0.0 && pi0 <= 1.0)) {
    throw std::invalid_argument("pi0 must lie in [0, 1]");
  }
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw std::invalid_argument("rho must lie in [0, 1)");
  }
}

double gaussian_upper_tail(double x) {
  // erfc keeps full relative precision in the far upper tail, where
  // 1 - Phi(x) would cancel to zero.
  return std::clamp(0.5 * std::erfc(x / std::sqrt(2.0)), 0.0, 1.0);
}

SampledHypotheses sample_pvalues(const GaussianModel& model, std::size_t n,
                                 std::uint64_t seed, std::size_t node_count) {
  model.validate();
  if (n == 0) throw std::invalid_argument("need at least one hypothesis");
  const std::size_t nodes = node_count == 0 ? n : node_count;

  std::mt19937_64 rng(seed);
  const auto n_null = static_cast<std::size_t>(
      std::llround(model.pi0 * static_cast<double>(n)));
  std::vector<bool> is_null(n, false);
  std::fill_n(is_null.begin(), n_null, true);
  std::shuffle(is_null.begin(), is_null.end(), rng);

  std::vector<NodeId> homes(n);
  if (nodes == n) {
    std::iota(homes.begin(), homes.end(), NodeId{0});
    std::shuffle(homes.begin(), homes.end(), rng);
  } else {
    std::uniform_int_distribution<NodeId> pick(
        0, static_cast<NodeId>(nodes - 1));
    for (auto& h : homes) h = pick(rng);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  const double common = model.rho > 0.0 ? normal(rng) : 0.0;
  const double w_common = std::sqrt(model.rho);
  const double w_own = std::sqrt(1.0 - model.rho);

  std::vector<HypothesisTable::Spec> specs;
  specs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double shift = is_null[i] ? 0.0 : model.mu;
    const double x = w_common * common + w_own * normal(rng) + shift;
    specs.push_back(HypothesisTable::Spec{
        homes[i], PValue(gaussian_upper_tail(x)), bool(is_null[i])});
  }
  return SampledHypotheses{HypothesisTable(nodes, std::move(specs)),
                           std::move(is_null)};
}

TrialMetrics score(const RejectionSet& rejected,
                   const std::vector<bool>& is_null) {
  TrialMetrics m;
  m.rejections = rejected.k_hat();
  for (const HypothesisId id : rejected.ids()) {
    if (is_null.at(id)) ++m.false_discoveries;
  }
  const auto alternatives = static_cast<std::size_t>(
      std::count(is_null.begin(), is_null.end(), false));
  const std::size_t true_discoveries = m.rejections - m.false_discoveries;
  m.fdp = static_cast<double>(m.false_discoveries) /
          static_cast<double>(std::max<std::size_t>(m.rejections, 1));
  m.power = static_cast<double>(true_discoveries) /
            static_cast<double>(std::max<std::size_t>(alternatives, 1));
  return m;
}

RejectionSet apply_procedure(const Procedure& procedure,
                             const GraphSchedule& schedule,
                             const HypothesisTable& table) {
  if (table.size() == 0) return {};
  if (const auto* p = std::get_if<BhProcedure>(&procedure)) {
    return bh(table.pvalues(), TestLevel(p->alpha, table.size()));
  }
  if (const auto* p = std::get_if<BonferroniProcedure>(&procedure)) {
    return bonferroni(table.pvalues(), TestLevel(p->alpha, table.size()));
  }
  return run_qute(schedule, table, std::get<QuteProcedure>(procedure).config)
      .rejected;
}

TrialMetrics run_trial(const GraphSchedule& schedule,
                       const GaussianModel& model, const Procedure& procedure,
                       std::uint64_t seed) {
  const auto sample =
      sample_pvalues(model, schedule.node_count(), seed, schedule.node_count());
  return score(apply_procedure(procedure, schedule, sample.table),
               sample.is_null);
}

double Summary::standard_error() const {
  return n_trials == 0 ? 0.0 : std / std::sqrt(static_cast<double>(n_trials));
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n_trials = values.size();
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(master),
                                   static_cast<std::uint32_t>(master >> 32)};
  for (const auto p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

const SweepPoint::Series& SweepPoint::find(
    const std::string& procedure) const {
  for (const auto& s : series) {
    if (s.procedure == procedure) return s;
  }
  throw std::out_of_range("no series named " + procedure);
}

std::vector<SweepRow> SweepResult::rows() const {
  std::vector<SweepRow> out;
  std::vector<double> buf;
  for (const auto& point : points) {
    for (const auto& series : point.series) {
      const auto emit = [&](const char* metric, auto field) {
        buf.clear();
        for (const auto& t : series.trials) buf.push_back(field(t));
        out.push_back(SweepRow{point.param, series.procedure, metric,
                               summarize(buf)});
      };
      emit("fdr", [](const TrialMetrics& t) { return t.fdp; });
      emit("power", [](const TrialMetrics& t) { return t.power; });
      emit("rejections", [](const TrialMetrics& t) {
        return static_cast<double>(t.rejections);
      });
    }
  }
  return out;
}

namespace {

RejectionSet run_qute_with(QuteEngine engine, const Graph& g,
                           const HypothesisTable& table, double alpha,
                           std::size_t rounds) {
  if (engine == QuteEngine::kClosedForm) {
    return qute_closed_form(g, table, alpha, rounds);
  }
  ProtocolConfig config;
  config.alpha = alpha;
  config.rounds = rounds;
  config.record_messages = false;
  return run_qute(GraphSchedule(g), table, config).rejected;
}

}  // namespace

std::vector<double> default_p_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  return grid;
}

SweepResult sweep_edge_probability(const EdgeSweepConfig& config) {
  config.model.validate();
  const TestLevel level(config.alpha, config.n);
  SweepResult result;
  for (std::size_t i = 0; i < config.p_grid.size(); ++i) {
    const double p = config.p_grid[i];
    SweepPoint point{detail::format_double(p),
                     {{"qute", {}}, {"bh", {}}, {"bonferroni", {}}}};
    for (auto& s : point.series) s.trials.reserve(config.reps);
    for (std::size_t r = 0; r < config.reps; ++r) {
      const auto sample = sample_pvalues(config.model, config.n,
                                         derive_seed(config.seed, {0, r}));
      const Graph g =
          erdos_renyi(config.n, p, derive_seed(config.seed, {1, i, r}));
      const auto pvalues = sample.table.pvalues();
      point.series[0].trials.push_back(
          score(run_qute_with(config.engine, g, sample.table, config.alpha,
                              config.rounds),
                sample.is_null));
      point.series[1].trials.push_back(
          score(bh(pvalues, level), sample.is_null));
      point.series[2].trials.push_back(
          score(bonferroni(pvalues, level), sample.is_null));
    }
    result.points.push_back(std::move(point));
  }
  return result;
}

SweepResult sweep_rounds(const RoundSweepConfig& config) {
  config.model.validate();
  std::vector<Graph> graphs;
  std::vector<std::string> labels;
  for (const auto& [m, n] : config.grids) {
    graphs.push_back(grid(m, n));
    labels.push_back(std::to_string(m) + "x" + std::to_string(n));
  }
  SweepResult result;
  for (const std::size_t c : config.c_grid) {
    SweepPoint point{std::to_string(c), {}};
    for (std::size_t s = 0; s < graphs.size(); ++s) {
      const Graph& g = graphs[s];
      const TestLevel level(config.alpha, g.node_count());
      SweepPoint::Series qute{"qute_" + labels[s], {}};
      SweepPoint::Series bh_series{"bh_" + labels[s], {}};
      SweepPoint::Series bonf{"bonferroni_" + labels[s], {}};
      for (std::size_t r = 0; r < config.reps; ++r) {
        const auto sample =
            sample_pvalues(config.model, g.node_count(),
                           derive_seed(config.seed, {2, s, r}));
        const auto pvalues = sample.table.pvalues();
        qute.trials.push_back(
            score(run_qute_with(config.engine, g, sample.table, config.alpha,
                                c),
                  sample.is_null));
        bh_series.trials.push_back(score(bh(pvalues, level), sample.is_null));
        bonf.trials.push_back(
            score(bonferroni(pvalues, level), sample.is_null));
      }
      point.series.push_back(std::move(qute));
      point.series.push_back(std::move(bh_series));
      point.series.push_back(std::move(bonf));
    }
    result.points.push_back(std::move(point));
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "param,procedure,metric,mean,std,n\n";
  for (const auto& row : result.rows()) {
    out << row.param << ',' << row.procedure << ',' << row.metric << ','
        << detail::format_double(row.summary.mean) << ','
        << detail::format_double(row.summary.std) << ','
        << row.summary.n_trials << '\n';
  }
}

void write_sweep_json(std::ostream& out, const SweepResult& result) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : result.rows()) {
    nlohmann::ordered_json j;
    j["param"] = row.param;
    j["procedure"] = row.procedure;
    j["metric"] = row.metric;
    j["mean"] = row.summary.mean;
    j["std"] = row.summary.std;
    j["n"] = row.summary.n_trials;
    rows.push_back(std::move(j));
  }
  out << rows.dump(2) << '\n';
}

}  // namespace qute
