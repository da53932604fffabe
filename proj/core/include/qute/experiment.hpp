#pragma once

// Seeded Monte Carlo harness: Gaussian p-value generation, FDP/power scoring
// and the two sweep families (edge probability on G(n, p), communication
// rounds on grids). Every trial seed is a pure function of the master seed
// and the trial's position, so tables are reproducible bit for bit.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qute/graph.hpp"
#include "qute/multiple_testing.hpp"
#include "qute/protocol.hpp"

namespace qute {

/// X ~ mu_i + N(0, 1), P = 1 - Phi(X); mu_i = 0 for nulls and `mu` otherwise.
/// rho > 0 adds an equicorrelated common factor (positive dependence).
struct GaussianModel {
  double mu = 2.0;
  double pi0 = 0.7;
  double rho = 0.0;

  void validate() const;
};

/// 1 - Phi(x) for the standard normal CDF Phi.
double gaussian_upper_tail(double x);

struct SampledHypotheses {
  HypothesisTable table;
  std::vector<bool> is_null;
};

/// Exactly round(pi0 * n) nulls. Null/alternative labels are shuffled; with
/// node_count == n every node receives one hypothesis through a random
/// permutation, otherwise each hypothesis lands on a uniformly random node.
/// node_count == 0 means node_count = n.
SampledHypotheses sample_pvalues(const GaussianModel& model, std::size_t n,
                                 std::uint64_t seed,
                                 std::size_t node_count = 0);

struct TrialMetrics {
  double fdp = 0.0;
  double power = 0.0;
  std::size_t rejections = 0;
  std::size_t false_discoveries = 0;

  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

/// fdp = V / max(R, 1), power = true discoveries / max(#non-nulls, 1).
TrialMetrics score(const RejectionSet& rejected,
                   const std::vector<bool>& is_null);

struct BhProcedure {
  double alpha = 0.2;
};
struct BonferroniProcedure {
  double alpha = 0.2;
};
struct QuteProcedure {
  ProtocolConfig config;
};
using Procedure =
    std::variant<BhProcedure, BonferroniProcedure, QuteProcedure>;

RejectionSet apply_procedure(const Procedure& procedure,
                             const GraphSchedule& schedule,
                             const HypothesisTable& table);

/// Samples one p-value per node of the schedule, runs `procedure`, scores it.
TrialMetrics run_trial(const GraphSchedule& schedule,
                       const GaussianModel& model, const Procedure& procedure,
                       std::uint64_t seed);

struct Summary {
  double mean = 0.0;
  /// Sample standard deviation (n - 1 denominator); 0 for a single trial.
  double std = 0.0;
  std::size_t n_trials = 0;

  double standard_error() const;
};

Summary summarize(std::span<const double> values);

/// Child seed for a position in the experiment tree.
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path);

/// How sweeps evaluate QuTE: by running the message-passing engine, or by the
/// closed-form rejection rule (same decisions on static graphs, much faster
/// on dense ones).
enum class QuteEngine { kSimulate, kClosedForm };

/// Per-trial metrics of every procedure at one sweep parameter value.
struct SweepPoint {
  std::string param;
  struct Series {
    std::string procedure;
    std::vector<TrialMetrics> trials;
  };
  std::vector<Series> series;

  const Series& find(const std::string& procedure) const;
};

struct SweepRow {
  std::string param;
  std::string procedure;
  std::string metric;
  Summary summary;
};

struct SweepResult {
  std::vector<SweepPoint> points;

  /// Metrics "fdr", "power" and "rejections" per (param, procedure).
  std::vector<SweepRow> rows() const;
};

struct EdgeSweepConfig {
  std::size_t n = 1000;
  std::vector<double> p_grid;
  GaussianModel model;
  double alpha = 0.2;
  std::size_t rounds = 1;
  std::size_t reps = 100;
  std::uint64_t seed = 0;
  QuteEngine engine = QuteEngine::kSimulate;
};

/// For each p: `reps` trials, each with a fresh G(n, p) and fresh p-values,
/// scoring procedures "qute", "bh" and "bonferroni".
SweepResult sweep_edge_probability(const EdgeSweepConfig& config);

/// The default grid 0, 0.05, ..., 1.
std::vector<double> default_p_grid();

struct RoundSweepConfig {
  std::vector<std::pair<std::size_t, std::size_t>> grids{{16, 16}, {2, 128}};
  std::vector<std::size_t> c_grid;
  GaussianModel model;
  double alpha = 0.2;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  QuteEngine engine = QuteEngine::kSimulate;
};

/// For each c and grid shape m x n: `reps` trials of multi-step QuTE with c
/// rounds, scoring "qute_<m>x<n>", "bh_<m>x<n>" and "bonferroni_<m>x<n>".
/// Trial r uses the same p-values for every c.
SweepResult sweep_rounds(const RoundSweepConfig& config);

/// `param,procedure,metric,mean,std,n` with a header row.
void write_sweep_csv(std::ostream& out, const SweepResult& result);
/// The same rows as a JSON array of objects.
void write_sweep_json(std::ostream& out, const SweepResult& result);

}  // namespace qute
