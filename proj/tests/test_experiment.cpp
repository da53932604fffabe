#include "qute/experiment.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace qute {
namespace {

TEST(Gaussian, UpperTail) {
  EXPECT_NEAR(gaussian_upper_tail(1.96), 0.024997895148220435, 1e-15);
  EXPECT_NEAR(gaussian_upper_tail(3.0), 0.0013498980316300946, 1e-17);
  EXPECT_DOUBLE_EQ(gaussian_upper_tail(0.0), 0.5);
  for (double x = -5; x <= 5; x += 0.25) {
    EXPECT_NEAR(gaussian_upper_tail(x) + gaussian_upper_tail(-x), 1.0, 1e-15);
  }
}

TEST(Gaussian, ValidatesModel) {
  EXPECT_THROW((GaussianModel{2.0, 1.5, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((GaussianModel{2.0, 0.7, 1.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((GaussianModel{2.0, 0.0, 0.0}.validate()));
}

TEST(Sampling, NullCountIsExact) {
  const auto s = sample_pvalues(GaussianModel{}, 1000, 5);
  EXPECT_EQ(std::count(s.is_null.begin(), s.is_null.end(), true), 700);
  EXPECT_EQ(s.table.size(), 1000u);
  EXPECT_EQ(s.table.node_count(), 1000u);
  for (NodeId a = 0; a < 1000; ++a) EXPECT_EQ(s.table.at_node(a).size(), 1u);
  for (const auto& h : s.table.entries()) {
    EXPECT_EQ(h.is_null, std::optional<bool>(s.is_null[h.id]));
  }
}

TEST(Sampling, NullPValuesAreUniform) {
  const auto s = sample_pvalues(GaussianModel{2.0, 1.0, 0.0}, 100000, 11);
  double sum = 0.0;
  std::size_t below = 0;
  for (const auto& h : s.table.entries()) {
    sum += h.p.value();
    if (h.p.value() <= 0.1) ++below;
  }
  EXPECT_NEAR(sum / 1e5, 0.5, 0.005);
  EXPECT_NEAR(static_cast<double>(below) / 1e5, 0.1, 0.005);
}

TEST(Sampling, AlternativesAreSmaller) {
  const auto s = sample_pvalues(GaussianModel{2.0, 0.0, 0.0}, 20000, 12);
  double sum = 0.0;
  for (const auto& h : s.table.entries()) sum += h.p.value();
  // E[1 - Phi(2 + Z)] = 1 - Phi(2 / sqrt 2).
  EXPECT_NEAR(sum / 2e4, gaussian_upper_tail(std::sqrt(2.0)), 0.01);
}

TEST(Sampling, CorrelatedModelKeepsMarginals) {
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = sample_pvalues(GaussianModel{2.0, 1.0, 0.5}, 100, seed);
    for (const auto& h : s.table.entries()) sum += h.p.value();
  }
  EXPECT_NEAR(sum / 2e4, 0.5, 0.03);
}

TEST(Sampling, SeedDeterminism) {
  const auto a = sample_pvalues(GaussianModel{}, 50, 3, 7);
  const auto b = sample_pvalues(GaussianModel{}, 50, 3, 7);
  EXPECT_EQ(a.table.pvalues(), b.table.pvalues());
  EXPECT_EQ(a.is_null, b.is_null);
  EXPECT_NE(a.table.pvalues(), sample_pvalues(GaussianModel{}, 50, 4, 7).table.pvalues());
  EXPECT_EQ(a.table.node_count(), 7u);
}

TEST(Score, Cases) {
  const std::vector<bool> nulls{true, true, false, false};
  EXPECT_EQ(score(RejectionSet{}, nulls), (TrialMetrics{0.0, 0.0, 0, 0}));
  EXPECT_EQ(score(RejectionSet({0, 2}), nulls), (TrialMetrics{0.5, 0.5, 2, 1}));
  EXPECT_EQ(score(RejectionSet({2, 3}), nulls), (TrialMetrics{0.0, 1.0, 2, 0}));
  // No alternatives: power stays 0.
  EXPECT_EQ(score(RejectionSet({0}), {true, true}).power, 0.0);
}

TEST(Summary, SampleStd) {
  const std::vector<double> v{1, 2, 3, 4};
  const Summary s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(5.0 / 3.0));
  EXPECT_DOUBLE_EQ(s.standard_error(), std::sqrt(5.0 / 3.0) / 2.0);
  EXPECT_EQ(summarize(std::vector<double>{7}).std, 0.0);
  EXPECT_EQ(summarize(std::vector<double>{}).n_trials, 0u);
}

TEST(Seeds, DerivedSeedsDiffer) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(2, {2, 3}));
}

TEST(Procedures, BonferroniInsideBhInsideQute) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Graph g = erdos_renyi(60, 0.1, seed);
    const auto s = sample_pvalues(GaussianModel{}, 60, seed);
    const GraphSchedule sched(g);
    const auto bonf = apply_procedure(BonferroniProcedure{0.2}, sched, s.table);
    const auto q = apply_procedure(QuteProcedure{}, sched, s.table);
    const auto b = apply_procedure(BhProcedure{0.2}, sched, s.table);
    ASSERT_TRUE(bonf.is_subset_of(q));
    ASSERT_TRUE(q.is_subset_of(b));
  }
}

TEST(Procedures, TrialPowerZeroWithoutSignal) {
  const auto m = run_trial(GraphSchedule(clique(30)), GaussianModel{2.0, 1.0, 0.0},
                           BhProcedure{0.2}, 4);
  EXPECT_EQ(m.power, 0.0);
}

EdgeSweepConfig small_edge_sweep(QuteEngine engine) {
  EdgeSweepConfig c;
  c.n = 40;
  c.p_grid = {0.0, 0.3, 1.0};
  c.reps = 30;
  c.seed = 9;
  c.engine = engine;
  return c;
}

TEST(Sweeps, EdgeEndpointsReduce) {
  const auto r = sweep_edge_probability(small_edge_sweep(QuteEngine::kSimulate));
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_EQ(r.points[0].param, "0");
  EXPECT_EQ(r.points[2].param, "1");
  EXPECT_EQ(r.points[0].find("qute").trials, r.points[0].find("bonferroni").trials);
  EXPECT_EQ(r.points[2].find("qute").trials, r.points[2].find("bh").trials);
  // The p-values are shared across p.
  EXPECT_EQ(r.points[0].find("bh").trials, r.points[1].find("bh").trials);
  EXPECT_THROW(r.points[0].find("nope"), std::out_of_range);
}

TEST(Sweeps, EnginesAgree) {
  const auto a = sweep_edge_probability(small_edge_sweep(QuteEngine::kSimulate));
  const auto b = sweep_edge_probability(small_edge_sweep(QuteEngine::kClosedForm));
  std::ostringstream sa, sb;
  write_sweep_csv(sa, a);
  write_sweep_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Sweeps, RoundsEndpointsReduce) {
  RoundSweepConfig c;
  c.grids = {{4, 4}, {2, 8}};
  c.c_grid = {0, 1, 4, 8};
  c.reps = 40;
  c.seed = 1;
  const auto r = sweep_rounds(c);
  ASSERT_EQ(r.points.size(), 4u);
  for (const char* label : {"4x4", "2x8"}) {
    const std::string tag = label;
    EXPECT_EQ(r.points[0].find("qute_" + tag).trials,
              r.points[0].find("bonferroni_" + tag).trials);
    EXPECT_EQ(r.points[3].find("qute_" + tag).trials,
              r.points[3].find("bh_" + tag).trials);
  }
  // radius(grid(4, 4)) = 4.
  EXPECT_EQ(r.points[2].find("qute_4x4").trials, r.points[2].find("bh_4x4").trials);
  for (std::size_t t = 0; t < c.reps; ++t) {
    for (std::size_t i = 1; i < r.points.size(); ++i) {
      ASSERT_LE(r.points[i - 1].find("qute_2x8").trials[t].power,
                r.points[i].find("qute_2x8").trials[t].power);
    }
  }
}

TEST(Sweeps, CsvAndJsonAreReproducible) {
  const auto a = sweep_edge_probability(small_edge_sweep(QuteEngine::kSimulate));
  const auto b = sweep_edge_probability(small_edge_sweep(QuteEngine::kSimulate));
  std::ostringstream ca, cb, ja;
  write_sweep_csv(ca, a);
  write_sweep_csv(cb, b);
  const std::string csv = ca.str();
  EXPECT_EQ(csv, cb.str());
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "param,procedure,metric,mean,std,n");
  // 3 params x 3 procedures x 3 metrics + header.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 28);

  write_sweep_json(ja, a);
  const auto j = nlohmann::json::parse(ja.str());
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j.size(), 27u);
  EXPECT_EQ(j[0]["param"], "0");
  EXPECT_EQ(j[0]["n"], 30);
}

TEST(Sweeps, DefaultGrid) {
  const auto g = default_p_grid();
  ASSERT_EQ(g.size(), 21u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_DOUBLE_EQ(g[3], 0.15);
}

}  // namespace
}  // namespace qute
