#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qute/error.hpp"
#include "qute/experiment.hpp"
#include "qute/graph.hpp"
#include "qute/protocol.hpp"
#include "qute/sensors.hpp"

#ifndef QUTE_VERSION
#define QUTE_VERSION "0.0.0"
#endif

namespace qute::cli {
namespace {

/// Configuration problems found after parsing; reported with exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GraphArgs {
  std::string family = "clique";
  std::size_t n = 10;
  std::size_t m = 0;
  double p = 0.5;
  std::uint64_t seed = 0;
  std::string out;
};

struct RunArgs {
  std::string graph;
  std::string pvalues;
  GaussianModel model;
  std::uint64_t seed = 0;
  double alpha = 0.2;
  std::size_t rounds = 1;
  bool quantized = false;
  double drop_rate = 0.0;
  std::uint64_t drop_seed = 0;
  std::string procedure = "qute";
  std::string out;
  std::string transcript;
};

struct SweepArgs {
  std::string sweep;
  std::size_t n = 1000;
  std::vector<double> p_grid;
  std::size_t rounds = 1;
  std::vector<std::string> grids{"16x16", "2x128"};
  std::vector<std::size_t> c_grid{0, 1, 2, 4, 8, 16, 32, 64};
  std::optional<std::size_t> reps;
  GaussianModel model;
  double alpha = 0.2;
  std::uint64_t seed = 0;
  std::string engine = "simulate";
  std::string format = "csv";
  std::string out;
};

struct SensorArgs {
  std::string log;
  std::string connectivity;
  double gamma = 0.3;
  double alpha = 0.2;
  std::size_t rounds = 1;
  bool quantized = false;
  std::size_t block_size = 100;
  std::size_t reference_blocks = 500;
  std::optional<std::size_t> block;
  std::uint64_t seed = 0;
  std::string out;
};

void add_model_options(CLI::App* app, GaussianModel& model) {
  app->add_option("--mu", model.mu, "Signal strength of the alternatives")
      ->capture_default_str();
  app->add_option("--pi0", model.pi0, "Proportion of true nulls")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--rho", model.rho, "Equicorrelation of the test statistics")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

/// Resolved configuration lines of a subcommand, `key=value`.
std::vector<std::string> config_lines(const CLI::App& app) {
  std::vector<std::string> lines;
  std::istringstream in(app.config_to_str(true, false));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_header(std::ostream& out, const CLI::App& app) {
  out << "# qute " << QUTE_VERSION << ' ' << app.get_name() << '\n';
  for (const auto& line : config_lines(app)) out << "# " << line << '\n';
}

nlohmann::ordered_json header_json(const CLI::App& app) {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& line : config_lines(app)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return {{"qute", QUTE_VERSION}, {"command", app.get_name()}, {"config", config}};
}

void write_to(const std::string& path, std::ostream& fallback,
              const std::function<void(std::ostream&)>& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream file(path);
  if (!file) throw FormatError("cannot write " + path);
  write(file);
  if (!file) throw FormatError("failed writing " + path);
}

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw FormatError(std::string("cannot open ") + what + " " + path);
  return in;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
}

template <class Checked>
void validate_config(const Checked& c) {
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

Graph make_graph(const GraphArgs& a) {
  if (a.family == "gnp") return erdos_renyi(a.n, a.p, a.seed);
  if (a.family == "grid") {
    if (a.m == 0) throw UsageError("--family grid needs --m and --n");
    return grid(a.m, a.n);
  }
  if (a.family == "star") return star(a.n);
  if (a.family == "clique") return clique(a.n);
  if (a.family == "path") return path(a.n);
  return empty_graph(a.n);
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto x = text.find('x');
  std::size_t m = 0, n = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    m = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    n = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw UsageError("--grid expects MxN, got '" + text + "'");
  }
  if (m == 0 || n == 0) throw UsageError("--grid dimensions must be positive");
  return {m, n};
}

ProtocolConfig protocol_config(double alpha, std::size_t rounds, bool quantized,
                               double drop_rate, std::uint64_t drop_seed) {
  ProtocolConfig c;
  c.alpha = alpha;
  c.rounds = rounds;
  c.quantized = quantized;
  if (drop_rate > 0.0) c.drops = BernoulliDrops{drop_rate, drop_seed};
  return c;
}

void cmd_graph(const CLI::App& app, const GraphArgs& a, std::ostream& out) {
  const Graph g = make_graph(a);
  write_to(a.out, out, [&](std::ostream& o) {
    write_header(o, app);
    write_edge_list(o, g);
  });
}

void cmd_run(const CLI::App& app, const RunArgs& a, std::ostream& out,
             std::ostream& err) {
  check_alpha(a.alpha);
  validate_config(a.model);
  const auto config =
      protocol_config(a.alpha, a.rounds, a.quantized, a.drop_rate, a.drop_seed);
  validate_config(config);

  auto graph_in = open_input(a.graph, "graph");
  const Graph g = read_edge_list(graph_in);
  std::optional<HypothesisTable> table;
  if (a.pvalues.empty()) {
    table = sample_pvalues(a.model, g.node_count(), a.seed).table;
  } else {
    auto in = open_input(a.pvalues, "p-value file");
    table = read_pvalues_csv(in, g.node_count());
  }
  if (table->size() == 0) throw FormatError("no hypotheses to test");

  const GraphSchedule schedule(g);
  RejectionSet rejected;
  std::optional<Transcript> transcript;
  if (a.procedure == "qute") {
    auto outcome = run_qute(schedule, *table, config);
    rejected = std::move(outcome.rejected);
    transcript = std::move(outcome.transcript);
  } else if (a.procedure == "bh") {
    rejected = apply_procedure(BhProcedure{a.alpha}, schedule, *table);
  } else {
    rejected = apply_procedure(BonferroniProcedure{a.alpha}, schedule, *table);
  }

  write_to(a.out, out, [&](std::ostream& o) {
    write_header(o, app);
    write_rejections_csv(o, *table, rejected);
  });
  if (!a.transcript.empty()) {
    if (!transcript) throw UsageError("--transcript needs --procedure qute");
    write_to(a.transcript, out, [&](std::ostream& o) {
      o << header_json(app).dump() << '\n';
      write_transcript_jsonl(o, *transcript);
    });
  }

  err << "rejected " << rejected.k_hat() << " of " << table->size();
  std::vector<bool> is_null;
  for (const auto& h : table->entries()) {
    if (!h.is_null) break;
    is_null.push_back(*h.is_null);
  }
  if (is_null.size() == table->size()) {
    const auto m = score(rejected, is_null);
    err << "; fdp " << m.fdp << ", power " << m.power;
  }
  if (transcript) {
    err << "; " << transcript->delivered_messages << " messages, "
        << transcript->delivered_bits << " bits";
  }
  err << '\n';
}

void cmd_sweep(const CLI::App& app, const SweepArgs& a, std::ostream& out) {
  check_alpha(a.alpha);
  validate_config(a.model);
  const QuteEngine engine =
      a.engine == "closed-form" ? QuteEngine::kClosedForm : QuteEngine::kSimulate;
  SweepResult result;
  if (a.sweep == "p") {
    EdgeSweepConfig c;
    c.n = a.n;
    c.p_grid = a.p_grid.empty() ? default_p_grid() : a.p_grid;
    for (double p : c.p_grid) {
      if (!(p >= 0.0 && p <= 1.0)) throw UsageError("--p-grid values must lie in [0, 1]");
    }
    c.model = a.model;
    c.alpha = a.alpha;
    c.rounds = a.rounds;
    c.reps = a.reps.value_or(100);
    c.seed = a.seed;
    c.engine = engine;
    result = sweep_edge_probability(c);
  } else {
    RoundSweepConfig c;
    c.grids.clear();
    for (const auto& g : a.grids) c.grids.push_back(parse_grid(g));
    c.c_grid = a.c_grid;
    c.model = a.model;
    c.alpha = a.alpha;
    c.reps = a.reps.value_or(1000);
    c.seed = a.seed;
    c.engine = engine;
    result = sweep_rounds(c);
  }
  write_to(a.out, out, [&](std::ostream& o) {
    if (a.format == "json") {
      std::ostringstream rows;
      write_sweep_json(rows, result);
      auto doc = header_json(app);
      doc["rows"] = nlohmann::ordered_json::parse(rows.str());
      o << doc.dump(2) << '\n';
    } else {
      write_header(o, app);
      write_sweep_csv(o, result);
    }
  });
}

void cmd_sensors(const CLI::App& app, const SensorArgs& a, std::ostream& out,
                 std::ostream& err) {
  check_alpha(a.alpha);
  PipelineOptions options;
  options.block_size = a.block_size;
  options.reference_blocks = a.reference_blocks;
  options.gamma = a.gamma;
  options.protocol = protocol_config(a.alpha, a.rounds, a.quantized, 0.0, 0);
  options.block = a.block;
  options.seed = a.seed;
  if (a.block && *a.block < a.reference_blocks) {
    throw UsageError("--block must not lie inside the reference window");
  }

  const auto log = parse_log_file(a.log);
  auto links_in = open_input(a.connectivity, "connectivity file");
  const auto links = read_connectivity_csv(links_in);
  PipelineReport report;
  try {
    report = run_sensor_pipeline(log.records, links, options);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  write_to(a.out, out, [&](std::ostream& o) {
    write_header(o, app);
    write_sensor_report_csv(o, report.decisions);
  });

  if (log.malformed > 0) err << "skipped " << log.malformed << " malformed rows\n";
  for (const SensorId id : report.excluded) {
    err << "sensor " << id << " excluded: fewer than two readings\n";
  }
  std::size_t rejected = 0;
  for (const auto& d : report.decisions) rejected += d.rejected;
  err << "block " << report.block_index << ": rejected " << rejected << " of "
      << report.decisions.size() << " sensors\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Decentralized FDR control on graphs", "qute"};
  app.set_version_flag("--version", QUTE_VERSION);
  app.set_config("--config", "", "key=value file; use [graph], [run], ... sections");
  app.require_subcommand(1);

  GraphArgs graph_args;
  auto* graph_cmd = app.add_subcommand("graph", "Generate a graph as an edge list");
  graph_cmd->add_option("--family", graph_args.family, "Graph family")
      ->check(CLI::IsMember({"gnp", "grid", "star", "clique", "empty", "path"}))
      ->capture_default_str();
  graph_cmd->add_option("--n", graph_args.n, "Node count (columns for grid)")
      ->capture_default_str();
  graph_cmd->add_option("--m", graph_args.m, "Rows for grid")->capture_default_str();
  graph_cmd->add_option("--p", graph_args.p, "Edge probability for gnp")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  graph_cmd->add_option("--seed", graph_args.seed, "Seed for gnp")->capture_default_str();
  graph_cmd->add_option("--out", graph_args.out, "Output path (default stdout)");

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run one test on a graph");
  run_cmd->add_option("--graph", run_args.graph, "Edge-list file")->required();
  run_cmd->add_option("--pvalues", run_args.pvalues,
                      "CSV of home_node,pvalue[,is_null]; sampled from the model if omitted");
  add_model_options(run_cmd, run_args.model);
  run_cmd->add_option("--seed", run_args.seed, "Seed for sampled p-values")
      ->capture_default_str();
  run_cmd->add_option("--alpha", run_args.alpha, "Target FDR level")->capture_default_str();
  run_cmd->add_option("--rounds", run_args.rounds, "Communication rounds c")
      ->capture_default_str();
  run_cmd->add_flag("--quantized", run_args.quantized, "Send p-ranks instead of p-values");
  run_cmd->add_option("--drop-rate", run_args.drop_rate, "Per-message drop probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  run_cmd->add_option("--drop-seed", run_args.drop_seed, "Seed for message drops")
      ->capture_default_str();
  run_cmd->add_option("--procedure", run_args.procedure, "qute, bh or bonferroni")
      ->check(CLI::IsMember({"qute", "bh", "bonferroni"}))
      ->capture_default_str();
  run_cmd->add_option("--out", run_args.out, "Decision CSV path (default stdout)");
  run_cmd->add_option("--transcript", run_args.transcript, "Message transcript JSONL path");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo sweep over p or c");
  sweep_cmd->add_option("--sweep", sweep_args.sweep, "p: edge probability, c: rounds")
      ->check(CLI::IsMember({"p", "c"}))
      ->required();
  sweep_cmd->add_option("--n", sweep_args.n, "Nodes of G(n, p)")->capture_default_str();
  sweep_cmd->add_option("--p-grid", sweep_args.p_grid, "Edge probabilities (default 0:0.05:1)")
      ->delimiter(',');
  sweep_cmd->add_option("--rounds", sweep_args.rounds, "Rounds for the p sweep")
      ->capture_default_str();
  sweep_cmd->add_option("--grid", sweep_args.grids, "Grid shapes MxN for the c sweep")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--c-grid", sweep_args.c_grid, "Round counts for the c sweep")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--reps", sweep_args.reps,
                        "Trials per point (default 100 for p, 1000 for c)");
  add_model_options(sweep_cmd, sweep_args.model);
  sweep_cmd->add_option("--alpha", sweep_args.alpha, "Target FDR level")
      ->capture_default_str();
  sweep_cmd->add_option("--seed", sweep_args.seed, "Master seed")->capture_default_str();
  sweep_cmd->add_option("--engine", sweep_args.engine, "simulate or closed-form")
      ->check(CLI::IsMember({"simulate", "closed-form"}))
      ->capture_default_str();
  sweep_cmd->add_option("--format", sweep_args.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  sweep_cmd->add_option("--out", sweep_args.out, "Output path (default stdout)");

  SensorArgs sensor_args;
  auto* sensors_cmd = app.add_subcommand("sensors", "Test one block of a sensor log");
  sensors_cmd->add_option("--log", sensor_args.log, "Whitespace-separated sensor log")
      ->required();
  sensors_cmd->add_option("--connectivity", sensor_args.connectivity,
                          "CSV of link probabilities")
      ->required();
  sensors_cmd->add_option("--gamma", sensor_args.gamma, "Link threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sensors_cmd->add_option("--alpha", sensor_args.alpha, "Target FDR level")
      ->capture_default_str();
  sensors_cmd->add_option("--rounds", sensor_args.rounds, "Communication rounds c")
      ->capture_default_str();
  sensors_cmd->add_flag("--quantized", sensor_args.quantized,
                        "Send p-ranks instead of p-values");
  sensors_cmd->add_option("--block-size", sensor_args.block_size, "Epochs per block")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sensors_cmd->add_option("--reference-blocks", sensor_args.reference_blocks,
                          "Blocks in the reference window")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sensors_cmd->add_option("--block", sensor_args.block,
                          "Block to test (default: random block after the window)");
  sensors_cmd->add_option("--seed", sensor_args.seed, "Seed for the block choice")
      ->capture_default_str();
  sensors_cmd->add_option("--out", sensor_args.out, "Report CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsageError;
  }

  try {
    if (graph_cmd->parsed()) {
      cmd_graph(*graph_cmd, graph_args, out);
    } else if (run_cmd->parsed()) {
      cmd_run(*run_cmd, run_args, out, err);
    } else if (sweep_cmd->parsed()) {
      cmd_sweep(*sweep_cmd, sweep_args, out);
    } else {
      cmd_sensors(*sensors_cmd, sensor_args, out, err);
    }
  } catch (const UsageError& e) {
    err << "qute: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "qute: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace qute::cli
