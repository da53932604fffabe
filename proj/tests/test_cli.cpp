#include "cli.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace qute::cli {
namespace {

namespace fs = std::filesystem;

const std::string kFixtures = QUTE_FIXTURE_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result qute(std::vector<std::string> args) {
  args.insert(args.begin(), "qute");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string body(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    out += line + '\n';
  }
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(body(text));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qute_cli_" + std::string(::testing::UnitTest::GetInstance()
                                          ->current_test_info()
                                          ->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  std::string graph(std::vector<std::string> args) const {
    args.insert(args.begin(), "graph");
    const auto r = qute(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return write("graph.txt", r.out);
  }

  fs::path dir_;
};

std::size_t edge_lines(const std::string& text) {
  std::size_t n = 0;
  std::istringstream in(body(text));
  std::string line;
  while (std::getline(in, line)) n += !line.empty() && line.rfind("nodes", 0) != 0;
  return n;
}

TEST_F(Cli, GraphFamilies) {
  EXPECT_EQ(edge_lines(qute({"graph", "--family", "clique", "--n", "5"}).out), 10u);
  EXPECT_EQ(edge_lines(qute({"graph", "--family", "grid", "--m", "2", "--n", "2"}).out), 4u);
  EXPECT_EQ(edge_lines(qute({"graph", "--family", "gnp", "--n", "10", "--p", "0", "--seed", "1"}).out),
            0u);
  const auto r = qute({"graph", "--family", "star", "--n", "4"});
  EXPECT_EQ(r.out.rfind("# qute ", 0), 0u);
  EXPECT_NE(r.out.find("# family=\"star\""), std::string::npos) << r.out;
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(qute({}).code, kUsageError);
  EXPECT_EQ(qute({"graph", "--family", "torus"}).code, kUsageError);
  EXPECT_EQ(qute({"graph", "--family", "grid", "--n", "3"}).code, kUsageError);
  EXPECT_EQ(qute({"graph", "--family", "gnp", "--p", "2"}).code, kUsageError);
  EXPECT_EQ(qute({"run", "--graph", path("missing.txt")}).code, kDataError);
  const auto g = graph({"--family", "clique", "--n", "3"});
  EXPECT_EQ(qute({"run", "--graph", g, "--alpha", "1.5"}).code, kUsageError);
  EXPECT_EQ(qute({"run", "--graph", g, "--rho", "1"}).code, kUsageError);
  EXPECT_EQ(qute({"run", "--graph", g, "--pvalues", write("bad.csv", "0,2\n")}).code,
            kDataError);
  EXPECT_EQ(qute({"run", "--graph", write("bad_graph.txt", "0 1\n")}).code, kDataError);
  EXPECT_EQ(qute({"sweep", "--sweep", "c", "--grid", "8by8"}).code, kUsageError);
  EXPECT_EQ(qute({"--help"}).code, kOk);
}

TEST_F(Cli, RunCliqueEqualsBh) {
  const auto g = graph({"--family", "clique", "--n", "30"});
  const auto q = qute({"run", "--graph", g, "--seed", "3"});
  const auto b = qute({"run", "--graph", g, "--seed", "3", "--procedure", "bh"});
  ASSERT_EQ(q.code, 0) << q.err;
  EXPECT_EQ(body(q.out), body(b.out));
  EXPECT_NE(q.out.find("# rounds=1"), std::string::npos);
}

TEST_F(Cli, RunWithPValueFile) {
  const auto g = graph({"--family", "path", "--n", "3"});
  const auto p = write("p.csv", "home_node,pvalue\n0,0.01\n1,0.5\n2,0.02\n");
  const auto r = qute({"run", "--graph", g, "--pvalues", p, "--alpha", "0.15"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(body(r.out),
            "hypothesis_id,home_node,rejected,pvalue\n0,0,1,0.01\n1,1,0,0.5\n2,2,1,0.02\n");
}

TEST_F(Cli, RunFullDropsEqualNoRounds) {
  const auto g = graph({"--family", "gnp", "--n", "40", "--p", "0.2", "--seed", "2"});
  const auto dropped =
      qute({"run", "--graph", g, "--seed", "5", "--drop-rate", "1", "--drop-seed", "9"});
  const auto silent = qute({"run", "--graph", g, "--seed", "5", "--rounds", "0"});
  ASSERT_EQ(dropped.code, 0) << dropped.err;
  EXPECT_EQ(body(dropped.out), body(silent.out));
}

TEST_F(Cli, RunQuantizedIsIdentical) {
  const auto g = graph({"--family", "gnp", "--n", "40", "--p", "0.1", "--seed", "4"});
  for (const char* rounds : {"0", "1", "3"}) {
    const auto raw = qute({"run", "--graph", g, "--seed", "8", "--rounds", rounds});
    const auto quant =
        qute({"run", "--graph", g, "--seed", "8", "--rounds", rounds, "--quantized"});
    EXPECT_EQ(body(raw.out), body(quant.out));
  }
}

TEST_F(Cli, RunTranscript) {
  const auto g = graph({"--family", "path", "--n", "4"});
  const auto t = path("t.jsonl");
  ASSERT_EQ(qute({"run", "--graph", g, "--transcript", t, "--quantized"}).code, 0);
  std::ifstream in(t);
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  EXPECT_EQ(header["command"], "run");
  EXPECT_EQ(header["config"]["quantized"], "true");
  std::size_t messages = 0;
  while (std::getline(in, line)) {
    const auto m = nlohmann::json::parse(line);
    EXPECT_TRUE(m["kind"] == "pranks" || m["kind"] == "indicators");
    ++messages;
  }
  // Query: 6 directed messages. Exchange: only nodes with marks send.
  EXPECT_GE(messages, 6u);
  EXPECT_EQ(qute({"run", "--graph", g, "--procedure", "bh", "--transcript", t}).code,
            kUsageError);
}

TEST_F(Cli, ConfigFile) {
  const auto g = graph({"--family", "clique", "--n", "20"});
  const auto cfg = write("run.ini", "[run]\nalpha=0.1\nseed=6\n");
  const auto from_file = qute({"--config", cfg, "run", "--graph", g});
  const auto from_flags = qute({"run", "--graph", g, "--alpha", "0.1", "--seed", "6"});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_EQ(body(from_file.out), body(from_flags.out));
  EXPECT_NE(from_file.out.find("# alpha=0.1"), std::string::npos);
  // Flags override the file.
  const auto over = qute({"--config", cfg, "run", "--graph", g, "--alpha", "0.2"});
  EXPECT_NE(over.out.find("# alpha=0.2"), std::string::npos);
}

TEST_F(Cli, SweepIsDeterministic) {
  const std::vector<std::string> args{"sweep", "--sweep", "p", "--n", "100",
                                      "--reps", "50", "--seed", "7"};
  const auto a = qute(args);
  const auto b = qute(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST_F(Cli, SweepEndpointsReduce) {
  const auto r = qute({"sweep", "--sweep", "p", "--n", "60", "--reps", "40", "--p-grid",
                       "0,0.5,1", "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::string, std::string> cell;
  for (const auto& row : csv_rows(r.out)) {
    cell[row[0] + "/" + row[1] + "/" + row[2]] = row[3] + "," + row[4];
  }
  for (const char* metric : {"fdr", "power", "rejections"}) {
    const std::string m = metric;
    EXPECT_EQ(cell.at("0/qute/" + m), cell.at("0/bonferroni/" + m));
    EXPECT_EQ(cell.at("1/qute/" + m), cell.at("1/bh/" + m));
  }
}

TEST_F(Cli, SweepRoundsExactAtRadius) {
  const auto r = qute({"sweep", "--sweep", "c", "--grid", "8x8", "--c-grid", "0,8",
                       "--reps", "100", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::string, std::string> cell;
  for (const auto& row : csv_rows(r.out)) {
    cell[row[0] + "/" + row[1] + "/" + row[2]] = row[3] + "," + row[4];
  }
  EXPECT_EQ(cell.at("8/qute_8x8/power"), cell.at("8/bh_8x8/power"));
  EXPECT_EQ(cell.at("0/qute_8x8/power"), cell.at("0/bonferroni_8x8/power"));
}

TEST_F(Cli, SweepJson) {
  const auto r = qute({"sweep", "--sweep", "c", "--grid", "4x4", "--c-grid", "1",
                       "--reps", "5", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["command"], "sweep");
  EXPECT_EQ(j["rows"].size(), 9u);
}

std::vector<std::string> sensor_args(const std::string& log, const std::string& gamma) {
  return {"sensors", "--log", kFixtures + "/" + log, "--connectivity",
          kFixtures + "/connectivity.csv", "--gamma", gamma, "--block-size", "10",
          "--reference-blocks", "50", "--block", "60"};
}

std::vector<std::string> rejected_sensors(const std::string& report) {
  std::vector<std::string> ids;
  for (const auto& row : csv_rows(report)) {
    if (row[2] == "1") ids.push_back(row[0]);
  }
  return ids;
}

TEST_F(Cli, SensorsNormalFixture) {
  const auto r = qute(sensor_args("sensors_normal.txt", "1"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(rejected_sensors(r.out).empty());
  EXPECT_EQ(csv_rows(r.out).size(), 10u);
}

TEST_F(Cli, SensorsExcursion) {
  const auto r = qute(sensor_args("sensors_excursion.txt", "0"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ids = rejected_sensors(r.out);
  EXPECT_NE(std::find(ids.begin(), ids.end(), "4"), ids.end());

  std::vector<std::vector<std::string>> nested;
  for (const char* gamma : {"0.5", "0.3", "0.1"}) {
    nested.push_back(rejected_sensors(qute(sensor_args("sensors_excursion.txt", gamma)).out));
  }
  for (std::size_t i = 1; i < nested.size(); ++i) {
    for (const auto& id : nested[i - 1]) {
      EXPECT_NE(std::find(nested[i].begin(), nested[i].end(), id), nested[i].end());
    }
  }
}

TEST_F(Cli, SensorsReproducibleAndErrors) {
  auto args = sensor_args("sensors_excursion.txt", "0.3");
  args.push_back("--out");
  args.push_back(path("report.csv"));
  const auto read = [&] {
    std::ifstream in(path("report.csv"));
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  ASSERT_EQ(qute(args).code, 0);
  const std::string first = read();
  ASSERT_EQ(qute(args).code, 0);
  EXPECT_EQ(read(), first);
  EXPECT_EQ(first.rfind("# qute ", 0), 0u);

  auto inside = sensor_args("sensors_normal.txt", "0.3");
  inside.back() = "10";
  EXPECT_EQ(qute(inside).code, kUsageError);
  auto past = sensor_args("sensors_normal.txt", "0.3");
  past.back() = "500";
  EXPECT_EQ(qute(past).code, kDataError);
  auto missing = sensor_args("nope.txt", "0.3");
  EXPECT_EQ(qute(missing).code, kDataError);
}

}  // namespace
}  // namespace qute::cli
