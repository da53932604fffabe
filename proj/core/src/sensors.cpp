#include "qute/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "qute/error.hpp"
#include "text.hpp"

namespace qute {

namespace {

std::optional<SensorRecord> parse_row(const std::string& line) {
  std::istringstream row(line);
  std::string date, time, epoch, sensor, temperature;
  if (!(row >> date >> time >> epoch >> sensor >> temperature)) {
    return std::nullopt;
  }
  const auto e = detail::parse_number<std::uint64_t>(epoch);
  const auto s = detail::parse_number<SensorId>(sensor);
  const auto t = detail::parse_number<double>(temperature);
  if (!e || !s || !t || !std::isfinite(*t)) return std::nullopt;
  return SensorRecord{*e, *s, *t};
}

}  // namespace

ParsedLog parse_log(std::istream& in) {
  ParsedLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::is_skippable(line)) continue;
    ++log.rows;
    if (auto rec = parse_row(line)) {
      log.records.push_back(*rec);
    } else {
      ++log.malformed;
    }
  }
  if (log.malformed * 2 > log.rows) {
    throw FormatError(std::to_string(log.malformed) + " of " +
                      std::to_string(log.rows) +
                      " sensor log rows are malformed");
  }
  std::stable_sort(log.records.begin(), log.records.end(),
                   [](const SensorRecord& a, const SensorRecord& b) {
                     return std::tie(a.sensor_id, a.epoch) <
                            std::tie(b.sensor_id, b.epoch);
                   });
  return log;
}

ParsedLog parse_log_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open sensor log " + path.string());
  return parse_log(in);
}

SensorSeries group_by_sensor(const std::vector<SensorRecord>& records) {
  SensorSeries out;
  for (const auto& r : records) out[r.sensor_id].push_back(r);
  for (auto& [id, series] : out) {
    std::stable_sort(series.begin(), series.end(),
                     [](const SensorRecord& a, const SensorRecord& b) {
                       return a.epoch < b.epoch;
                     });
  }
  return out;
}

namespace {

struct Moments {
  double x_mean = 0.0;
  double y_mean = 0.0;
  double slope = 0.0;
};

Moments centered_fit(const std::vector<SensorRecord>& series) {
  Moments m;
  const double n = static_cast<double>(series.size());
  for (const auto& r : series) {
    m.x_mean += static_cast<double>(r.epoch);
    m.y_mean += r.temperature;
  }
  m.x_mean /= n;
  m.y_mean /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& r : series) {
    const double dx = static_cast<double>(r.epoch) - m.x_mean;
    sxx += dx * dx;
    sxy += dx * (r.temperature - m.y_mean);
  }
  m.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return m;
}

}  // namespace

LinearFit fit_trend(const std::vector<SensorRecord>& series) {
  if (series.empty()) throw std::invalid_argument("empty series");
  const Moments m = centered_fit(series);
  return LinearFit{m.slope, m.y_mean - m.slope * m.x_mean};
}

DetrendResult detrend(const SensorSeries& series) {
  DetrendResult out;
  for (const auto& [id, records] : series) {
    if (records.size() < 2) {
      out.excluded.push_back(id);
      continue;
    }
    const Moments m = centered_fit(records);
    auto& residuals = out.residuals[id];
    residuals.reserve(records.size());
    for (const auto& r : records) {
      const double dx = static_cast<double>(r.epoch) - m.x_mean;
      residuals.push_back(
          SensorRecord{r.epoch, id, (r.temperature - m.y_mean) - m.slope * dx});
    }
  }
  return out;
}

std::vector<SnapshotSample> block_average(const SensorSeries& series,
                                          std::size_t block_size) {
  if (block_size == 0) throw std::invalid_argument("block_size must be >= 1");
  std::optional<std::uint64_t> first;
  std::uint64_t last = 0;
  for (const auto& [id, records] : series) {
    for (const auto& r : records) {
      first = first ? std::min(*first, r.epoch) : r.epoch;
      last = std::max(last, r.epoch);
    }
  }
  if (!first) return {};
  const std::size_t blocks = (last - *first) / block_size + 1;

  std::vector<SnapshotSample> out(blocks);
  for (std::size_t b = 0; b < blocks; ++b) out[b].block_index = b;
  std::vector<double> sum(blocks);
  std::vector<std::size_t> count(blocks);
  for (const auto& [id, records] : series) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (const auto& r : records) {
      const std::size_t b = (r.epoch - *first) / block_size;
      sum[b] += r.temperature;
      ++count[b];
    }
    for (std::size_t b = 0; b < blocks; ++b) {
      out[b].means[id] =
          count[b] == 0
              ? std::nullopt
              : std::optional<double>(sum[b] / static_cast<double>(count[b]));
    }
  }
  return out;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> reference)
    : sorted_(std::move(reference)) {
  if (sorted_.empty()) throw std::invalid_argument("empty reference set");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double t) const {
  const auto at_or_below = std::upper_bound(sorted_.begin(), sorted_.end(), t);
  return static_cast<double>(at_or_below - sorted_.begin()) /
         static_cast<double>(sorted_.size());
}

PValue snapshot_pvalue(const EmpiricalCdf& cdf, double t) {
  const double f = cdf(t);
  return PValue(std::clamp(2.0 * std::min(f, 1.0 - f), 0.0, 1.0));
}

std::map<SensorId, EmpiricalCdf> reference_cdfs(
    const std::vector<SnapshotSample>& samples,
    std::size_t reference_blocks) {
  std::map<SensorId, std::vector<double>> values;
  for (const auto& s : samples) {
    if (s.block_index >= reference_blocks) continue;
    for (const auto& [id, mean] : s.means) {
      if (mean) values[id].push_back(*mean);
    }
  }
  std::map<SensorId, EmpiricalCdf> out;
  for (auto& [id, v] : values) out.emplace(id, EmpiricalCdf(std::move(v)));
  return out;
}

SensorConnectivity read_connectivity_csv(std::istream& in) {
  std::vector<SensorId> ids;
  std::vector<double> probs;
  std::size_t rows = 0;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_skippable(line)) continue;
    const auto fields = detail::split(line, ',');
    const auto where = "connectivity line " + std::to_string(line_no) + ": ";
    if (!have_header) {
      for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto id = detail::parse_number<SensorId>(fields[i]);
        if (!id) throw FormatError(where + "bad sensor id in header");
        ids.push_back(*id);
      }
      have_header = true;
      continue;
    }
    if (rows >= ids.size() || fields.size() != ids.size() + 1) {
      throw FormatError(where + "row shape does not match the header");
    }
    const auto id = detail::parse_number<SensorId>(fields[0]);
    if (!id || *id != ids[rows]) {
      throw FormatError(where + "row label must match header order");
    }
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto p = detail::parse_number<double>(fields[i]);
      if (!p) throw FormatError(where + "bad probability");
      probs.push_back(*p);
    }
    ++rows;
  }
  if (!have_header || rows != ids.size()) {
    throw FormatError("connectivity matrix is incomplete");
  }
  try {
    return SensorConnectivity{ids, ConnectivityMatrix(ids.size(), probs)};
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

std::vector<SensorDecision> run_snapshot(
    const SnapshotSample& sample, const std::map<SensorId, EmpiricalCdf>& cdfs,
    const SensorConnectivity& links, double gamma,
    const ProtocolConfig& config) {
  std::vector<double> pvalues;
  pvalues.reserve(links.sensor_ids.size());
  for (const SensorId id : links.sensor_ids) {
    const auto mean = sample.means.find(id);
    const auto cdf = cdfs.find(id);
    if (mean == sample.means.end() || !mean->second || cdf == cdfs.end()) {
      pvalues.push_back(1.0);
    } else {
      pvalues.push_back(snapshot_pvalue(cdf->second, *mean->second).value());
    }
  }
  const auto table = HypothesisTable::one_per_node(pvalues);
  const Graph g = threshold_graph(links.matrix, gamma);
  const auto outcome = run_qute(GraphSchedule(g), table, config);

  std::vector<SensorDecision> out;
  out.reserve(pvalues.size());
  for (std::size_t i = 0; i < pvalues.size(); ++i) {
    out.push_back(SensorDecision{
        links.sensor_ids[i], pvalues[i],
        outcome.rejected.contains(static_cast<HypothesisId>(i)),
        sample.block_index});
  }
  return out;
}

PipelineReport run_sensor_pipeline(const std::vector<SensorRecord>& records,
                                   const SensorConnectivity& links,
                                   const PipelineOptions& options) {
  const auto detrended = detrend(group_by_sensor(records));
  const auto samples = block_average(detrended.residuals, options.block_size);
  const auto cdfs = reference_cdfs(samples, options.reference_blocks);

  PipelineReport report;
  report.excluded = detrended.excluded;
  if (options.block) {
    if (*options.block < options.reference_blocks) {
      throw std::invalid_argument("block lies inside the reference window");
    }
    if (*options.block >= samples.size()) {
      throw std::invalid_argument("block lies past the end of the data");
    }
    report.block_index = *options.block;
  } else {
    if (samples.size() <= options.reference_blocks) {
      throw std::invalid_argument("no blocks after the reference window");
    }
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(options.reference_blocks,
                                                    samples.size() - 1);
    report.block_index = pick(rng);
  }
  report.decisions = run_snapshot(samples[report.block_index], cdfs, links,
                                  options.gamma, options.protocol);
  return report;
}

void write_sensor_report_csv(std::ostream& out,
                             const std::vector<SensorDecision>& decisions) {
  out << "sensor_id,pvalue,rejected,block_index\n";
  for (const auto& d : decisions) {
    out << d.sensor_id << ',' << detail::format_double(d.pvalue) << ','
        << (d.rejected ? 1 : 0) << ',' << d.block_index << '\n';
  }
}

}  // namespace qute
