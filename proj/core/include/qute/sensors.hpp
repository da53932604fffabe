#pragma once

// Sensor-network pipeline: parse whitespace-separated temperature logs,
// remove each sensor's linear trend, average consecutive epoch blocks, turn a
// block into two-sided empirical-CDF p-values against a reference window, and
// run QuTE on a thresholded connectivity graph.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qute/graph.hpp"
#include "qute/multiple_testing.hpp"
#include "qute/protocol.hpp"

namespace qute {

using SensorId = std::int64_t;

struct SensorRecord {
  std::uint64_t epoch = 0;
  SensorId sensor_id = 0;
  double temperature = 0.0;

  friend bool operator==(const SensorRecord&, const SensorRecord&) = default;
};

struct ParsedLog {
  /// Sorted by (sensor, epoch).
  std::vector<SensorRecord> records;
  std::size_t rows = 0;
  std::size_t malformed = 0;
};

/// Rows are `date time epoch sensor_id temperature ...`; extra columns are
/// ignored. Malformed rows are skipped and counted. Throws FormatError when
/// more than half of the non-blank rows are malformed.
ParsedLog parse_log(std::istream& in);
/// Throws FormatError if the file cannot be opened.
ParsedLog parse_log_file(const std::filesystem::path& path);

/// Records grouped per sensor, each series in epoch order.
using SensorSeries = std::map<SensorId, std::vector<SensorRecord>>;

SensorSeries group_by_sensor(const std::vector<SensorRecord>& records);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of temperature on epoch.
LinearFit fit_trend(const std::vector<SensorRecord>& series);

struct DetrendResult {
  SensorSeries residuals;
  /// Sensors with fewer than two records.
  std::vector<SensorId> excluded;
};

/// Replaces every temperature by its residual from the sensor's OLS line.
DetrendResult detrend(const SensorSeries& series);

/// Mean temperature per sensor over one block of consecutive epochs.
struct SnapshotSample {
  std::size_t block_index = 0;
  /// nullopt marks a sensor with no readings in the block.
  std::map<SensorId, std::optional<double>> means;
};

/// Blocks are [origin + b * block_size, origin + (b + 1) * block_size) where
/// origin is the smallest epoch over all sensors. Every block lists every
/// sensor. Throws std::invalid_argument for block_size == 0.
std::vector<SnapshotSample> block_average(const SensorSeries& series,
                                          std::size_t block_size = 100);

/// Right-continuous empirical CDF, F(t) = #{reference <= t} / n.
class EmpiricalCdf {
 public:
  /// Throws std::invalid_argument on an empty reference set.
  explicit EmpiricalCdf(std::vector<double> reference);

  double operator()(double t) const;
  std::size_t size() const noexcept { return sorted_.size(); }
  const std::vector<double>& reference() const noexcept { return sorted_; }

 private:
  std::vector<double> sorted_;
};

/// P = 2 min(F(t), 1 - F(t)), clipped to [0, 1].
PValue snapshot_pvalue(const EmpiricalCdf& cdf, double t);

/// One CDF per sensor built from its non-missing means in the first
/// `reference_blocks` blocks. Sensors without any reference value are left
/// out.
std::map<SensorId, EmpiricalCdf> reference_cdfs(
    const std::vector<SnapshotSample>& samples,
    std::size_t reference_blocks = 500);

/// Link probabilities between labelled sensors; row i belongs to
/// sensor_ids[i].
struct SensorConnectivity {
  std::vector<SensorId> sensor_ids;
  ConnectivityMatrix matrix;
};

/// CSV with a header row `sensor_id,<id>,<id>,...` followed by one row per
/// sensor, `<id>,<p>,<p>,...`, in the same order. Throws FormatError.
SensorConnectivity read_connectivity_csv(std::istream& in);

struct SensorDecision {
  SensorId sensor_id = 0;
  double pvalue = 1.0;
  bool rejected = false;
  std::size_t block_index = 0;

  friend bool operator==(const SensorDecision&, const SensorDecision&) =
      default;
};

/// One hypothesis per sensor of `links`, in its order. Sensors missing from
/// the sample, or without a CDF, get p = 1. Runs QuTE on
/// threshold_graph(links.matrix, gamma).
std::vector<SensorDecision> run_snapshot(
    const SnapshotSample& sample, const std::map<SensorId, EmpiricalCdf>& cdfs,
    const SensorConnectivity& links, double gamma,
    const ProtocolConfig& config);

struct PipelineOptions {
  std::size_t block_size = 100;
  std::size_t reference_blocks = 500;
  double gamma = 0.3;
  ProtocolConfig protocol;
  /// Block to test. When unset a block is drawn uniformly from those after
  /// the reference window using `seed`.
  std::optional<std::size_t> block;
  std::uint64_t seed = 0;
};

struct PipelineReport {
  std::vector<SensorDecision> decisions;
  std::vector<SensorId> excluded;
  std::size_t block_index = 0;
};

/// detrend -> block_average -> reference_cdfs -> run_snapshot. Throws
/// std::invalid_argument when the chosen block lies inside the reference
/// window or past the data.
PipelineReport run_sensor_pipeline(const std::vector<SensorRecord>& records,
                                   const SensorConnectivity& links,
                                   const PipelineOptions& options);

/// `sensor_id,pvalue,rejected,block_index` with a header row.
void write_sensor_report_csv(std::ostream& out,
                             const std::vector<SensorDecision>& decisions);

}  // namespace qute
