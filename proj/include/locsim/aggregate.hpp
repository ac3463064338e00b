#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "locsim/pruning.hpp"

namespace locsim {

// Nearest-rank percentile: sorted ascending, element at index ceil(q*len)-1.
// q in (0, 1]; throws DataError on empty samples.
double percentile(std::vector<double> samples, double q);

// Weighted generalization (all-equal weights reduce to the unweighted form):
// smallest sample whose cumulative weight reaches q * total_weight.
double weighted_percentile(std::vector<std::pair<double, double>> weighted_samples, double q);

struct AggregateRow {
    std::string game_label;
    std::string encoding;
    std::string logic;
    std::string mode;  // "greedy" | "statistical"
    std::uint32_t n = 0;
    std::uint64_t samples = 0;
    double p25 = 0, p50 = 0, p75 = 0;
    double mean_success_rate = 0;
    std::string criterion;  // empty for greedy rows
};

struct AggregateReport {
    std::vector<AggregateRow> rows;
};

struct AggregateKeys {
    std::string game_label;
    std::string encoding;
    std::string logic;
    std::string mode;
};

// One row per n present in any trace; traces shorter than n contribute
// nothing to that row. Greedy rows distribute remaining candidate counts,
// statistical rows the ground-truth rank, with recall under the criterion at
// `criterion_index`. Weights are per-trace; empty means equal weights.
AggregateReport aggregate_greedy(const std::vector<GreedyTrace>& traces,
                                 const AggregateKeys& keys,
                                 const std::vector<double>& weights = {});
AggregateReport aggregate_statistical(const std::vector<StatTrace>& traces,
                                      const AggregateKeys& keys,
                                      const SuccessCriterion& criterion,
                                      std::size_t criterion_index,
                                      const std::vector<double>& weights = {});

enum class ReportFormat { Csv, Json, Svg };

// CSV columns, exact order:
// game_label,encoding,logic,mode,n,samples,p25,p50,p75,mean_success_rate,criterion
// JSON mirrors rows; SVG renders one self-contained chart per
// (game_label, encoding, logic, mode, criterion) group: percentiles on a log
// left axis, mean success rate in red on the right axis.
void emit_report(const AggregateReport& report, const std::set<ReportFormat>& formats,
                 const std::filesystem::path& out_dir,
                 const std::string& base_name = "report");

std::string report_to_csv(const AggregateReport& report);
AggregateReport report_from_csv(const std::string& csv);

}  // namespace locsim
