#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shaperefine/metrics/metrics.hpp"

namespace shaperefine::pipeline {

/// "easy" iff init_cd < threshold; exactly the threshold is "hard".
std::string stratify(double init_cd_mm, double threshold_mm = 10.0);
std::vector<std::string> stratify(std::span<const double> init_cd_mm, double threshold_mm = 10.0);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one value
  double median = 0.0;
};

MeanStd describe(std::span<const double> values);

struct StratumSummary {
  std::string stratum;  // "easy", "hard" or "all"
  std::size_t count = 0;
  MeanStd init_cd, refined_cd, init_hd, refined_hd;
  /// 100 (1 - mean refined / mean init).
  double cd_improvement_pct = 0.0;
  double hd_improvement_pct = 0.0;
  /// Two-sided Wilcoxon signed-rank p on paired (init - refined); empty
  /// when the test is degenerate (fewer than 6 non-zero differences).
  std::optional<double> cd_p, hd_p;
};

struct EvalSummary {
  std::vector<StratumSummary> strata;  // easy, hard, all
  const StratumSummary& all() const { return strata.back(); }
};

/// Rows must carry their stratum; strata with no cases get count 0.
EvalSummary summarize(std::span<const metrics::CaseMetrics> rows);

/// One row per stratum; p-values of degenerate tests are written as
/// "degenerate".
void write_summary_csv(const std::filesystem::path& path, const EvalSummary& summary);

/// Scatter of initial vs refined CD per case, with the diagonal.
void write_cd_scatter_svg(const std::filesystem::path& path, std::span<const metrics::CaseMetrics> rows);

}  // namespace shaperefine::pipeline
