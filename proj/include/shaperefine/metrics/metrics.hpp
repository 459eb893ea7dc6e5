#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shaperefine/geometry/types.hpp"

namespace shaperefine::metrics {

using geometry::PointCloud;

/// Symmetric Chamfer distance: 0.5 * (mean_a d(a, B) + mean_b d(b, A)),
/// with plain (non-squared) Euclidean distances.
double chamfer(const PointCloud& a, const PointCloud& b);

/// max over a of the distance to the nearest point of b.
double directed_hausdorff(const PointCloud& a, const PointCloud& b);
/// mean over a of the distance to the nearest point of b.
double directed_mean_distance(const PointCloud& a, const PointCloud& b);
double hausdorff(const PointCloud& a, const PointCloud& b);

struct F1Score {
  double precision = 0.0;  // percent
  double recall = 0.0;     // percent
  double f1 = 0.0;         // percent
};

/// A point counts as matched when its nearest neighbour in the other cloud is
/// within tau_mm (inclusive).
F1Score f1_at_tau(const PointCloud& pred, const PointCloud& gt, double tau_mm);

/// 1% of the bounding-box diagonal of the reference cloud.
double default_f1_tau(const PointCloud& reference);

/// Two-sided Wilcoxon signed-rank p-value. Zero differences are dropped;
/// ties share mid-ranks. Uses the exact null distribution for n <= 15 and
/// the tie-corrected normal approximation with continuity correction above.
/// Throws if fewer than 6 nonzero differences remain.
double wilcoxon_signed_rank(std::span<const double> diffs);

/// Exact two-sided p for any n (dynamic programming over doubled ranks).
double wilcoxon_exact_p(std::span<const double> diffs);
/// Normal-approximation two-sided p for any n >= 1.
double wilcoxon_normal_p(std::span<const double> diffs);

struct CaseMetrics {
  std::string case_id;
  std::string split;
  double init_cd = 0.0;
  double refined_cd = 0.0;
  double init_hd = 0.0;
  double refined_hd = 0.0;
  std::string stratum;
};

inline constexpr const char* kCaseReportHeader = "case_id,split,init_cd,refined_cd,init_hd,refined_hd,stratum";

void write_case_report(const std::filesystem::path& path, std::span<const CaseMetrics> rows);
std::vector<CaseMetrics> read_case_report(const std::filesystem::path& path);

}  // namespace shaperefine::metrics
