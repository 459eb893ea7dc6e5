#include "shaperefine/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "shaperefine/error.hpp"
#include "shaperefine/geometry/kdtree.hpp"

namespace shaperefine::metrics {
namespace {

using geometry::KdTree;

void check_pair(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw Error("distance metrics need non-empty clouds");
  if (a.frame != b.frame) throw Error("distance metrics need clouds in the same frame");
}

std::vector<double> nearest_distances(const PointCloud& from, const PointCloud& to) {
  const KdTree tree(to.points);
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = std::sqrt(tree.nearest(from.points[i]).squared_distance);
  return d;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

struct SignedRanks {
  std::vector<long> doubled_ranks;  // 2 * mid-rank, always an integer
  std::vector<bool> positive;
  std::vector<std::size_t> tie_sizes;
};

SignedRanks rank_nonzero(std::span<const double> diffs) {
  std::vector<double> nz;
  for (double d : diffs) {
    if (!std::isfinite(d)) throw Error("wilcoxon differences must be finite");
    if (d != 0.0) nz.push_back(d);
  }
  if (nz.empty()) throw Error("wilcoxon test undefined: all differences are zero");
  std::sort(nz.begin(), nz.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  SignedRanks r;
  for (std::size_t i = 0; i < nz.size();) {
    std::size_t j = i;
    while (j + 1 < nz.size() && std::abs(nz[j + 1]) == std::abs(nz[i])) ++j;
    const long doubled = long(i + 1) + long(j + 1);  // 2 * average of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) {
      r.doubled_ranks.push_back(doubled);
      r.positive.push_back(nz[k] > 0);
    }
    r.tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }
  return r;
}

long doubled_w_plus(const SignedRanks& r) {
  long w = 0;
  for (std::size_t i = 0; i < r.positive.size(); ++i)
    if (r.positive[i]) w += r.doubled_ranks[i];
  return w;
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
  check_pair(a, b);
  return 0.5 * (mean(nearest_distances(a, b)) + mean(nearest_distances(b, a)));
}

double directed_hausdorff(const PointCloud& a, const PointCloud& b) {
  check_pair(a, b);
  const auto d = nearest_distances(a, b);
  return *std::max_element(d.begin(), d.end());
}

double directed_mean_distance(const PointCloud& a, const PointCloud& b) {
  check_pair(a, b);
  return mean(nearest_distances(a, b));
}

double hausdorff(const PointCloud& a, const PointCloud& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

F1Score f1_at_tau(const PointCloud& pred, const PointCloud& gt, double tau_mm) {
  if (!(tau_mm > 0.0)) throw Error("f1 threshold tau must be positive");
  check_pair(pred, gt);
  auto matched = [&](const std::vector<double>& d) {
    const auto n = std::count_if(d.begin(), d.end(), [&](double x) { return x <= tau_mm; });
    return 100.0 * double(n) / double(d.size());
  };
  F1Score s;
  s.precision = matched(nearest_distances(pred, gt));
  s.recall = matched(nearest_distances(gt, pred));
  const double denom = s.precision + s.recall;
  s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

double default_f1_tau(const PointCloud& reference) {
  const double diag = geometry::bounding_box_diagonal(reference.points);
  if (!(diag > 0.0)) throw Error("reference cloud has a zero bounding box");
  return 0.01 * diag;
}

double wilcoxon_exact_p(std::span<const double> diffs) {
  const SignedRanks r = rank_nonzero(diffs);
  const long total = std::accumulate(r.doubled_ranks.begin(), r.doubled_ranks.end(), 0L);
  // count[s] = number of sign assignments whose doubled W+ equals s
  std::vector<double> count(std::size_t(total) + 1, 0.0);
  count[0] = 1.0;
  long reach = 0;
  for (long rank : r.doubled_ranks) {
    for (long s = reach; s >= 0; --s)
      if (count[std::size_t(s)] != 0.0) count[std::size_t(s + rank)] += count[std::size_t(s)];
    reach += rank;
  }
  const double all = std::ldexp(1.0, int(r.doubled_ranks.size()));
  const long w = doubled_w_plus(r);
  double lower = 0.0, upper = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (s <= w) lower += count[std::size_t(s)];
    if (s >= w) upper += count[std::size_t(s)];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

double wilcoxon_normal_p(std::span<const double> diffs) {
  const SignedRanks r = rank_nonzero(diffs);
  const double n = double(r.doubled_ranks.size());
  const double w = 0.5 * double(doubled_w_plus(r));
  const double mu = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  for (std::size_t t : r.tie_sizes) var -= (double(t) * t * t - double(t)) / 48.0;
  if (!(var > 0.0)) return 1.0;
  const double dev = std::max(0.0, std::abs(w - mu) - 0.5);
  const double z = dev / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

double wilcoxon_signed_rank(std::span<const double> diffs) {
  const std::size_t nonzero = std::size_t(std::count_if(diffs.begin(), diffs.end(), [](double d) { return d != 0.0; }));
  if (nonzero == 0) throw Error("wilcoxon test undefined: all differences are zero");
  if (nonzero < 6) throw Error("wilcoxon test needs at least 6 nonzero differences, got " + std::to_string(nonzero));
  return nonzero <= 15 ? wilcoxon_exact_p(diffs) : wilcoxon_normal_p(diffs);
}

void write_case_report(const std::filesystem::path& path, std::span<const CaseMetrics> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << kCaseReportHeader << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    for (const std::string* s : {&r.case_id, &r.split, &r.stratum})
      if (s->find_first_of(",\n\"") != std::string::npos) throw Error("CSV field contains a delimiter: " + *s);
    out << r.case_id << ',' << r.split << ',' << num(r.init_cd) << ',' << num(r.refined_cd) << ',' << num(r.init_hd)
        << ',' << num(r.refined_hd) << ',' << r.stratum << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<CaseMetrics> read_case_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCaseReportHeader) throw Error(path.string() + ": unexpected header");
  std::vector<CaseMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw Error(path.string() + ": expected 7 columns in '" + line + "'");
    rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), f[6]});
  }
  return rows;
}

}  // namespace shaperefine::metrics
