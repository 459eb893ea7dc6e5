#include "shaperefine/pipeline/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "shaperefine/error.hpp"
#include "shaperefine/numerics/checkpoint.hpp"

namespace shaperefine::pipeline {

std::string stratify(double init_cd_mm, double threshold_mm) {
  if (!std::isfinite(init_cd_mm)) throw Error("initial CD must be finite");
  return init_cd_mm < threshold_mm ? "easy" : "hard";
}

std::vector<std::string> stratify(std::span<const double> init_cd_mm, double threshold_mm) {
  std::vector<std::string> out;
  out.reserve(init_cd_mm.size());
  for (double cd : init_cd_mm) out.push_back(stratify(cd, threshold_mm));
  return out;
}

MeanStd describe(std::span<const double> v) {
  MeanStd s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double sq = 0.0;
    for (double x : v) sq += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(v.size() - 1));
  }
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return s;
}

namespace {

std::optional<double> wilcoxon_or_empty(const std::vector<double>& diffs) {
  std::size_t nonzero = 0;
  for (double d : diffs) nonzero += d != 0.0;
  if (nonzero < 6) return std::nullopt;
  return metrics::wilcoxon_signed_rank(diffs);
}

StratumSummary summarize_rows(const std::string& name, const std::vector<const metrics::CaseMetrics*>& rows) {
  StratumSummary s;
  s.stratum = name;
  s.count = rows.size();
  if (rows.empty()) return s;
  std::vector<double> ic, rc, ih, rh, dc, dh;
  for (const auto* r : rows) {
    ic.push_back(r->init_cd);
    rc.push_back(r->refined_cd);
    ih.push_back(r->init_hd);
    rh.push_back(r->refined_hd);
    dc.push_back(r->init_cd - r->refined_cd);
    dh.push_back(r->init_hd - r->refined_hd);
  }
  s.init_cd = describe(ic);
  s.refined_cd = describe(rc);
  s.init_hd = describe(ih);
  s.refined_hd = describe(rh);
  s.cd_improvement_pct = s.init_cd.mean > 0.0 ? 100.0 * (1.0 - s.refined_cd.mean / s.init_cd.mean) : 0.0;
  s.hd_improvement_pct = s.init_hd.mean > 0.0 ? 100.0 * (1.0 - s.refined_hd.mean / s.init_hd.mean) : 0.0;
  s.cd_p = wilcoxon_or_empty(dc);
  s.hd_p = wilcoxon_or_empty(dh);
  return s;
}

}  // namespace

EvalSummary summarize(std::span<const metrics::CaseMetrics> rows) {
  std::vector<const metrics::CaseMetrics*> easy, hard, all;
  for (const auto& r : rows) {
    if (r.stratum == "easy") {
      easy.push_back(&r);
    } else if (r.stratum == "hard") {
      hard.push_back(&r);
    } else {
      throw Error("case " + r.case_id + " has unknown stratum '" + r.stratum + "'");
    }
    all.push_back(&r);
  }
  return {{summarize_rows("easy", easy), summarize_rows("hard", hard), summarize_rows("all", all)}};
}

void write_summary_csv(const std::filesystem::path& path, const EvalSummary& summary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "stratum,count,init_cd_mean,init_cd_std,init_cd_median,refined_cd_mean,refined_cd_std,refined_cd_median,"
         "init_hd_mean,init_hd_std,init_hd_median,refined_hd_mean,refined_hd_std,refined_hd_median,"
         "cd_improvement_pct,hd_improvement_pct,cd_wilcoxon_p,hd_wilcoxon_p\n";
  auto f = [](double v) { return numerics::format_double(v); };
  auto p = [](const std::optional<double>& v) { return v ? numerics::format_double(*v) : std::string("degenerate"); };
  for (const StratumSummary& s : summary.strata) {
    out << s.stratum << ',' << s.count;
    for (const MeanStd* m : {&s.init_cd, &s.refined_cd, &s.init_hd, &s.refined_hd})
      out << ',' << f(m->mean) << ',' << f(m->std) << ',' << f(m->median);
    out << ',' << f(s.cd_improvement_pct) << ',' << f(s.hd_improvement_pct) << ',' << p(s.cd_p) << ',' << p(s.hd_p)
        << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

void write_cd_scatter_svg(const std::filesystem::path& path, std::span<const metrics::CaseMetrics> rows) {
  double hi = 1.0;
  for (const auto& r : rows) hi = std::max({hi, r.init_cd, r.refined_cd});
  hi *= 1.05;
  const double size = 400.0, pad = 50.0;
  auto px = [&](double v) { return pad + v / hi * size; };
  auto py = [&](double v) { return pad + size - v / hi * size; };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad << "\" height=\"" << size + 2 * pad
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n", pad,
                pad, size, size);
  out << buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n",
                px(0), py(0), px(hi), py(hi));
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", px(r.init_cd),
                  py(r.refined_cd), r.stratum == "easy" ? "steelblue" : "firebrick");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">initial CD (mm)</text>\n",
                pad + size / 2, pad + size + 35);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"15\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 15 %.1f)\">refined CD (mm)</text>\n",
                pad + size / 2, pad + size / 2);
  out << buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.1f</text>\n", pad + size,
                pad + size + 15, hi);
  out << buf << "</svg>\n";
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace shaperefine::pipeline
