#include "channeldiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace channeldiff::metrics {

double jsd(const std::vector<double>& p_samples, const std::vector<double>& q_samples,
           int n_bins) {
  if (p_samples.empty() || q_samples.empty())
    throw ValidationError("jsd: sample sets must be non-empty");
  if (n_bins < 1) throw ValidationError("jsd: n_bins must be >= 1");

  double lo = p_samples[0], hi = p_samples[0];
  for (double v : p_samples) { lo = std::min(lo, v); hi = std::max(hi, v); }
  for (double v : q_samples) { lo = std::min(lo, v); hi = std::max(hi, v); }
  if (hi <= lo) return 0.0;  // all mass in one bin for both sets

  const double eps = 1e-12;
  std::vector<double> p(n_bins, eps), q(n_bins, eps);
  auto bin_of = [&](double v) {
    int b = static_cast<int>((v - lo) / (hi - lo) * n_bins);
    return std::clamp(b, 0, n_bins - 1);
  };
  for (double v : p_samples) p[bin_of(v)] += 1.0;
  for (double v : q_samples) q[bin_of(v)] += 1.0;
  double ps = 0, qs = 0;
  for (int i = 0; i < n_bins; ++i) { ps += p[i]; qs += q[i]; }
  double acc = 0;
  for (int i = 0; i < n_bins; ++i) {
    double pi = p[i] / ps, qi = q[i] / qs;
    double mi = 0.5 * (pi + qi);
    acc += 0.5 * pi * std::log(pi / mi) + 0.5 * qi * std::log(qi / mi);
  }
  return std::max(acc, 0.0);
}

double nrmse(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size() || y.size() < 2)
    throw ValidationError("nrmse: equal lengths >= 2 required");
  double lo = y[0], hi = y[0], se = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
    double d = y[i] - yhat[i];
    se += d * d;
  }
  if (hi <= lo) throw ValidationError("nrmse: constant y has zero range");
  return std::sqrt(se / y.size()) / (hi - lo);
}

double mae(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.size() != yhat.size() || y.empty())
    throw ValidationError("mae: equal non-empty lengths required");
  double acc = 0;
  for (size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - yhat[i]);
  return acc / y.size();
}

std::vector<RankRow> rank_models(std::vector<RankRow> rows) {
  if (rows.size() < 2) throw ValidationError("rank_models needs >= 2 rows");
  auto rank_of = [&](auto get) {
    std::vector<int> ranks(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      int r = 1;
      for (size_t j = 0; j < rows.size(); ++j)
        if (get(rows[j]) < get(rows[i])) ++r;
      ranks[i] = r;  // ties share the minimum rank
    }
    return ranks;
  };
  auto rj = rank_of([](const RankRow& r) { return r.jsd; });
  auto rn = rank_of([](const RankRow& r) { return r.nrmse; });
  auto rm = rank_of([](const RankRow& r) { return r.mae; });
  for (size_t i = 0; i < rows.size(); ++i) rows[i].r_avg = rj[i] + rn[i] + rm[i];
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RankRow& a, const RankRow& b) { return a.r_avg < b.r_avg; });
  return rows;
}

double performance_density(double m, double flops) {
  if (m <= 0) throw ValidationError("performance_density: m must be > 0");
  if (flops <= 10) throw ValidationError("performance_density: flops must be > 10");
  return 1.0 / (m * std::log10(flops));
}

CdfReport cdf_report(const std::vector<double>& errors_db, double threshold,
                     double resolution) {
  if (errors_db.empty()) throw ValidationError("cdf_report: empty errors");
  CdfReport out;
  std::vector<double> abs_err;
  abs_err.reserve(errors_db.size());
  double max_err = 0;
  for (double e : errors_db) {
    abs_err.push_back(std::abs(e));
    max_err = std::max(max_err, std::abs(e));
  }
  size_t below = 0;
  for (double e : abs_err)
    if (e < threshold) ++below;
  out.fraction_below_threshold = static_cast<double>(below) / abs_err.size();

  int n_levels = static_cast<int>(std::ceil(max_err / resolution)) + 1;
  for (int i = 0; i <= n_levels; ++i) {
    double level = i * resolution;
    size_t cnt = 0;
    for (double e : abs_err)
      if (e <= level) ++cnt;
    out.table.push_back({level, static_cast<double>(cnt) / abs_err.size()});
  }
  return out;
}

}  // namespace channeldiff::metrics
