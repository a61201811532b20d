#pragma once

#include <string>
#include <vector>

#include "channeldiff/common.hpp"

namespace channeldiff::metrics {

struct MetricReport {
  double jsd = 0;
  double nrmse = 0;
  double mae = 0;
  size_t n_samples = 0;
  double cdf_9p5_fraction = 0;
};

// Histogram JSD with natural log; bounded by [0, ln 2].
double jsd(const std::vector<double>& p_samples, const std::vector<double>& q_samples,
           int n_bins = 64);

double nrmse(const std::vector<double>& y, const std::vector<double>& yhat);

double mae(const std::vector<double>& y, const std::vector<double>& yhat);

struct RankRow {
  std::string name;
  double jsd = 0, nrmse = 0, mae = 0;
  double flops = 0;  // optional, 0 when absent
  int r_avg = 0;
};

// Ranks 1 = best per metric, ties share the minimum rank; sorted by r_avg.
std::vector<RankRow> rank_models(std::vector<RankRow> rows);

// m_ef = 1 / (m * log10(flops))
double performance_density(double m, double flops);

struct CdfReport {
  double fraction_below_threshold = 0;
  std::vector<std::pair<double, double>> table;  // (error_db, cdf)
};

CdfReport cdf_report(const std::vector<double>& errors_db, double threshold = 9.5,
                     double resolution = 0.5);

}  // namespace channeldiff::metrics
