#pragma once

#include <vector>

namespace duq {

double mean_of(const std::vector<double>& v);
double median_of(std::vector<double> v);
double quantile_of(std::vector<double> v, double q);
double rmse(const std::vector<double>& a, const std::vector<double>& b);

// NaN when either side has zero variance (undefined sentinel).
double pearson(const std::vector<double>& a, const std::vector<double>& b);
// Rank correlation with average ranks for ties; NaN when degenerate.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace duq
