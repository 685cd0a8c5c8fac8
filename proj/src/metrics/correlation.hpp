#pragma once

#include <span>
#include <vector>

namespace ieqa::metrics {

/// Validated prediction/target pair: equal length >= 2, all finite.
struct PairedSeries {
  std::span<const double> pred;
  std::span<const double> target;

  PairedSeries(std::span<const double> p, std::span<const double> t);
  std::size_t size() const { return pred.size(); }
};

/// 1-based fractional ranks; ties share the average of their positions.
std::vector<double> average_ranks(std::span<const double> v);

double pearson(std::span<const double> a, std::span<const double> b);

/// Spearman rank-order correlation (Pearson of average ranks).
double srocc(const PairedSeries& ps);
/// Pearson linear correlation.
double plcc(const PairedSeries& ps);
/// Kendall tau-b.
double krcc(const PairedSeries& ps);
double rmse(const PairedSeries& ps);

struct CorrelationSummary {
  double srocc = 0.0;
  double plcc = 0.0;
  double krcc = 0.0;
  double rmse = 0.0;
};

/// All four at once. Throws DegenerateError when any correlation is undefined.
CorrelationSummary summarize(const PairedSeries& ps);

}  // namespace ieqa::metrics
