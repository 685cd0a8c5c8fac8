#include "metrics/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace ieqa::metrics {

PairedSeries::PairedSeries(std::span<const double> p, std::span<const double> t) : pred(p), target(t) {
  if (p.size() != t.size()) throw ValidationError("prediction and target lengths differ");
  if (p.size() < 2) throw ValidationError("correlation needs at least two samples");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(p.begin(), p.end(), finite) || !std::all_of(t.begin(), t.end(), finite))
    throw ValidationError("series contain non-finite values");
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateError("correlation undefined for a constant series");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double srocc(const PairedSeries& ps) {
  const auto rp = average_ranks(ps.pred);
  const auto rt = average_ranks(ps.target);
  return pearson(rp, rt);
}

double plcc(const PairedSeries& ps) { return pearson(ps.pred, ps.target); }

double krcc(const PairedSeries& ps) {
  // O(n^2) pair scan; n stays in the low thousands here.
  long long concordant = 0, discordant = 0, tie_pred = 0, tie_target = 0;
  const auto n = ps.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dp = ps.pred[i] - ps.pred[j];
      const double dt = ps.target[i] - ps.target[j];
      if (dp == 0.0 && dt == 0.0) continue;
      if (dp == 0.0) {
        ++tie_pred;
      } else if (dt == 0.0) {
        ++tie_target;
      } else if ((dp > 0) == (dt > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double denom_pred = static_cast<double>(concordant + discordant + tie_target);
  const double denom_target = static_cast<double>(concordant + discordant + tie_pred);
  if (denom_pred == 0.0 || denom_target == 0.0) throw DegenerateError("Kendall tau-b undefined: all pairs tied");
  return std::clamp(static_cast<double>(concordant - discordant) / std::sqrt(denom_pred * denom_target), -1.0, 1.0);
}

double rmse(const PairedSeries& ps) {
  double ss = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double d = ps.pred[i] - ps.target[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(ps.size()));
}

CorrelationSummary summarize(const PairedSeries& ps) { return {srocc(ps), plcc(ps), krcc(ps), rmse(ps)}; }

}  // namespace ieqa::metrics
