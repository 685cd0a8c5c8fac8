#include "training/losses.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/log.hpp"

namespace ieqa::training {

void LossConfig::validate() const {
  if (!(alpha >= 0.0)) throw ValidationError("loss alpha must be >= 0");
  if (!(rank_margin >= 0.0)) throw ValidationError("rank margin must be >= 0");
  if (!(tie_epsilon >= 0.0)) throw ValidationError("tie epsilon must be >= 0");
}

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ValidationError("prediction and target lengths differ");
  if (pred.size() < 2) throw ValidationError("loss needs at least two samples");
}

}  // namespace

LossValue plcc_loss(std::span<const double> pred, std::span<const double> target) {
  check_lengths(pred, target);
  const auto n = pred.size();
  LossValue out;
  out.grad.assign(n, 0.0);

  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += pred[i];
    mt += target[i];
  }
  mp /= static_cast<double>(n);
  mt /= static_cast<double>(n);
  std::vector<double> dp(n), dt(n);
  double spp = 0.0, stt = 0.0, spt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dp[i] = pred[i] - mp;
    dt[i] = target[i] - mt;
    spp += dp[i] * dp[i];
    stt += dt[i] * dt[i];
    spt += dp[i] * dt[i];
  }
  if (spp == 0.0 || stt == 0.0) {
    log::debug("PLCC loss on a constant series; using 1");
    out.value = 1.0;
    return out;
  }
  const double np = std::sqrt(spp), nt = std::sqrt(stt);
  const double r = std::clamp(spt / std::sqrt(spp * stt), -1.0, 1.0);
  out.value = 0.5 * (1.0 - r);
  // dr/dp_k = dt_k / (|dp||dt|) - r dp_k / |dp|^2; centering terms cancel
  for (std::size_t k = 0; k < n; ++k) out.grad[k] = -0.5 * (dt[k] / (np * nt) - r * dp[k] / spp);
  return out;
}

LossValue rank_loss(std::span<const double> pred, std::span<const double> target, const LossConfig& cfg) {
  check_lengths(pred, target);
  const auto n = pred.size();
  LossValue out;
  out.grad.assign(n, 0.0);
  std::size_t pairs = 0;
  double sum = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> active;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!(target[i] > target[j] + cfg.tie_epsilon)) continue;
      ++pairs;
      const double h = cfg.rank_margin + pred[j] - pred[i];
      if (h > 0.0) {
        sum += h;
        active.emplace_back(i, j);
      }
    }
  }
  if (pairs == 0) return out;
  const double inv = 1.0 / static_cast<double>(pairs);
  out.value = sum * inv;
  for (auto [i, j] : active) {
    out.grad[j] += inv;
    out.grad[i] -= inv;
  }
  return out;
}

LossValue total_loss(std::span<const double> pred, std::span<const double> target, const LossConfig& cfg) {
  cfg.validate();
  auto out = plcc_loss(pred, target);
  if (cfg.alpha == 0.0) return out;
  const auto rank = rank_loss(pred, target, cfg);
  out.value += cfg.alpha * rank.value;
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += cfg.alpha * rank.grad[i];
  return out;
}

}  // namespace ieqa::training
