#pragma once

#include <span>
#include <vector>

namespace ieqa::training {

struct LossConfig {
  double alpha = 0.3;        // weight of the rank term
  double rank_margin = 0.0;
  double tie_epsilon = 1e-8; // targets closer than this count as tied

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

/// Loss value and its gradient with respect to each prediction.
struct LossValue {
  double value = 0.0;
  std::vector<double> grad;
};

/// (1 - PLCC(pred, target)) / 2. A constant prediction (or target) has no
/// defined correlation; the loss is then 1 with zero gradient.
LossValue plcc_loss(std::span<const double> pred, std::span<const double> target);

/// Mean over ordered pairs with target_i > target_j + tie_epsilon of
/// max(0, margin + pred_j - pred_i). No valid pairs gives 0.
LossValue rank_loss(std::span<const double> pred, std::span<const double> target, const LossConfig& cfg);

/// plcc_loss + alpha * rank_loss.
LossValue total_loss(std::span<const double> pred, std::span<const double> target, const LossConfig& cfg);

}  // namespace ieqa::training
