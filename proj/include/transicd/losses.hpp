#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "transicd/tensor.hpp"

namespace transicd::losses {

using numerics::Tensor;

inline constexpr double kProbEps = 1e-12;

// -sum_l [y log p + (1-y) log(1-p)], p clamped to [eps, 1-eps].
double bce(std::span<const double> y, std::span<const double> probs);

// Batched forms over [batch x L] targets: per-document label sums, averaged
// over documents. Differentiable wrt probs / logits.
Tensor bce_loss(const Tensor& targets, const Tensor& probs);

// delta_l = C / max(n_l, 1)^(1/4).
std::vector<double> ldam_margins(std::span<const double> counts, double C);

// bce(y, sigmoid(scale * (logits - margins * y))). scale == 1 leaves the
// logits untouched, so margins of zero reproduce bce(y, sigmoid(logits)).
Tensor ldam_loss(const Tensor& targets, const Tensor& logits, std::span<const double> margins, double scale = 1.0);

struct LabelStats {
  std::vector<double> counts;
  double C = 0.0;
  std::vector<double> margins;

  // Counts positive documents per label; label_sets hold indices < num_labels.
  static LabelStats from_label_sets(std::span<const std::vector<std::size_t>> label_sets, std::size_t num_labels,
                                    double C);

  // `label_index TAB count TAB margin` per line.
  void save(const std::string& path) const;
  static LabelStats load(const std::string& path, double C);
};

}  // namespace transicd::losses
