#include "transicd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "transicd/error.hpp"

namespace transicd {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::range, "Rng::below called with n = 0");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

DiscreteSampler::DiscreteSampler(std::span<const double> weights) {
  cumulative_.reserve(weights.size());
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw Error(ErrorKind::validation, "sampler weights must be finite and non-negative");
    total += w;
    cumulative_.push_back(total);
  }
  if (total <= 0.0) throw Error(ErrorKind::validation, "sampler weights sum to zero");
}

std::size_t DiscreteSampler::sample(Rng& rng) const {
  const double target = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) --it;
  // Skip zero-weight entries sharing the same cumulative value.
  return static_cast<std::size_t>(it - cumulative_.begin());
}

}  // namespace transicd
