#pragma once

#include <vector>

#include "transicd/rng.hpp"
#include "transicd/tensor.hpp"

namespace transicd::testing {

inline numerics::Tensor random_tensor(Rng& rng, numerics::Shape shape, double lo = -1.0,
                                      double hi = 1.0) {
  std::vector<double> values(numerics::shape_size(shape));
  for (double& v : values) v = rng.uniform(lo, hi);
  return numerics::Tensor(std::move(shape), std::move(values));
}

inline std::size_t random_extent(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

}  // namespace transicd::testing
