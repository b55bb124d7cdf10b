#pragma once

#include <vector>

#include "transicd/model.hpp"

namespace transicd::testing {

// n=12 tokens, d_e=8, 2 heads, 1 layer, 4 labels.
inline model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.encoder.layers = 1;
  c.encoder.heads = 2;
  c.encoder.d_model = 8;
  c.encoder.dropout = 0.0;
  c.encoder.max_len = 12;
  c.num_labels = 4;
  return c;
}

inline std::vector<numerics::Tensor> flatten(const model::ModelParams& p) {
  std::vector<numerics::Tensor> out;
  for (const auto& [name, t] : p.named()) out.push_back(*t);
  return out;
}

inline model::ModelParams unflatten(model::ModelParams shape_like, std::span<const numerics::Tensor> values) {
  auto named = shape_like.named();
  for (std::size_t i = 0; i < named.size(); ++i) *named[i].second = values[i];
  return shape_like;
}

}  // namespace transicd::testing
