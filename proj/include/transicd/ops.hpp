#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "transicd/rng.hpp"
#include "transicd/tensor.hpp"

// Differentiable tensor operations. Each op records itself on the tape of its
// taped inputs (if any) and otherwise returns a plain constant.

namespace transicd::numerics {

// 1 = position participates, 0 = masked out.
using Mask = std::vector<std::uint8_t>;

// [m x k] * [k x p] -> [m x p]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m x n] -> [n x m]
Tensor transpose(const Tensor& a);

// Same shape, or b a row vector ([d] or [1 x d]) broadcast over the rows of a.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

// Row-wise softmax over the last axis. With a mask of length cols(), masked
// positions are exactly 0 and every row needs at least one unmasked entry.
Tensor softmax(const Tensor& x);
Tensor softmax(const Tensor& x, const Mask& valid);

inline constexpr double kLayerNormEps = 1e-5;
// Per-row normalisation of [n x d] followed by gain * x + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng);

// Rows of `table` [V x d] picked by ids -> [n x d]. Gradient scatters back.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);

// Multi-head scaled dot-product self-attention core on projected inputs.
// q, k, v: [n x d]; heads divides d. Keys with valid[j] == 0 are ignored.
// An empty mask means every key participates.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads, const Mask& valid);

// Dot product of matching rows: [r x d], [r x d] -> [r]
Tensor row_dot(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Concatenates equally-shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);
Tensor reshape(const Tensor& x, Shape shape);

}  // namespace transicd::numerics
