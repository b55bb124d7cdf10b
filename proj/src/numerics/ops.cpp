#include "transicd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "transicd/error.hpp"
#include "transicd/kernels.hpp"

namespace transicd::numerics {
namespace {

using Storage = std::shared_ptr<const std::vector<double>>;

Tensor record_op(Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
                 BackwardFn backward) {
  Tape* tape = common_tape(std::span<const Tensor>(inputs.begin(), inputs.size()));
  if (!tape) return Tensor(std::move(shape), std::move(value));
  return tape->record(std::move(shape), std::move(value), inputs, std::move(backward));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw Error(ErrorKind::rank, std::string(op) + ": expected a matrix, got " +
                                     shape_string(t.shape()));
}

std::vector<double> transposed(const double* src, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

enum class Broadcast { same, row };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  const bool row_vector =
      (b.rank() == 1 || (b.rank() == 2 && b.dim(0) == 1)) && a.rank() >= 1 && b.size() == a.cols();
  if (row_vector) return Broadcast::row;
  throw Error(ErrorKind::dimension, std::string(op) + ": incompatible shapes " +
                                        shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

// Sum of the rows of g [rows x cols] into out [cols], rows in order.
void accumulate_rows(std::span<const double> g, std::size_t rows, std::size_t cols,
                     std::span<double> out) {
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < rows; ++r) k.accumulate(g.data() + r * cols, out.data(), cols);
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D dfdx_from_y_and_x) {
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  auto y = std::make_shared<std::vector<double>>(out);
  Storage xs = x.storage();
  return record_op(x.shape(), std::move(out), {x},
                   [y, xs, dfdx_from_y_and_x](std::span<const double> g, const GradSlots& grads) {
                     auto gx = grads[0];
                     for (std::size_t i = 0; i < g.size(); ++i)
                       gx[i] += g[i] * dfdx_from_y_and_x((*y)[i], (*xs)[i]);
                   });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw Error(ErrorKind::dimension, "matmul: shapes " + shape_string(a.shape()) + " and " +
                                          shape_string(b.shape()) + " are not compatible");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  std::vector<double> out(m * p, 0.0);
  kernels::active().gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, p);
  Storage as = a.storage(), bs = b.storage();
  return record_op({m, p}, std::move(out), {a, b},
                   [as, bs, m, k, p](std::span<const double> g, const GradSlots& grads) {
                     const auto& kt = kernels::active();
                     if (grads.wants(0)) {
                       const auto bt = transposed(bs->data(), k, p);
                       kt.gemm_acc(g.data(), bt.data(), grads[0].data(), m, p, k);
                     }
                     if (grads.wants(1)) {
                       const auto at = transposed(as->data(), m, k);
                       kt.gemm_acc(at.data(), g.data(), grads[1].data(), k, m, p);
                     }
                   });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  return record_op({n, m}, transposed(a.data().data(), m, n), {a},
                   [m, n](std::span<const double> g, const GradSlots& grads) {
                     auto ga = grads[0];
                     for (std::size_t r = 0; r < n; ++r)
                       for (std::size_t c = 0; c < m; ++c) ga[c * n + r] += g[r * m + c];
                   });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a, b, "add");
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.size());
  const auto& kt = kernels::active();
  if (kind == Broadcast::same) {
    kt.add(a.data().data(), b.data().data(), out.data(), out.size());
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      kt.add(a.data().data() + r * cols, b.data().data(), out.data() + r * cols, cols);
  }
  return record_op(a.shape(), std::move(out), {a, b},
                   [kind, rows, cols](std::span<const double> g, const GradSlots& grads) {
                     const auto& k = kernels::active();
                     if (grads.wants(0)) k.accumulate(g.data(), grads[0].data(), g.size());
                     if (grads.wants(1)) {
                       if (kind == Broadcast::same)
                         k.accumulate(g.data(), grads[1].data(), g.size());
                       else
                         accumulate_rows(g, rows, cols, grads[1]);
                     }
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a, b, "sub");
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.size());
  const auto& kt = kernels::active();
  if (kind == Broadcast::same) {
    kt.sub(a.data().data(), b.data().data(), out.data(), out.size());
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      kt.sub(a.data().data() + r * cols, b.data().data(), out.data() + r * cols, cols);
  }
  return record_op(a.shape(), std::move(out), {a, b},
                   [kind, rows, cols](std::span<const double> g, const GradSlots& grads) {
                     const auto& k = kernels::active();
                     if (grads.wants(0)) k.accumulate(g.data(), grads[0].data(), g.size());
                     if (grads.wants(1)) {
                       std::vector<double> neg(g.size());
                       k.scale(g.data(), -1.0, neg.data(), g.size());
                       if (kind == Broadcast::same)
                         k.accumulate(neg.data(), grads[1].data(), neg.size());
                       else
                         accumulate_rows(neg, rows, cols, grads[1]);
                     }
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a, b, "mul");
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.size());
  const auto& kt = kernels::active();
  if (kind == Broadcast::same) {
    kt.mul(a.data().data(), b.data().data(), out.data(), out.size());
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      kt.mul(a.data().data() + r * cols, b.data().data(), out.data() + r * cols, cols);
  }
  Storage as = a.storage(), bs = b.storage();
  return record_op(a.shape(), std::move(out), {a, b},
                   [kind, rows, cols, as, bs](std::span<const double> g, const GradSlots& grads) {
                     const auto& k = kernels::active();
                     if (kind == Broadcast::same) {
                       if (grads.wants(0)) k.mul_acc(g.data(), bs->data(), grads[0].data(), g.size());
                       if (grads.wants(1)) k.mul_acc(g.data(), as->data(), grads[1].data(), g.size());
                       return;
                     }
                     for (std::size_t r = 0; r < rows; ++r) {
                       const double* gr = g.data() + r * cols;
                       if (grads.wants(0))
                         k.mul_acc(gr, bs->data(), grads[0].data() + r * cols, cols);
                       if (grads.wants(1))
                         k.mul_acc(gr, as->data() + r * cols, grads[1].data(), cols);
                     }
                   });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  kernels::active().scale(a.data().data(), factor, out.data(), out.size());
  return record_op(a.shape(), std::move(out), {a},
                   [factor](std::span<const double> g, const GradSlots& grads) {
                     kernels::active().axpy(factor, g.data(), grads[0].data(), g.size());
                   });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](double y, double) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double y, double) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double, double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x) { return softmax(x, Mask{}); }

Tensor softmax(const Tensor& x, const Mask& valid) {
  if (x.rank() == 0) throw Error(ErrorKind::rank, "softmax: needs at least one axis");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (!valid.empty() && valid.size() != cols)
    throw Error(ErrorKind::dimension, "softmax: mask of length " + std::to_string(valid.size()) +
                                          " for rows of length " + std::to_string(cols));
  if (!valid.empty() && std::none_of(valid.begin(), valid.end(), [](auto v) { return v != 0; }))
    throw Error(ErrorKind::degenerate_mask, "softmax: every position is masked");
  const auto in = x.data();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data() + r * cols;
    double* yr = out.data() + r * cols;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c)
      if (valid.empty() || valid[c]) peak = std::max(peak, xr[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!valid.empty() && !valid[c]) continue;
      yr[c] = std::exp(xr[c] - peak);
      total += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] = yr[c] / total;
  }
  auto y = std::make_shared<std::vector<double>>(out);
  return record_op(x.shape(), std::move(out), {x},
                   [y, rows, cols](std::span<const double> g, const GradSlots& grads) {
                     auto gx = grads[0];
                     for (std::size_t r = 0; r < rows; ++r) {
                       const double* yr = y->data() + r * cols;
                       const double* gr = g.data() + r * cols;
                       double dot = 0.0;
                       for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
                       for (std::size_t c = 0; c < cols; ++c)
                         gx[r * cols + c] += yr[c] * (gr[c] - dot);
                     }
                   });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.rank() == 0) throw Error(ErrorKind::rank, "layer_norm: needs at least one axis");
  const std::size_t rows = x.rows(), d = x.cols();
  if (d < 2) throw Error(ErrorKind::dimension, "layer_norm: feature width must be at least 2");
  if (gain.size() != d || bias.size() != d)
    throw Error(ErrorKind::dimension, "layer_norm: gain " + shape_string(gain.shape()) +
                                          " / bias " + shape_string(bias.shape()) +
                                          " do not match width " + std::to_string(d));
  const auto in = x.data();
  const auto gn = gain.data();
  const auto bs = bias.data();
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += xr[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    (*rstd)[r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (xr[c] - mu) * inv;
      (*xhat)[r * d + c] = h;
      out[r * d + c] = h * gn[c] + bs[c];
    }
  }
  Storage gs = gain.storage();
  return record_op(
      x.shape(), std::move(out), {x, gain, bias},
      [xhat, rstd, gs, rows, d](std::span<const double> g, const GradSlots& grads) {
        const double dd = static_cast<double>(d);
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * d;
          const double* hr = xhat->data() + r * d;
          if (grads.wants(0)) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              dxhat[c] = gr[c] * (*gs)[c];
              sum_dh += dxhat[c];
              sum_dh_h += dxhat[c] * hr[c];
            }
            const double factor = (*rstd)[r] / dd;
            for (std::size_t c = 0; c < d; ++c)
              grads[0][r * d + c] += factor * (dd * dxhat[c] - sum_dh - hr[c] * sum_dh_h);
          }
          if (grads.wants(1))
            for (std::size_t c = 0; c < d; ++c) grads[1][c] += gr[c] * hr[c];
          if (grads.wants(2))
            for (std::size_t c = 0; c < d; ++c) grads[2][c] += gr[c];
        }
      });
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0))
    throw Error(ErrorKind::validation, "dropout: probability must lie in [0, 1)");
  if (p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  for (double& m : *mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  std::vector<double> out(x.size());
  kernels::active().mul(x.data().data(), mask->data(), out.data(), out.size());
  return record_op(x.shape(), std::move(out), {x},
                   [mask](std::span<const double> g, const GradSlots& grads) {
                     kernels::active().mul_acc(g.data(), mask->data(), grads[0].data(), g.size());
                   });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank2(table, "gather_rows");
  if (ids.empty()) throw Error(ErrorKind::dimension, "gather_rows: empty id list");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  const auto src = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab)
      throw Error(ErrorKind::index, "gather_rows: id " + std::to_string(ids[i]) +
                                        " outside table of " + std::to_string(vocab) + " rows");
    std::copy_n(src.data() + ids[i] * d, d, out.data() + i * d);
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(ids.begin(), ids.end());
  return record_op({ids.size(), d}, std::move(out), {table},
                   [idx, d](std::span<const double> g, const GradSlots& grads) {
                     const auto& k = kernels::active();
                     for (std::size_t i = 0; i < idx->size(); ++i)
                       k.accumulate(g.data() + i * d, grads[0].data() + (*idx)[i] * d, d);
                   });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads, const Mask& valid) {
  require_rank2(q, "multi_head_attention");
  if (k.shape() != q.shape() || v.shape() != q.shape())
    throw Error(ErrorKind::dimension, "multi_head_attention: q " + shape_string(q.shape()) +
                                          ", k " + shape_string(k.shape()) + ", v " +
                                          shape_string(v.shape()) + " must match");
  const std::size_t n = q.dim(0), d = q.dim(1);
  if (heads == 0 || d % heads != 0)
    throw Error(ErrorKind::config, "multi_head_attention: width " + std::to_string(d) +
                                       " not divisible by " + std::to_string(heads) + " heads");
  if (!valid.empty() && valid.size() != n)
    throw Error(ErrorKind::dimension, "multi_head_attention: mask length mismatch");
  if (!valid.empty() && std::none_of(valid.begin(), valid.end(), [](auto m) { return m != 0; }))
    throw Error(ErrorKind::degenerate_mask, "multi_head_attention: every key is masked");

  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto& kt = kernels::active();

  // Per-head column slices, contiguous.
  auto slice = [&](const Tensor& t, std::size_t h) {
    std::vector<double> out(n * dh);
    const auto src = t.data();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(src.data() + i * d + h * dh, dh, out.data() + i * dh);
    return out;
  };

  auto probs = std::make_shared<std::vector<std::vector<double>>>(heads);
  std::vector<double> out(n * d, 0.0);
  std::vector<double> head_out(n * dh);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto qh = slice(q, h), kh = slice(k, h), vh = slice(v, h);
    const auto kht = transposed(kh.data(), n, dh);
    std::vector<double> scores(n * n, 0.0);
    kt.gemm_acc(qh.data(), kht.data(), scores.data(), n, dh, n);
    kt.scale(scores.data(), inv_sqrt, scores.data(), scores.size());
    auto& p = (*probs)[h];
    p.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* sr = scores.data() + i * n;
      double* pr = p.data() + i * n;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j)
        if (valid.empty() || valid[j]) peak = std::max(peak, sr[j]);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!valid.empty() && !valid[j]) continue;
        pr[j] = std::exp(sr[j] - peak);
        total += pr[j];
      }
      for (std::size_t j = 0; j < n; ++j) pr[j] = pr[j] / total;
    }
    std::fill(head_out.begin(), head_out.end(), 0.0);
    kt.gemm_acc(p.data(), vh.data(), head_out.data(), n, n, dh);
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(head_out.data() + i * dh, dh, out.data() + i * d + h * dh);
  }

  Storage qs = q.storage(), ks = k.storage(), vs = v.storage();
  return record_op(
      {n, d}, std::move(out), {q, k, v},
      [qs, ks, vs, probs, n, d, dh, heads, inv_sqrt](std::span<const double> g,
                                                    const GradSlots& grads) {
        const auto& kt = kernels::active();
        auto slice = [&](const double* src, std::size_t h) {
          std::vector<double> out(n * dh);
          for (std::size_t i = 0; i < n; ++i)
            std::copy_n(src + i * d + h * dh, dh, out.data() + i * dh);
          return out;
        };
        auto scatter = [&](const std::vector<double>& part, std::span<double> dst, std::size_t h) {
          for (std::size_t i = 0; i < n; ++i)
            kt.accumulate(part.data() + i * dh, dst.data() + i * d + h * dh, dh);
        };
        for (std::size_t h = 0; h < heads; ++h) {
          const auto& p = (*probs)[h];
          const auto gh = slice(g.data(), h);
          const auto vh = slice(vs->data(), h);
          if (grads.wants(2)) {
            const auto pt = transposed(p.data(), n, n);
            std::vector<double> dv(n * dh, 0.0);
            kt.gemm_acc(pt.data(), gh.data(), dv.data(), n, n, dh);
            scatter(dv, grads[2], h);
          }
          if (!grads.wants(0) && !grads.wants(1)) continue;
          const auto vht = transposed(vh.data(), n, dh);
          std::vector<double> dp(n * n, 0.0);
          kt.gemm_acc(gh.data(), vht.data(), dp.data(), n, dh, n);
          std::vector<double> ds(n * n);
          for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += p[i * n + j] * dp[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
              ds[i * n + j] = p[i * n + j] * (dp[i * n + j] - dot) * inv_sqrt;
          }
          if (grads.wants(0)) {
            const auto kh = slice(ks->data(), h);
            std::vector<double> dq(n * dh, 0.0);
            kt.gemm_acc(ds.data(), kh.data(), dq.data(), n, n, dh);
            scatter(dq, grads[0], h);
          }
          if (grads.wants(1)) {
            const auto qh = slice(qs->data(), h);
            const auto dst = transposed(ds.data(), n, n);
            std::vector<double> dk(n * dh, 0.0);
            kt.gemm_acc(dst.data(), qh.data(), dk.data(), n, n, dh);
            scatter(dk, grads[1], h);
          }
        }
      });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.rank() != 2)
    throw Error(ErrorKind::dimension, "row_dot: shapes " + shape_string(a.shape()) + " and " +
                                          shape_string(b.shape()) + " must be equal matrices");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(rows, 0.0);
  const auto ad = a.data(), bd = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += ad[r * cols + c] * bd[r * cols + c];
    out[r] = acc;
  }
  Storage as = a.storage(), bs = b.storage();
  return record_op({rows}, std::move(out), {a, b},
                   [as, bs, rows, cols](std::span<const double> g, const GradSlots& grads) {
                     const auto& k = kernels::active();
                     for (std::size_t r = 0; r < rows; ++r) {
                       if (grads.wants(0))
                         k.axpy(g[r], bs->data() + r * cols, grads[0].data() + r * cols, cols);
                       if (grads.wants(1))
                         k.axpy(g[r], as->data() + r * cols, grads[1].data() + r * cols, cols);
                     }
                   });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return record_op({}, {acc}, {x}, [](std::span<const double> g, const GradSlots& grads) {
    for (double& v : grads[0]) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return record_op({}, {acc / n}, {x}, [n](std::span<const double> g, const GradSlots& grads) {
    const double share = g[0] / n;
    for (double& v : grads[0]) v += share;
  });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorKind::dimension, "stack: no inputs");
  const Shape& inner = parts.front().shape();
  for (const Tensor& t : parts)
    if (t.shape() != inner)
      throw Error(ErrorKind::dimension, "stack: shape " + shape_string(t.shape()) +
                                            " differs from " + shape_string(inner));
  const std::size_t each = parts.front().size();
  std::vector<double> out;
  out.reserve(each * parts.size());
  for (const Tensor& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());

  Tape* tape = common_tape(parts);
  if (!tape) return Tensor(std::move(shape), std::move(out));
  return tape->record(std::move(shape), std::move(out), parts,
                      [each](std::span<const double> g, const GradSlots& grads) {
                        const auto& k = kernels::active();
                        for (std::size_t i = 0;; ++i) {
                          if (i * each >= g.size()) break;
                          if (grads.wants(i))
                            k.accumulate(g.data() + i * each, grads[i].data(), each);
                        }
                      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size())
    throw Error(ErrorKind::dimension, "reshape: " + shape_string(x.shape()) + " to " +
                                          shape_string(shape) + " changes the element count");
  return record_op(std::move(shape), x.to_vector(), {x},
                   [](std::span<const double> g, const GradSlots& grads) {
                     kernels::active().accumulate(g.data(), grads[0].data(), g.size());
                   });
}

}  // namespace transicd::numerics
