#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "transicd/tensor.hpp"

namespace transicd::embeddings {

// vocab_size x dim, row-major. Row 0 (PAD) is zero.
struct EmbeddingMatrix {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }
  numerics::Tensor tensor() const;

  static EmbeddingMatrix from_tensor(const numerics::Tensor& t);

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) = default;
};

struct CbowConfig {
  std::size_t dim = 128;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;
  // Learning rate decays linearly to lr * min_lr_fraction.
  double min_lr_fraction = 1e-4;
  std::uint64_t seed = 1;
};

// Token ids in [0, vocab_size). PAD and UNK positions are skipped; they are
// neither centers, contexts nor negatives.
EmbeddingMatrix train_cbow(std::span<const std::vector<std::size_t>> corpus, std::size_t vocab_size,
                           const CbowConfig& config);

// Negative-sampling CBOW objective for one example:
//   h = mean(in[context]),
//   loss = -log s(h.out[center]) - sum_k log s(-h.out[neg_k]).
// Gradients are accumulated (+=) into grad_in / grad_out (same layout as in/out).
double cbow_example(const EmbeddingMatrix& in, const EmbeddingMatrix& out, std::span<const std::size_t> context,
                    std::size_t center, std::span<const std::size_t> negatives, std::vector<double>* grad_in,
                    std::vector<double>* grad_out);

// Row gather; out-of-range id raises an index error.
numerics::Tensor lookup(std::span<const std::size_t> ids, const EmbeddingMatrix& emb);

double cosine(std::span<const double> a, std::span<const double> b);

// Text format: `EMB v1 <vocab_size> <dim> <vocab_checksum_hex>` then one row
// per line of space-separated decimals that round-trip exactly.
void save(std::ostream& out, const EmbeddingMatrix& emb, const std::string& vocab_checksum);
void save(const std::string& path, const EmbeddingMatrix& emb, const std::string& vocab_checksum);
// An empty expected checksum skips the vocabulary check.
EmbeddingMatrix load(std::istream& in, const std::string& expected_checksum);
EmbeddingMatrix load(const std::string& path, const std::string& expected_checksum);

}  // namespace transicd::embeddings
