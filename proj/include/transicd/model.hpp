#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transicd/embeddings.hpp"
#include "transicd/ops.hpp"
#include "transicd/rng.hpp"
#include "transicd/tensor.hpp"

namespace transicd::model {

using numerics::Mask;
using numerics::Tensor;

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 8;
  std::size_t d_model = 128;
  std::size_t d_ff = 0;  // 0 -> 4 * d_model
  double dropout = 0.1;
  std::size_t max_len = 2500;
  bool positional = true;
  // Ablation only: when false PAD positions take part in attention.
  bool mask_pad = true;

  std::size_t ff_width() const noexcept { return d_ff ? d_ff : 4 * d_model; }
};

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t num_labels = 0;
  std::size_t d_attn = 0;  // 0 -> 2 * d_model
  bool shared_head = false;

  std::size_t attn_width() const noexcept { return d_attn ? d_attn : 2 * encoder.d_model; }
  // Throws ErrorKind::config.
  void validate() const;
};

struct LayerParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor w1, b1, w2, b2;
  Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct ModelParams {
  Tensor embeddings;           // [V x d]
  std::vector<LayerParams> layers;
  Tensor attn_u;               // [d x d_a]
  Tensor attn_v;               // [L x d_a], row l is v_l
  Tensor heads_z;              // [L x d] (or [1 x d] when shared)
  Tensor heads_b;              // [L] (or [1] when shared)

  // Stable, unique names in a fixed order; used by the optimizer and checkpoints.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  // Copy whose tensors are trainable leaves on `tape`.
  ModelParams bind(numerics::Tape& tape) const;
};

// Xavier-uniform matrices, zero biases, unit layer-norm gains. Embeddings are
// copied from `pretrained` when given (PAD row forced to zero).
ModelParams init_params(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed,
                        const embeddings::EmbeddingMatrix* pretrained = nullptr);

// Sinusoidal position table [n x d].
Tensor positional_encoding(std::size_t n, std::size_t d);

// Documents padded to the longest one with PAD (id 0).
struct Batch {
  std::vector<std::vector<std::size_t>> ids;  // each row has length n
  std::vector<Mask> valid;                    // 1 = real token
  std::size_t length = 0;

  static Batch pad(std::span<const std::vector<std::size_t>> docs);
  std::size_t size() const noexcept { return ids.size(); }
};

// Dropout runs only when `rng` is given (training mode).
Tensor encode_document(std::span<const std::size_t> ids, const Mask& valid, const ModelParams& params,
                       const ModelConfig& config, Rng* rng);
// [batch x n x d]
Tensor encode(const Batch& batch, const ModelParams& params, const ModelConfig& config, Rng* rng);

struct LabelAttention {
  Tensor attention;  // [L x n]
  Tensor doc_reps;   // [L x d]
};
// A = softmax_valid(V tanh(H U)^T), C = A H. An empty mask attends everywhere.
LabelAttention label_attention(const Tensor& h, const Mask& valid, const Tensor& attn_u, const Tensor& attn_v);

// logit_l = Z_l . c_l + b_l -> [L]
Tensor classify(const Tensor& doc_reps, const Tensor& heads_z, const Tensor& heads_b);

inline bool predict_positive(double probability) { return probability >= 0.5; }

struct ForwardOutput {
  Tensor logits;     // [batch x L]
  Tensor attention;  // [batch x L x n]
  Tensor doc_reps;   // [batch x L x d]
};
ForwardOutput forward(const Batch& batch, const ModelParams& params, const ModelConfig& config, Rng* rng);

// Flat `key = value` text of the architecture, stored in checkpoints.
std::string config_to_text(const ModelConfig& config);
ModelConfig config_from_text(const std::string& text);

struct Checkpoint {
  ModelConfig config;
  std::string vocab_checksum;
  ModelParams params;
  std::vector<std::string> label_names;
};

// Binary layout (little-endian):
//   8   magic "TICDCKPT"
//   u32 format version (1)
//   str config text        (str = u32 byte length + bytes)
//   str vocabulary checksum
//   u32 label count, then one str per label name
//   u32 block count, then per block:
//       str name, u32 rank, u64 extent * rank, f64 value * product(extents)
//   u64 FNV-1a of every preceding byte
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace transicd::model
