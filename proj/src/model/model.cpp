#include "transicd/model.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "transicd/error.hpp"
#include "transicd/io.hpp"

namespace transicd::model {

namespace ops = numerics;

void ModelConfig::validate() const {
  const auto& e = encoder;
  if (e.d_model == 0) throw Error(ErrorKind::config, "d_model must be positive");
  if (e.heads == 0 || e.d_model % e.heads != 0) {
    throw Error(ErrorKind::config, "d_model " + std::to_string(e.d_model) + " is not divisible by " +
                                       std::to_string(e.heads) + " heads");
  }
  if (!(e.dropout >= 0.0 && e.dropout < 1.0)) {
    throw Error(ErrorKind::config, "dropout must lie in [0, 1), got " + io::format_double(e.dropout));
  }
  if (e.max_len == 0) throw Error(ErrorKind::config, "max_len must be positive");
  if (num_labels == 0) throw Error(ErrorKind::config, "model needs at least one label");
}

namespace {

Tensor xavier(Rng& rng, std::size_t rows, std::size_t cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return Tensor({rows, cols}, std::move(v));
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) { return ops::add(ops::matmul(x, w), b); }

template <typename Params, typename T>
std::vector<std::pair<std::string, T*>> collect(Params& p) {
  std::vector<std::pair<std::string, T*>> out;
  out.emplace_back("embeddings", &p.embeddings);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "encoder." + std::to_string(i) + ".";
    out.emplace_back(pre + "wq", &l.wq);
    out.emplace_back(pre + "bq", &l.bq);
    out.emplace_back(pre + "wk", &l.wk);
    out.emplace_back(pre + "bk", &l.bk);
    out.emplace_back(pre + "wv", &l.wv);
    out.emplace_back(pre + "bv", &l.bv);
    out.emplace_back(pre + "wo", &l.wo);
    out.emplace_back(pre + "bo", &l.bo);
    out.emplace_back(pre + "w1", &l.w1);
    out.emplace_back(pre + "b1", &l.b1);
    out.emplace_back(pre + "w2", &l.w2);
    out.emplace_back(pre + "b2", &l.b2);
    out.emplace_back(pre + "ln1_gain", &l.ln1_gain);
    out.emplace_back(pre + "ln1_bias", &l.ln1_bias);
    out.emplace_back(pre + "ln2_gain", &l.ln2_gain);
    out.emplace_back(pre + "ln2_bias", &l.ln2_bias);
  }
  out.emplace_back("attn_u", &p.attn_u);
  out.emplace_back("attn_v", &p.attn_v);
  out.emplace_back("heads_z", &p.heads_z);
  out.emplace_back("heads_b", &p.heads_b);
  return out;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() { return collect<ModelParams, Tensor>(*this); }

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  return collect<const ModelParams, const Tensor>(*this);
}

ModelParams ModelParams::bind(numerics::Tape& tape) const {
  ModelParams out = *this;
  for (auto& [name, t] : out.named()) *t = tape.variable(*t);
  return out;
}

ModelParams init_params(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed,
                        const embeddings::EmbeddingMatrix* pretrained) {
  config.validate();
  const std::size_t d = config.encoder.d_model;
  const std::size_t ff = config.encoder.ff_width();
  const std::size_t da = config.attn_width();
  const std::size_t L = config.num_labels;
  if (vocab_size < 2) throw Error(ErrorKind::config, "vocabulary must hold at least PAD and UNK");
  Rng rng(seed);

  ModelParams p;
  if (pretrained) {
    if (pretrained->dim != d) {
      throw Error(ErrorKind::config, "embedding width " + std::to_string(pretrained->dim) + " does not match d_model " +
                                         std::to_string(d));
    }
    if (pretrained->vocab_size != vocab_size) {
      throw Error(ErrorKind::artifact_incompatible, "embedding rows " + std::to_string(pretrained->vocab_size) +
                                                        " do not match vocabulary size " + std::to_string(vocab_size));
    }
    auto values = pretrained->values;
    std::fill_n(values.begin(), d, 0.0);
    p.embeddings = Tensor({vocab_size, d}, std::move(values));
    rng.next();
  } else {
    auto e = xavier(rng, vocab_size, d).to_vector();
    std::fill_n(e.begin(), d, 0.0);
    p.embeddings = Tensor({vocab_size, d}, std::move(e));
  }
  for (std::size_t i = 0; i < config.encoder.layers; ++i) {
    LayerParams l;
    l.wq = xavier(rng, d, d);
    l.wk = xavier(rng, d, d);
    l.wv = xavier(rng, d, d);
    l.wo = xavier(rng, d, d);
    l.bq = l.bk = l.bv = l.bo = Tensor::zeros({d});
    l.w1 = xavier(rng, d, ff);
    l.b1 = Tensor::zeros({ff});
    l.w2 = xavier(rng, ff, d);
    l.b2 = Tensor::zeros({d});
    l.ln1_gain = l.ln2_gain = Tensor::full({d}, 1.0);
    l.ln1_bias = l.ln2_bias = Tensor::zeros({d});
    p.layers.push_back(std::move(l));
  }
  p.attn_u = xavier(rng, d, da);
  p.attn_v = xavier(rng, L, da);
  const std::size_t head_rows = config.shared_head ? 1 : L;
  p.heads_z = xavier(rng, head_rows, d);
  p.heads_b = Tensor::zeros({head_rows});
  return p;
}

Tensor positional_encoding(std::size_t n, std::size_t d) {
  std::vector<double> pe(n * d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      pe[pos * d + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor({n, d}, std::move(pe));
}

Batch Batch::pad(std::span<const std::vector<std::size_t>> docs) {
  if (docs.empty()) throw Error(ErrorKind::validation, "batch is empty");
  Batch b;
  for (const auto& d : docs) b.length = std::max(b.length, d.size());
  if (b.length == 0) throw Error(ErrorKind::degenerate_mask, "every document in the batch is empty");
  for (const auto& d : docs) {
    std::vector<std::size_t> ids(b.length, 0);
    Mask valid(b.length, 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      ids[i] = d[i];
      valid[i] = d[i] != 0;
    }
    b.ids.push_back(std::move(ids));
    b.valid.push_back(std::move(valid));
  }
  return b;
}

Tensor encode_document(std::span<const std::size_t> ids, const Mask& valid, const ModelParams& params,
                       const ModelConfig& config, Rng* rng) {
  const auto& enc = config.encoder;
  const std::size_t n = ids.size();
  if (n == 0) throw Error(ErrorKind::degenerate_mask, "document has no tokens");
  if (n > enc.max_len) {
    throw Error(ErrorKind::range, "sequence length " + std::to_string(n) + " exceeds max_len " +
                                      std::to_string(enc.max_len));
  }
  if (valid.size() != n) throw Error(ErrorKind::dimension, "mask length does not match sequence length");
  if (params.embeddings.rank() != 2 || params.embeddings.dim(1) != enc.d_model) {
    throw Error(ErrorKind::config, "embedding shape " + numerics::shape_string(params.embeddings.shape()) +
                                       " does not match d_model " + std::to_string(enc.d_model));
  }
  const Mask& attn_mask = enc.mask_pad ? valid : Mask{};
  const double p = rng ? enc.dropout : 0.0;
  auto drop = [&](const Tensor& x) { return p > 0.0 ? ops::dropout(x, p, *rng) : x; };

  Tensor x = ops::gather_rows(params.embeddings, ids);
  if (enc.positional) x = ops::add(x, positional_encoding(n, enc.d_model));
  x = drop(x);
  for (const auto& l : params.layers) {
    const Tensor att = ops::multi_head_attention(affine(x, l.wq, l.bq), affine(x, l.wk, l.bk),
                                                 affine(x, l.wv, l.bv), enc.heads, attn_mask);
    x = ops::layer_norm(ops::add(x, drop(affine(att, l.wo, l.bo))), l.ln1_gain, l.ln1_bias);
    const Tensor ff = affine(ops::relu(affine(x, l.w1, l.b1)), l.w2, l.b2);
    x = ops::layer_norm(ops::add(x, drop(ff)), l.ln2_gain, l.ln2_bias);
  }
  return x;
}

Tensor encode(const Batch& batch, const ModelParams& params, const ModelConfig& config, Rng* rng) {
  std::vector<Tensor> rows;
  rows.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    rows.push_back(encode_document(batch.ids[b], batch.valid[b], params, config, rng));
  }
  return ops::stack(rows);
}

LabelAttention label_attention(const Tensor& h, const Mask& valid, const Tensor& attn_u, const Tensor& attn_v) {
  if (h.rank() != 2 || attn_u.rank() != 2 || attn_v.rank() != 2) {
    throw Error(ErrorKind::rank, "label_attention expects rank-2 H, U and V");
  }
  if (attn_u.dim(0) != h.dim(1) || attn_v.dim(1) != attn_u.dim(1)) {
    throw Error(ErrorKind::dimension, "label_attention: H " + numerics::shape_string(h.shape()) + ", U " +
                                          numerics::shape_string(attn_u.shape()) + ", V " +
                                          numerics::shape_string(attn_v.shape()));
  }
  const Tensor keys = ops::tanh(ops::matmul(h, attn_u));               // [n x d_a]
  const Tensor scores = ops::matmul(attn_v, ops::transpose(keys));     // [L x n]
  LabelAttention out;
  out.attention = valid.empty() ? ops::softmax(scores) : ops::softmax(scores, valid);
  out.doc_reps = ops::matmul(out.attention, h);                         // [L x d]
  return out;
}

Tensor classify(const Tensor& doc_reps, const Tensor& heads_z, const Tensor& heads_b) {
  if (doc_reps.rank() != 2 || heads_z.rank() != 2 || heads_b.rank() != 1) {
    throw Error(ErrorKind::rank, "classify expects [L x d] reps, [L x d] or [1 x d] weights and [L] or [1] biases");
  }
  const std::size_t L = doc_reps.dim(0);
  if (heads_z.dim(1) != doc_reps.dim(1) || heads_b.dim(0) != heads_z.dim(0) ||
      (heads_z.dim(0) != L && heads_z.dim(0) != 1)) {
    throw Error(ErrorKind::dimension, "classify: reps " + numerics::shape_string(doc_reps.shape()) + ", Z " +
                                          numerics::shape_string(heads_z.shape()) + ", b " +
                                          numerics::shape_string(heads_b.shape()));
  }
  if (heads_z.dim(0) == L) return ops::add(ops::row_dot(doc_reps, heads_z), heads_b);
  // One head shared by every label.
  const Tensor col = ops::matmul(doc_reps, ops::transpose(heads_z));  // [L x 1]
  return ops::reshape(ops::add(col, heads_b), {L});
}

ForwardOutput forward(const Batch& batch, const ModelParams& params, const ModelConfig& config, Rng* rng) {
  if (batch.size() == 0) throw Error(ErrorKind::validation, "forward on an empty batch");
  if (params.attn_v.dim(0) != config.num_labels) {
    throw Error(ErrorKind::config, "parameters hold " + std::to_string(params.attn_v.dim(0)) + " labels, config " +
                                       std::to_string(config.num_labels));
  }
  std::vector<Tensor> logits, attention, reps;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Tensor h = encode_document(batch.ids[b], batch.valid[b], params, config, rng);
    const Mask& mask = config.encoder.mask_pad ? batch.valid[b] : Mask{};
    auto la = label_attention(h, mask, params.attn_u, params.attn_v);
    logits.push_back(classify(la.doc_reps, params.heads_z, params.heads_b));
    attention.push_back(std::move(la.attention));
    reps.push_back(std::move(la.doc_reps));
  }
  return {ops::stack(logits), ops::stack(attention), ops::stack(reps)};
}

std::string config_to_text(const ModelConfig& c) {
  std::ostringstream o;
  o << "layers = " << c.encoder.layers << '\n'
    << "heads = " << c.encoder.heads << '\n'
    << "d_model = " << c.encoder.d_model << '\n'
    << "d_ff = " << c.encoder.ff_width() << '\n'
    << "dropout = " << io::format_double(c.encoder.dropout) << '\n'
    << "max_len = " << c.encoder.max_len << '\n'
    << "positional = " << (c.encoder.positional ? "true" : "false") << '\n'
    << "mask_pad = " << (c.encoder.mask_pad ? "true" : "false") << '\n'
    << "num_labels = " << c.num_labels << '\n'
    << "d_attn = " << c.attn_width() << '\n'
    << "shared_head = " << (c.shared_head ? "true" : "false") << '\n';
  return o.str();
}

ModelConfig config_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  for (const auto& line : io::split(text, '\n')) {
    if (io::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::format, "bad model config line: " + line);
    kv[std::string(io::trim(std::string_view(line).substr(0, eq)))] =
        std::string(io::trim(std::string_view(line).substr(eq + 1)));
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorKind::format, "model config lacks '" + key + "'");
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto num = [&](const std::string& key) -> std::size_t {
    const auto v = take(key);
    try {
      std::size_t used = 0;
      const auto x = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return static_cast<std::size_t>(x);
    } catch (const std::exception&) {
      throw Error(ErrorKind::format, "model config '" + key + "' is not a count: " + v);
    }
  };
  auto flag = [&](const std::string& key) {
    const auto v = take(key);
    if (v != "true" && v != "false") throw Error(ErrorKind::format, "model config '" + key + "' is not a boolean");
    return v == "true";
  };
  ModelConfig c;
  c.encoder.layers = num("layers");
  c.encoder.heads = num("heads");
  c.encoder.d_model = num("d_model");
  c.encoder.d_ff = num("d_ff");
  c.encoder.dropout = std::strtod(take("dropout").c_str(), nullptr);
  c.encoder.max_len = num("max_len");
  c.encoder.positional = flag("positional");
  c.encoder.mask_pad = flag("mask_pad");
  c.num_labels = num("num_labels");
  c.d_attn = num("d_attn");
  c.shared_head = flag("shared_head");
  if (!kv.empty()) throw Error(ErrorKind::format, "unknown model config key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

namespace {

constexpr char kMagic[8] = {'T', 'I', 'C', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    u64(v);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<unsigned char>& data() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::string& data, std::string path) : data_(data), path_(std::move(path)) {}
  const unsigned char* take(std::size_t n) {
    if (n > data_.size() - pos_) fail("truncated");
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data()) + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string str() {
    const auto n = u32();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorKind::format, "checkpoint " + path_ + ": " + why);
  }

 private:
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.str(config_to_text(ckpt.config));
  w.str(ckpt.vocab_checksum);
  w.u32(static_cast<std::uint32_t>(ckpt.label_names.size()));
  for (const auto& n : ckpt.label_names) w.str(n);
  const auto blocks = ckpt.params.named();
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& [name, t] : blocks) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t->rank()));
    for (auto e : t->shape()) w.u64(e);
    for (double v : t->data()) w.f64(v);
  }
  w.u64(fnv1a(w.data().data(), w.data().size()));
  auto out = io::open_out(path, true);
  out.write(reinterpret_cast<const char*>(w.data().data()), static_cast<std::streamsize>(w.data().size()));
  io::finish(out, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string data = io::read_text(path);
  Reader r(data, path);
  if (data.size() < sizeof kMagic + 8 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) r.fail("bad magic");
  const auto stored = [&] {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[data.size() - 8 + i])) << (8 * i);
    return v;
  }();
  if (stored != fnv1a(reinterpret_cast<const unsigned char*>(data.data()), data.size() - 8)) r.fail("checksum mismatch");
  r.take(sizeof kMagic);
  if (const auto v = r.u32(); v != kVersion) r.fail("unsupported version " + std::to_string(v));
  Checkpoint ck;
  ck.config = config_from_text(r.str());
  ck.vocab_checksum = r.str();
  const auto labels = r.u32();
  for (std::uint32_t i = 0; i < labels; ++i) ck.label_names.push_back(r.str());

  std::map<std::string, Tensor> blocks;
  const auto count = r.u32();
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::string name = r.str();
    const auto rank = r.u32();
    if (rank == 0 || rank > 4) r.fail("block '" + name + "' has rank " + std::to_string(rank));
    numerics::Shape shape(rank);
    std::size_t size = 1;
    for (auto& e : shape) {
      e = r.u64();
      if (e == 0 || e > (r.remaining() / 8)) r.fail("block '" + name + "' has an invalid extent");
      size *= e;
    }
    if (size > r.remaining() / 8) r.fail("block '" + name + "' is truncated");
    std::vector<double> values(size);
    for (auto& v : values) v = r.f64();
    if (!blocks.emplace(name, Tensor(std::move(shape), std::move(values))).second) {
      r.fail("duplicate block '" + name + "'");
    }
  }
  if (r.remaining() != 8) r.fail("trailing bytes");

  ck.params.layers.resize(ck.config.encoder.layers);
  for (auto& [name, t] : ck.params.named()) {
    auto it = blocks.find(name);
    if (it == blocks.end()) r.fail("missing block '" + name + "'");
    *t = it->second;
    blocks.erase(it);
  }
  if (!blocks.empty()) r.fail("unexpected block '" + blocks.begin()->first + "'");

  // Shapes must agree with the stored architecture.
  const auto fresh = init_params(ck.config, ck.params.embeddings.dim(0), 0);
  const auto expect = fresh.named();
  const auto got = ck.params.named();
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].second->shape() != expect[i].second->shape()) {
      r.fail("block '" + got[i].first + "' has shape " + numerics::shape_string(got[i].second->shape()) +
             ", expected " + numerics::shape_string(expect[i].second->shape()));
    }
  }
  if (ck.label_names.size() != ck.config.num_labels) r.fail("label list does not match num_labels");
  return ck;
}

}  // namespace transicd::model
