#include "transicd/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "transicd/error.hpp"
#include "transicd/io.hpp"
#include "transicd/ops.hpp"
#include "transicd/rng.hpp"

namespace transicd::embeddings {

namespace {

constexpr std::size_t kPad = 0;
constexpr std::size_t kUnk = 1;
constexpr std::size_t kReserved = 2;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log s(x) without overflow.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Shared by training and the checked gradient: computes h, the loss and the
// gradient wrt h (into neu1e) and wrt each target row (via callback).
template <typename OnTarget>
double cbow_core(const double* in, const double* out, std::size_t dim, std::span<const std::size_t> context,
                 std::size_t center, std::span<const std::size_t> negatives, double* h, double* neu1e,
                 OnTarget&& on_target) {
  std::fill(h, h + dim, 0.0);
  for (auto c : context) {
    const double* r = in + c * dim;
    for (std::size_t i = 0; i < dim; ++i) h[i] += r[i];
  }
  const double inv = 1.0 / static_cast<double>(context.size());
  for (std::size_t i = 0; i < dim; ++i) h[i] *= inv;
  std::fill(neu1e, neu1e + dim, 0.0);

  double loss = 0.0;
  for (std::size_t k = 0; k <= negatives.size(); ++k) {
    const std::size_t target = k == 0 ? center : negatives[k - 1];
    const double label = k == 0 ? 1.0 : 0.0;
    const double* o = out + target * dim;
    const double f = dot(h, o, dim);
    loss -= k == 0 ? log_sigmoid(f) : log_sigmoid(-f);
    // d(loss)/d(f) = s(f) - label
    const double g = sigmoid(f) - label;
    for (std::size_t i = 0; i < dim; ++i) neu1e[i] += g * o[i];
    on_target(target, g);
  }
  for (std::size_t i = 0; i < dim; ++i) neu1e[i] *= inv;
  return loss;
}

void check_matrix(const EmbeddingMatrix& m, const char* what) {
  if (m.values.size() != m.vocab_size * m.dim) {
    throw Error(ErrorKind::dimension, std::string(what) + " holds " + std::to_string(m.values.size()) +
                                          " values, expected " + std::to_string(m.vocab_size) + "x" +
                                          std::to_string(m.dim));
  }
}

}  // namespace

numerics::Tensor EmbeddingMatrix::tensor() const { return numerics::Tensor({vocab_size, dim}, values); }

EmbeddingMatrix EmbeddingMatrix::from_tensor(const numerics::Tensor& t) {
  if (t.rank() != 2) throw Error(ErrorKind::rank, "embedding matrix must be rank 2, got " + numerics::shape_string(t.shape()));
  return EmbeddingMatrix{t.dim(0), t.dim(1), t.to_vector()};
}

double cbow_example(const EmbeddingMatrix& in, const EmbeddingMatrix& out, std::span<const std::size_t> context,
                    std::size_t center, std::span<const std::size_t> negatives, std::vector<double>* grad_in,
                    std::vector<double>* grad_out) {
  check_matrix(in, "input embeddings");
  check_matrix(out, "output embeddings");
  if (in.dim != out.dim || in.vocab_size != out.vocab_size) {
    throw Error(ErrorKind::dimension, "input and output embedding shapes differ");
  }
  if (context.empty()) throw Error(ErrorKind::validation, "CBOW example needs at least one context token");
  auto check_id = [&](std::size_t id) {
    if (id >= in.vocab_size) throw Error(ErrorKind::index, "token id " + std::to_string(id) + " out of range");
  };
  for (auto c : context) check_id(c);
  check_id(center);
  for (auto n : negatives) check_id(n);

  const std::size_t d = in.dim;
  std::vector<double> h(d), neu1e(d);
  const double loss = cbow_core(in.values.data(), out.values.data(), d, context, center, negatives, h.data(),
                                neu1e.data(), [&](std::size_t target, double g) {
                                  if (!grad_out) return;
                                  double* go = grad_out->data() + target * d;
                                  for (std::size_t i = 0; i < d; ++i) go[i] += g * h[i];
                                });
  if (grad_in) {
    for (auto c : context) {
      double* gi = grad_in->data() + c * d;
      for (std::size_t i = 0; i < d; ++i) gi[i] += neu1e[i];
    }
  }
  return loss;
}

EmbeddingMatrix train_cbow(std::span<const std::vector<std::size_t>> corpus, std::size_t vocab_size,
                           const CbowConfig& config) {
  if (corpus.empty()) throw Error(ErrorKind::empty_corpus, "CBOW training corpus has no documents");
  if (config.window < 1) throw Error(ErrorKind::config, "CBOW window must be at least 1");
  if (config.negatives < 1) throw Error(ErrorKind::config, "CBOW negatives must be at least 1");
  if (config.dim < 1) throw Error(ErrorKind::config, "embedding dimension must be at least 1");
  if (!(config.lr > 0)) throw Error(ErrorKind::config, "CBOW learning rate must be positive");
  if (vocab_size < kReserved || vocab_size - kReserved < config.negatives + 1) {
    throw Error(ErrorKind::insufficient_vocabulary,
                "vocabulary has " + std::to_string(vocab_size < kReserved ? 0 : vocab_size - kReserved) +
                    " corpus tokens; CBOW with " + std::to_string(config.negatives) + " negatives needs at least " +
                    std::to_string(config.negatives + 1));
  }

  std::vector<std::vector<std::size_t>> streams;
  streams.reserve(corpus.size());
  std::vector<double> counts(vocab_size, 0.0);
  std::size_t total = 0;
  for (const auto& doc : corpus) {
    std::vector<std::size_t> s;
    s.reserve(doc.size());
    for (auto id : doc) {
      if (id >= vocab_size) throw Error(ErrorKind::index, "token id " + std::to_string(id) + " out of range");
      if (id == kPad || id == kUnk) continue;
      s.push_back(id);
      counts[id] += 1.0;
    }
    total += s.size();
    streams.push_back(std::move(s));
  }
  if (total == 0) throw Error(ErrorKind::insufficient_vocabulary, "CBOW training corpus has no vocabulary tokens");
  std::vector<double> weights(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) weights[i] = std::pow(counts[i], 0.75);
  const DiscreteSampler sampler(weights);

  const std::size_t d = config.dim;
  Rng rng(config.seed);
  EmbeddingMatrix in{vocab_size, d, std::vector<double>(vocab_size * d, 0.0)};
  std::vector<double> out(vocab_size * d, 0.0);
  for (std::size_t r = 1; r < vocab_size; ++r) {
    for (std::size_t i = 0; i < d; ++i) in.values[r * d + i] = (rng.uniform() - 0.5) / static_cast<double>(d);
  }

  std::vector<double> h(d), neu1e(d);
  std::vector<std::size_t> context, negatives;
  const double planned = static_cast<double>(config.epochs) * static_cast<double>(total) + 1.0;
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& s : streams) {
      const std::size_t n = s.size();
      for (std::size_t pos = 0; pos < n; ++pos, ++processed) {
        const double alpha =
            config.lr * std::max(1.0 - static_cast<double>(processed) / planned, config.min_lr_fraction);
        // Reduced window b, as in word2vec.
        const std::size_t b = static_cast<std::size_t>(rng.below(config.window));
        const std::size_t reach = config.window - b;
        context.clear();
        const std::size_t lo = pos >= reach ? pos - reach : 0;
        const std::size_t hi = std::min(n - 1, pos + reach);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j != pos) context.push_back(s[j]);
        }
        const std::size_t center = s[pos];
        negatives.clear();
        for (std::size_t k = 0; k < config.negatives; ++k) {
          const std::size_t neg = sampler.sample(rng);
          if (neg != center) negatives.push_back(neg);
        }
        if (context.empty()) continue;
        cbow_core(in.values.data(), out.data(), d, context, center, negatives, h.data(), neu1e.data(),
                  [&](std::size_t target, double g) {
                    double* o = out.data() + target * d;
                    for (std::size_t i = 0; i < d; ++i) o[i] -= alpha * g * h[i];
                  });
        for (auto c : context) {
          double* r = in.values.data() + c * d;
          for (std::size_t i = 0; i < d; ++i) r[i] -= alpha * neu1e[i];
        }
      }
    }
  }
  for (double v : in.values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::divergence, "CBOW training produced a non-finite embedding");
  }
  return in;
}

numerics::Tensor lookup(std::span<const std::size_t> ids, const EmbeddingMatrix& emb) {
  check_matrix(emb, "embedding matrix");
  return numerics::gather_rows(emb.tensor(), ids);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::dimension, "cosine of vectors with different lengths");
  const double na = std::sqrt(dot(a.data(), a.data(), a.size()));
  const double nb = std::sqrt(dot(b.data(), b.data(), b.size()));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a.data(), b.data(), a.size()) / (na * nb);
}

void save(std::ostream& out, const EmbeddingMatrix& emb, const std::string& vocab_checksum) {
  check_matrix(emb, "embedding matrix");
  out << "EMB v1 " << emb.vocab_size << ' ' << emb.dim << ' ' << vocab_checksum << '\n';
  for (std::size_t r = 0; r < emb.vocab_size; ++r) {
    for (std::size_t i = 0; i < emb.dim; ++i) {
      if (i) out << ' ';
      out << io::format_double(emb.values[r * emb.dim + i]);
    }
    out << '\n';
  }
}

void save(const std::string& path, const EmbeddingMatrix& emb, const std::string& vocab_checksum) {
  auto out = io::open_out(path);
  save(out, emb, vocab_checksum);
  io::finish(out, path);
}

EmbeddingMatrix load(std::istream& in, const std::string& expected_checksum) {
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorKind::format, "embedding file is empty");
  std::istringstream hs(header);
  std::string magic, version, checksum;
  std::size_t v = 0, d = 0;
  if (!(hs >> magic >> version >> v >> d >> checksum) || magic != "EMB" || version != "v1" || v == 0 || d == 0) {
    throw Error(ErrorKind::format, "bad embedding header: " + header);
  }
  if (!expected_checksum.empty() && checksum != expected_checksum) {
    throw Error(ErrorKind::artifact_incompatible,
                "embedding file was built for vocabulary " + checksum + ", expected " + expected_checksum);
  }
  EmbeddingMatrix emb{v, d, std::vector<double>(v * d)};
  std::string line;
  for (std::size_t r = 0; r < v; ++r) {
    if (!std::getline(in, line)) throw Error(ErrorKind::format, "embedding file truncated at row " + std::to_string(r));
    const char* p = line.c_str();
    for (std::size_t i = 0; i < d; ++i) {
      char* end = nullptr;
      const double x = std::strtod(p, &end);
      if (end == p) throw Error(ErrorKind::format, "embedding row " + std::to_string(r) + " has fewer than " + std::to_string(d) + " values");
      if (!std::isfinite(x)) throw Error(ErrorKind::format, "non-finite value in embedding row " + std::to_string(r));
      emb.values[r * d + i] = x;
      p = end;
    }
    while (*p == ' ' || *p == '\r') ++p;
    if (*p != '\0') throw Error(ErrorKind::format, "embedding row " + std::to_string(r) + " has more than " + std::to_string(d) + " values");
  }
  if (std::getline(in, line) && !io::trim(line).empty()) {
    throw Error(ErrorKind::format, "embedding file has more than " + std::to_string(v) + " rows");
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (emb.values[i] != 0.0) throw Error(ErrorKind::format, "embedding row 0 (PAD) must be zero");
  }
  return emb;
}

EmbeddingMatrix load(const std::string& path, const std::string& expected_checksum) {
  auto in = io::open_in(path);
  return load(in, expected_checksum);
}

}  // namespace transicd::embeddings
