#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "transicd/error.hpp"
#include "transicd/harness.hpp"
#include "transicd/io.hpp"
#include "transicd/kernels.hpp"

namespace transicd::harness {

namespace fs = std::filesystem;
using numerics::Tensor;

bool is_tokenized_path(const std::string& path) {
  constexpr std::string_view suffix = ".tok.tsv";
  return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<Document> load_split(const std::string& path, const preprocess::Vocabulary& vocab,
                                 const preprocess::LabelSet& labels, const preprocess::PrepConfig& prep) {
  const auto records = preprocess::read_corpus(path);
  return preprocess::make_documents(records, vocab, labels, prep, is_tokenized_path(path));
}

void optimizer_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
                    const std::vector<bool>& frozen, const std::vector<bool>& pad_rows) {
  if (grads.size() != params.size()) {
    throw Error(ErrorKind::dimension, "optimizer: " + std::to_string(grads.size()) + " gradients for " +
                                          std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape()) {
      throw Error(ErrorKind::dimension, "optimizer: gradient " + numerics::shape_string(grads[i].shape()) +
                                            " for parameter " + numerics::shape_string(params[i]->shape()));
    }
  }
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorKind::dimension, "optimizer state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const kernels::AdamCoeffs c{lr, kAdamBeta1, kAdamBeta2, kAdamEps, 1.0 - std::pow(kAdamBeta1, t),
                              1.0 - std::pow(kAdamBeta2, t)};
  const auto& kt = kernels::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i < frozen.size() && frozen[i]) continue;
    auto w = params[i]->to_vector();
    kt.adam(w.data(), state.m[i].data(), state.v[i].data(), grads[i].data().data(), w.size(), c);
    if (i < pad_rows.size() && pad_rows[i]) std::fill_n(w.begin(), params[i]->cols(), 0.0);
    *params[i] = Tensor(params[i]->shape(), std::move(w));
  }
}

void optimizer_step(model::ModelParams& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
                    bool train_embeddings) {
  auto named = params.named();
  std::vector<Tensor*> ptrs;
  std::vector<bool> frozen, pad;
  for (auto& [name, t] : named) {
    ptrs.push_back(t);
    const bool emb = name == "embeddings";
    frozen.push_back(emb && !train_embeddings);
    pad.push_back(emb);
  }
  optimizer_step(ptrs, grads, state, lr, frozen, pad);
}

std::string history_text(const std::vector<EpochRecord>& history) {
  std::string out = "epoch\ttrain_loss";
  for (const auto& k : metrics::report_keys()) out += "\tvalid_" + k;
  out += "\tskipped_labels\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "\t" + io::format_double(r.train_loss);
    for (const auto& k : metrics::report_keys()) {
      out += "\t";
      out += k == "k" ? std::to_string(r.valid.k) : io::format_double(metrics::report_value(r.valid, k));
    }
    out += "\t";
    for (std::size_t i = 0; i < r.valid.skipped_labels.size(); ++i) {
      out += (i ? "," : "") + std::to_string(r.valid.skipped_labels[i]);
    }
    out += "\n";
  }
  return out;
}

std::string timing_text(const std::vector<EpochRecord>& history) {
  std::string out = "epoch\twall_seconds\n";
  for (const auto& r : history) out += std::to_string(r.epoch) + "\t" + io::format_double(r.wall_seconds) + "\n";
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> token_rows(const std::vector<Document>& docs, std::size_t begin,
                                                 std::size_t end, const std::vector<std::size_t>* order) {
  std::vector<std::vector<std::size_t>> rows;
  for (std::size_t i = begin; i < end; ++i) rows.push_back(docs[order ? (*order)[i] : i].tokens);
  return rows;
}

Tensor targets(const std::vector<Document>& docs, std::size_t begin, std::size_t end,
               const std::vector<std::size_t>& order, std::size_t L) {
  std::vector<double> y((end - begin) * L, 0.0);
  for (std::size_t i = begin; i < end; ++i) {
    for (auto l : docs[order[i]].labels) y[(i - begin) * L + l] = 1.0;
  }
  return Tensor({end - begin, L}, std::move(y));
}

void require_docs(const std::vector<Document>* docs, const char* what) {
  if (!docs || docs->empty()) throw Error(ErrorKind::empty_corpus, std::string(what) + " split has no documents");
}

}  // namespace

void check_vocabulary(const model::Checkpoint& ckpt, const preprocess::Vocabulary& vocab) {
  if (ckpt.vocab_checksum != vocab.checksum_hex()) {
    throw Error(ErrorKind::artifact_incompatible, "checkpoint was trained on vocabulary " + ckpt.vocab_checksum +
                                                      ", given vocabulary is " + vocab.checksum_hex());
  }
  if (ckpt.params.embeddings.dim(0) != vocab.size()) {
    throw Error(ErrorKind::artifact_incompatible, "checkpoint embedding rows do not match vocabulary size");
  }
}

metrics::ScoreMatrix predict(const model::Checkpoint& ckpt, const std::vector<Document>& docs,
                             std::size_t batch_size) {
  if (docs.empty()) throw Error(ErrorKind::empty_corpus, "cannot evaluate an empty split");
  const std::size_t L = ckpt.config.num_labels;
  metrics::ScoreMatrix sm;
  sm.docs = docs.size();
  sm.labels = L;
  sm.scores.reserve(docs.size() * L);
  sm.truth.assign(docs.size() * L, 0);
  for (std::size_t begin = 0; begin < docs.size(); begin += batch_size) {
    const std::size_t end = std::min(docs.size(), begin + batch_size);
    const auto rows = token_rows(docs, begin, end, nullptr);
    const auto out = model::forward(model::Batch::pad(rows), ckpt.params, ckpt.config, nullptr);
    const auto probs = numerics::sigmoid(out.logits);
    sm.scores.insert(sm.scores.end(), probs.data().begin(), probs.data().end());
  }
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (auto l : docs[d].labels) {
      if (l >= L) throw Error(ErrorKind::index, "document " + docs[d].id + " has label index out of range");
      sm.truth[d * L + l] = 1;
    }
  }
  return sm;
}

metrics::MetricsReport evaluate(const model::Checkpoint& ckpt, const std::vector<Document>& docs, std::size_t k) {
  return metrics::evaluate_scores(predict(ckpt, docs), k);
}

TrainResult train(const RunConfig& config, const TrainInputs& in, const std::string& out_dir) {
  config.validate();
  require_docs(in.train, "training");
  require_docs(in.valid, "validation");
  if (!in.vocab || !in.labels) throw Error(ErrorKind::validation, "training needs a vocabulary and a label set");
  const std::size_t L = in.labels->size();
  if (config.k > L) {
    throw Error(ErrorKind::range, "k=" + std::to_string(config.k) + " exceeds the " + std::to_string(L) + " labels");
  }
  model::ModelConfig mc = config.model;
  mc.num_labels = L;
  mc.validate();
  if (in.embeddings && in.embeddings->vocab_size != in.vocab->size()) {
    throw Error(ErrorKind::artifact_incompatible, "embedding matrix has " + std::to_string(in.embeddings->vocab_size) +
                                                      " rows, vocabulary has " + std::to_string(in.vocab->size()));
  }

  const auto& train_docs = *in.train;
  std::vector<std::vector<std::size_t>> label_sets;
  for (const auto& d : train_docs) label_sets.push_back(d.labels);
  const auto stats = losses::LabelStats::from_label_sets(label_sets, L, config.C);

  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + out_dir + ": " + ec.message());
    stats.save((fs::path(out_dir) / "label_stats.tsv").string());
    io::write_text((fs::path(out_dir) / "config.txt").string(), config.to_text());
  }

  Rng root(config.seed);
  const std::uint64_t init_seed = root.next();
  Rng shuffle_rng = root.fork();
  Rng dropout_rng = root.fork();

  model::Checkpoint current{mc, in.vocab->checksum_hex(), model::init_params(mc, in.vocab->size(), init_seed, in.embeddings),
                            in.labels->names()};
  TrainResult result;
  AdamState adam;
  double best_auc = -1.0;

  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const auto batch = model::Batch::pad(token_rows(train_docs, begin, end, &order));
      const Tensor y = targets(train_docs, begin, end, order, L);

      numerics::Tape tape;
      const auto bound = current.params.bind(tape);
      const auto out = model::forward(batch, bound, mc, &dropout_rng);
      const Tensor loss = config.loss == "ldam" ? losses::ldam_loss(y, out.logits, stats.margins, config.ldam_scale)
                                                : losses::bce_loss(y, numerics::sigmoid(out.logits));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw Error(ErrorKind::divergence, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                               std::to_string(batch_index));
      }
      tape.backward(loss);
      std::vector<Tensor> grads;
      for (const auto& [name, t] : bound.named()) grads.push_back(tape.grad(*t));
      optimizer_step(current.params, grads, adam, config.lr, config.fine_tune_embeddings);
      loss_sum += value * static_cast<double>(end - begin);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.valid = evaluate(current, *in.valid, config.k);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(rec);
    if (in.progress) in.progress(config.seed, rec);

    const bool improved = rec.valid.micro_auc > best_auc;
    if (improved) {
      best_auc = rec.valid.micro_auc;
      result.best = current;
      result.best_epoch = epoch;
    }
    if (!out_dir.empty()) {
      io::write_text((fs::path(out_dir) / "history.tsv").string(), history_text(result.history));
      io::write_text((fs::path(out_dir) / "timing.tsv").string(), timing_text(result.history));
      if (improved) model::save_checkpoint((fs::path(out_dir) / "best.ckpt").string(), result.best);
    }
  }
  result.final = current;
  if (!out_dir.empty()) model::save_checkpoint((fs::path(out_dir) / "final.ckpt").string(), result.final);
  return result;
}

}  // namespace transicd::harness
