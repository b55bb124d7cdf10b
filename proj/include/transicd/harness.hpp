#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "transicd/embeddings.hpp"
#include "transicd/losses.hpp"
#include "transicd/metrics.hpp"
#include "transicd/model.hpp"
#include "transicd/preprocess.hpp"

namespace transicd::harness {

using preprocess::Document;

// Every tunable of a run. Text form is flat `key = value` lines; `#` starts a
// comment. Unknown keys and malformed values raise ErrorKind::config.
struct RunConfig {
  model::ModelConfig model = default_model();

  double lr = 0.001;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::string loss = "ldam";  // ldam | bce
  double C = 3.0;
  double ldam_scale = 1.0;
  bool fine_tune_embeddings = true;
  std::size_t k = 5;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::size_t threads = 1;

  embeddings::CbowConfig cbow;  // dim follows model d_e
  bool cbow_all_splits = false;

  std::size_t min_token_length = 3;
  std::string stopwords;  // empty -> built-in list

  // Corpus splits. Files named *.tok.tsv hold pipeline output and are not
  // re-tokenized.
  std::string train_path, valid_path, test_path;
  std::string labels_path, vocab_path, embeddings_path;
  std::string out_dir = "run";

  static model::ModelConfig default_model();

  static const std::vector<std::string>& keys();
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;
  std::string to_text() const;

  preprocess::PrepConfig prep_config() const;
};

RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path);

bool is_tokenized_path(const std::string& path);

// Documents of one split, encoded against `vocab`.
std::vector<Document> load_split(const std::string& path, const preprocess::Vocabulary& vocab,
                                 const preprocess::LabelSet& labels, const preprocess::PrepConfig& prep);

// Encoded splits sharing one vocabulary and label set. The vocabulary comes
// from the training split only, so valid/test tokens unseen in training map to UNK.
struct Dataset {
  preprocess::Vocabulary vocab;
  preprocess::LabelSet labels;
  std::vector<Document> train, valid, test;
};

// In-memory records; `labels` empty -> collected from all three splits.
Dataset prepare_dataset(const RunConfig& config, std::span<const preprocess::CorpusRecord> train,
                        std::span<const preprocess::CorpusRecord> valid,
                        std::span<const preprocess::CorpusRecord> test, std::vector<std::string> labels = {});

// From config paths: vocab_path and labels_path are loaded when set, otherwise
// built from the splits. Unset valid/test paths leave those splits empty.
Dataset load_dataset(const RunConfig& config);

// CBOW with dim = d_e over the training split (all splits with cbow_all_splits).
embeddings::EmbeddingMatrix embed(const RunConfig& config, const Dataset& data);

struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One Adam step with bias correction over `params` (grads in the same order).
// Entries with `frozen[i]` keep their value. Row 0 of `pad_rows` tensors is
// reset to zero afterwards.
void optimizer_step(std::vector<numerics::Tensor*>& params, const std::vector<numerics::Tensor>& grads,
                    AdamState& state, double lr, const std::vector<bool>& frozen = {},
                    const std::vector<bool>& pad_rows = {});

void optimizer_step(model::ModelParams& params, const std::vector<numerics::Tensor>& grads, AdamState& state,
                    double lr, bool train_embeddings = true);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  metrics::MetricsReport valid;
  double wall_seconds = 0.0;
};

// Tab-separated history without wall time, so runs can be compared byte for byte.
std::string history_text(const std::vector<EpochRecord>& history);
std::string timing_text(const std::vector<EpochRecord>& history);

struct TrainResult {
  model::Checkpoint best;
  model::Checkpoint final;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

struct TrainInputs {
  const std::vector<Document>* train = nullptr;
  const std::vector<Document>* valid = nullptr;
  const preprocess::Vocabulary* vocab = nullptr;
  const preprocess::LabelSet* labels = nullptr;
  const embeddings::EmbeddingMatrix* embeddings = nullptr;  // null -> random init
  // Called after each epoch with the run's seed; may run on worker threads.
  std::function<void(std::uint64_t seed, const EpochRecord&)> progress;
};

// Minibatch Adam on the configured loss. After each epoch the validation split
// is scored and, when `out_dir` is non-empty, history.tsv, timing.tsv and
// best.ckpt (highest validation micro-AUC) are rewritten; final.ckpt is
// written at the end.
TrainResult train(const RunConfig& config, const TrainInputs& inputs, const std::string& out_dir);

// Inference-mode probabilities for every document.
metrics::ScoreMatrix predict(const model::Checkpoint& ckpt, const std::vector<Document>& docs,
                             std::size_t batch_size = 16);
metrics::MetricsReport evaluate(const model::Checkpoint& ckpt, const std::vector<Document>& docs, std::size_t k);

// Raises artifact_incompatible when the checkpoint was trained on another vocabulary.
void check_vocabulary(const model::Checkpoint& ckpt, const preprocess::Vocabulary& vocab);

struct AttentionRow {
  std::string label;
  std::vector<double> weights;  // one per token
};

struct AttentionReport {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<AttentionRow> rows;
};

AttentionReport attend(const model::Checkpoint& ckpt, const Document& doc, const std::vector<std::string>& labels);

// Background intensity in [0, 1]; the row maximum maps to 1.
double intensity(double weight, double row_max);
// `label TAB position TAB token TAB weight` lines under a header.
std::string attention_tsv(const AttentionReport& report);
std::string attention_html(const AttentionReport& report);

struct MetricSummary {
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation (n - 1)
  std::size_t n = 0;
};

// Mean and stdev for each report key across runs.
std::map<std::string, MetricSummary> aggregate(const std::vector<metrics::MetricsReport>& reports);
// `key = mean ± stdev` lines in report-key order.
std::string aggregate_text(const std::map<std::string, MetricSummary>& summary);
std::string aggregate_json(const std::map<std::string, MetricSummary>& summary);

// Train one model per seed (on `threads` workers), evaluate each best
// checkpoint on `test`, and write out_dir/seed_<s>/... plus the aggregate.
struct SeedRun {
  std::uint64_t seed = 0;
  metrics::MetricsReport test;
  std::string dir;
};
std::vector<SeedRun> run_seeds(const RunConfig& config, const TrainInputs& inputs, const std::vector<Document>& test,
                               const std::string& out_dir);

// Reads runs_dir/seed_<s>/test_report.json for every seed directory, ordered by
// seed. Raises empty_corpus when none exist.
std::vector<metrics::MetricsReport> load_seed_reports(const std::string& runs_dir);

}  // namespace transicd::harness
