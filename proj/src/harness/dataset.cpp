#include <algorithm>

#include "transicd/error.hpp"
#include "transicd/harness.hpp"
#include "transicd/io.hpp"

namespace transicd::harness {

namespace {

std::vector<std::vector<std::string>> token_streams(std::span<const preprocess::CorpusRecord> records,
                                                    const preprocess::PrepConfig& prep, bool pretokenized) {
  if (!pretokenized) return preprocess::tokenize_records(records, prep);
  std::vector<std::vector<std::string>> out;
  for (const auto& r : records) {
    std::vector<std::string> toks;
    for (auto& t : io::split(r.text, ' ')) {
      if (!t.empty()) toks.push_back(std::move(t));
    }
    out.push_back(std::move(toks));
  }
  return out;
}

Dataset assemble(const RunConfig& config, std::span<const preprocess::CorpusRecord> train,
                 std::span<const preprocess::CorpusRecord> valid, std::span<const preprocess::CorpusRecord> test,
                 preprocess::LabelSet labels, bool train_tok, bool valid_tok, bool test_tok) {
  const auto prep = config.prep_config();
  Dataset data;
  if (!config.vocab_path.empty()) {
    data.vocab = preprocess::Vocabulary::load(config.vocab_path);
  } else {
    const auto streams = token_streams(train, prep, train_tok);
    data.vocab = preprocess::build_vocab(streams);
  }
  data.labels = std::move(labels);
  data.train = preprocess::make_documents(train, data.vocab, data.labels, prep, train_tok);
  data.valid = preprocess::make_documents(valid, data.vocab, data.labels, prep, valid_tok);
  data.test = preprocess::make_documents(test, data.vocab, data.labels, prep, test_tok);
  return data;
}

}  // namespace

Dataset prepare_dataset(const RunConfig& config, std::span<const preprocess::CorpusRecord> train,
                        std::span<const preprocess::CorpusRecord> valid,
                        std::span<const preprocess::CorpusRecord> test, std::vector<std::string> labels) {
  auto label_set = labels.empty() ? preprocess::collect_labels({train, valid, test})
                                  : preprocess::LabelSet(std::move(labels));
  return assemble(config, train, valid, test, std::move(label_set), false, false, false);
}

Dataset load_dataset(const RunConfig& config) {
  if (config.train_path.empty()) throw Error(ErrorKind::config, "config key 'train' is required");
  auto read = [](const std::string& path) {
    return path.empty() ? std::vector<preprocess::CorpusRecord>{} : preprocess::read_corpus(path);
  };
  const auto train = read(config.train_path);
  const auto valid = read(config.valid_path);
  const auto test = read(config.test_path);
  auto labels = config.labels_path.empty() ? preprocess::collect_labels({train, valid, test})
                                           : preprocess::LabelSet::load(config.labels_path);
  return assemble(config, train, valid, test, std::move(labels), is_tokenized_path(config.train_path),
                  is_tokenized_path(config.valid_path), is_tokenized_path(config.test_path));
}

embeddings::EmbeddingMatrix embed(const RunConfig& config, const Dataset& data) {
  std::vector<std::vector<std::size_t>> corpus;
  auto add = [&](const std::vector<Document>& docs) {
    for (const auto& d : docs) corpus.push_back(d.tokens);
  };
  add(data.train);
  if (config.cbow_all_splits) {
    add(data.valid);
    add(data.test);
  }
  auto cbow = config.cbow;
  cbow.dim = config.model.encoder.d_model;
  cbow.seed = config.seed;
  return embeddings::train_cbow(corpus, data.vocab.size(), cbow);
}

}  // namespace transicd::harness
