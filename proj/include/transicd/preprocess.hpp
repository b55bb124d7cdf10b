#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace transicd::preprocess {

using StopwordSet = std::unordered_set<std::string>;

// Built-in English list (data/stopwords_en.txt).
const StopwordSet& default_stopwords();
StopwordSet parse_stopwords(std::string_view text);
StopwordSet load_stopwords(const std::string& path);

struct PrepConfig {
  std::size_t min_token_length = 3;
  std::shared_ptr<const StopwordSet> stopwords;  // null -> default_stopwords()
  std::size_t max_len = 2500;
};

// lowercase -> tokenize -> strip punctuation and pure numbers -> stopwords ->
// min length -> stem -> mask digits as 'n'.
std::vector<std::string> pipeline(std::string_view text, const PrepConfig& config = {});

std::string join(std::span<const std::string> tokens, char sep = ' ');

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<PAD>";
  static constexpr std::string_view kUnkToken = "<UNK>";

  Vocabulary();

  // Adds a token if new; returns its index.
  std::size_t add(const std::string& token);
  // UNK for unknown tokens.
  std::size_t index_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t index) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // FNV-1a over every entry; ties embeddings and checkpoints to this vocabulary.
  std::uint64_t checksum() const noexcept;
  std::string checksum_hex() const;

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::string hex64(std::uint64_t value);

// One entry per distinct token in first-occurrence order, after PAD and UNK.
Vocabulary build_vocab(std::span<const std::vector<std::string>> training_streams);

std::vector<std::size_t> encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                                std::size_t max_len);
std::vector<std::string> decode(std::span<const std::size_t> ids, const Vocabulary& vocab);

// Label names <-> indices [0, L).
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  std::size_t index_of(std::string_view name) const;  // throws label_not_found
  bool contains(std::string_view name) const;
  const std::string& name(std::size_t index) const { return names_.at(index); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  void save(const std::string& path) const;
  static LabelSet load(const std::string& path);

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

// `<id> TAB <label,label,...> TAB <text>` per line.
struct CorpusRecord {
  std::string id;
  std::vector<std::string> labels;
  std::string text;
};

std::vector<CorpusRecord> read_corpus(std::istream& in);
std::vector<CorpusRecord> read_corpus(const std::string& path);
void write_corpus(std::ostream& out, std::span<const CorpusRecord> records);
void write_corpus(const std::string& path, std::span<const CorpusRecord> records);

// Labels seen across the given splits, sorted by name.
LabelSet collect_labels(std::initializer_list<std::span<const CorpusRecord>> splits);

struct Document {
  std::string id;
  std::vector<std::size_t> tokens;
  std::vector<std::string> raw_tokens;
  std::vector<std::size_t> labels;  // ascending, unique
};

// Runs the text pipeline on each record.
std::vector<std::vector<std::string>> tokenize_records(std::span<const CorpusRecord> records,
                                                       const PrepConfig& config = {});

// Builds documents; with `pretokenized` the record text is taken as
// space-separated pipeline output. A document left with no tokens becomes [UNK].
std::vector<Document> make_documents(std::span<const CorpusRecord> records, const Vocabulary& vocab,
                                     const LabelSet& labels, const PrepConfig& config,
                                     bool pretokenized);

}  // namespace transicd::preprocess
