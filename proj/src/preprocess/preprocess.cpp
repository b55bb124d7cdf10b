#include "transicd/preprocess.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "transicd/error.hpp"
#include "transicd/io.hpp"
#include "transicd/stemmer.hpp"
#include "utf8.hpp"

namespace transicd::preprocess {

std::string_view default_stopwords_text();

namespace {

char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 0x20;
  if (c >= 0x100 && c <= 0x17F) {
    if (c == 0x178) return 0xFF;
    const bool even_upper = (c <= 0x137) || (c >= 0x14A && c <= 0x177);
    if (even_upper) return (c % 2 == 0) ? c + 1 : c;
    if (c == 0x138 || c == 0x149 || c == 0x17F) return c;
    return (c % 2 == 1) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

bool is_space(char32_t c) {
  return c == U' ' || (c >= 0x09 && c <= 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  if (c >= 0xA1 && c <= 0xBF) return c != 0xAA && c != 0xB5 && c != 0xBA;
  if (c == 0xD7 || c == 0xF7) return true;
  if (c >= 0x2010 && c <= 0x2027) return true;
  if (c >= 0x2030 && c <= 0x205E) return true;
  if (c >= 0x3001 && c <= 0x3003) return true;
  if (c >= 0x3008 && c <= 0x3011) return true;
  return false;
}

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

std::vector<std::u32string> split_whitespace(const std::u32string& s) {
  std::vector<std::u32string> out;
  std::u32string cur;
  for (char32_t c : s) {
    if (is_space(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::string_view kVocabMagic = "#transicd-vocab";

}  // namespace

StopwordSet parse_stopwords(std::string_view text) {
  StopwordSet set;
  for (const auto& line : io::split(text, '\n')) {
    const auto word = io::trim(line);
    if (word.empty() || word.front() == '#') continue;
    set.emplace(word);
  }
  return set;
}

const StopwordSet& default_stopwords() {
  static const StopwordSet set = parse_stopwords(default_stopwords_text());
  return set;
}

StopwordSet load_stopwords(const std::string& path) { return parse_stopwords(io::read_text(path)); }

std::vector<std::string> pipeline(std::string_view text, const PrepConfig& config) {
  const StopwordSet& stopwords = config.stopwords ? *config.stopwords : default_stopwords();

  std::u32string lowered = utf8::decode(text);
  for (auto& c : lowered) c = to_lower(c);

  // Punctuation becomes a separator, so "urinary,tract" yields two tokens.
  std::vector<std::u32string> tokens;
  for (auto& raw : split_whitespace(lowered)) {
    std::u32string cur;
    auto flush = [&] {
      if (!cur.empty() && !std::all_of(cur.begin(), cur.end(), is_digit)) tokens.push_back(cur);
      cur.clear();
    };
    for (char32_t c : raw) {
      if (is_punct(c)) {
        flush();
      } else {
        cur.push_back(c);
      }
    }
    flush();
  }

  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    std::string word = utf8::encode(tok);
    if (stopwords.count(word)) continue;
    if (tok.size() < config.min_token_length) continue;
    std::string stem = snowball_stem(word);
    // A few stems fall below the minimum (e.g. "abs" -> "ab"); they are dropped
    // so the output never holds a token shorter than the minimum.
    if (utf8::decode(stem).size() < config.min_token_length) continue;
    for (auto& ch : stem) {
      if (ch >= '0' && ch <= '9') ch = 'n';
    }
    out.push_back(std::move(stem));
  }
  return out;
}

std::string join(std::span<const std::string> tokens, char sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(sep);
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

std::size_t Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const std::size_t id = tokens_.size();
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::size_t Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

const std::string& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size()) {
    throw Error(ErrorKind::index, "token index " + std::to_string(index) + " out of range for vocabulary of size " +
                                      std::to_string(tokens_.size()));
  }
  return tokens_[index];
}

std::uint64_t Vocabulary::checksum() const noexcept {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= kFnvPrime;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= kFnvPrime;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return s;
}

std::string Vocabulary::checksum_hex() const { return hex64(checksum()); }

// Header: `#transicd-vocab v1 reserved=<PAD>:0,<UNK>:1 offset=2 size=<V>`.
// Line k after the header holds the token with index k + 1.
void Vocabulary::save(std::ostream& out) const {
  out << kVocabMagic << " v1 reserved=" << kPadToken << ":0," << kUnkToken << ":1 offset=2 size=" << size()
      << '\n';
  for (std::size_t i = 2; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

void Vocabulary::save(const std::string& path) const {
  auto out = io::open_out(path);
  save(out);
  io::finish(out, path);
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorKind::format, "vocabulary file is empty");
  std::istringstream hs(header);
  std::string magic, version, reserved, offset, size_field;
  hs >> magic >> version >> reserved >> offset >> size_field;
  const std::string expected_reserved =
      "reserved=" + std::string(kPadToken) + ":0," + std::string(kUnkToken) + ":1";
  if (magic != kVocabMagic || version != "v1" || reserved != expected_reserved || offset != "offset=2" ||
      size_field.rfind("size=", 0) != 0) {
    throw Error(ErrorKind::format, "bad vocabulary header: " + header);
  }
  std::size_t declared = 0;
  try {
    declared = std::stoul(size_field.substr(5));
  } catch (const std::exception&) {
    throw Error(ErrorKind::format, "bad vocabulary size in header: " + header);
  }
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw Error(ErrorKind::format, "empty vocabulary entry at line " + std::to_string(lineno));
    if (vocab.contains(line)) {
      throw Error(ErrorKind::format, "duplicate vocabulary entry '" + line + "' at line " + std::to_string(lineno));
    }
    vocab.add(line);
  }
  if (vocab.size() != declared) {
    throw Error(ErrorKind::format, "vocabulary header declares " + std::to_string(declared) + " entries, file has " +
                                       std::to_string(vocab.size()));
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::string& path) {
  auto in = io::open_in(path);
  return load(in);
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> training_streams) {
  if (training_streams.empty()) throw Error(ErrorKind::empty_corpus, "cannot build a vocabulary from zero documents");
  Vocabulary vocab;
  for (const auto& stream : training_streams) {
    for (const auto& tok : stream) vocab.add(tok);
  }
  return vocab;
}

std::vector<std::size_t> encode(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) throw Error(ErrorKind::validation, "max_len must be at least 1");
  const std::size_t n = std::min(tokens.size(), max_len);
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.index_of(tokens[i]);
  return ids;
}

std::vector<std::string> decode(std::span<const std::size_t> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(vocab.token(id));
  return out;
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw Error(ErrorKind::format, "empty label name");
    if (!index_.emplace(names_[i], i).second) throw Error(ErrorKind::format, "duplicate label '" + names_[i] + "'");
  }
}

std::size_t LabelSet::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw Error(ErrorKind::label_not_found, "unknown label '" + std::string(name) + "'");
  return it->second;
}

bool LabelSet::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

void LabelSet::save(const std::string& path) const {
  auto out = io::open_out(path);
  for (const auto& n : names_) out << n << '\n';
  io::finish(out, path);
}

LabelSet LabelSet::load(const std::string& path) {
  std::vector<std::string> names;
  for (const auto& line : io::split(io::read_text(path), '\n')) {
    const auto name = io::trim(line);
    if (!name.empty()) names.emplace_back(name);
  }
  return LabelSet(std::move(names));
}

std::vector<CorpusRecord> read_corpus(std::istream& in) {
  std::vector<CorpusRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw Error(ErrorKind::format, "corpus line " + std::to_string(lineno) + ": expected <id>\\t<labels>\\t<text>");
    }
    CorpusRecord rec;
    rec.id = line.substr(0, t1);
    if (rec.id.empty()) throw Error(ErrorKind::format, "corpus line " + std::to_string(lineno) + ": empty id");
    for (const auto& lab : io::split(std::string_view(line).substr(t1 + 1, t2 - t1 - 1), ',')) {
      const auto name = io::trim(lab);
      if (!name.empty()) rec.labels.emplace_back(name);
    }
    rec.text = line.substr(t2 + 1);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<CorpusRecord> read_corpus(const std::string& path) {
  auto in = io::open_in(path);
  return read_corpus(in);
}

void write_corpus(std::ostream& out, std::span<const CorpusRecord> records) {
  for (const auto& r : records) {
    out << r.id << '\t';
    for (std::size_t i = 0; i < r.labels.size(); ++i) out << (i ? "," : "") << r.labels[i];
    out << '\t' << r.text << '\n';
  }
}

void write_corpus(const std::string& path, std::span<const CorpusRecord> records) {
  auto out = io::open_out(path);
  write_corpus(out, records);
  io::finish(out, path);
}

LabelSet collect_labels(std::initializer_list<std::span<const CorpusRecord>> splits) {
  std::vector<std::string> names;
  for (const auto& split : splits) {
    for (const auto& r : split) names.insert(names.end(), r.labels.begin(), r.labels.end());
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return LabelSet(std::move(names));
}

std::vector<std::vector<std::string>> tokenize_records(std::span<const CorpusRecord> records,
                                                       const PrepConfig& config) {
  std::vector<std::vector<std::string>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(pipeline(r.text, config));
  return out;
}

std::vector<Document> make_documents(std::span<const CorpusRecord> records, const Vocabulary& vocab,
                                     const LabelSet& labels, const PrepConfig& config, bool pretokenized) {
  std::vector<Document> docs;
  docs.reserve(records.size());
  for (const auto& r : records) {
    Document d;
    d.id = r.id;
    std::vector<std::string> toks;
    if (pretokenized) {
      for (auto& t : io::split(r.text, ' ')) {
        if (!t.empty()) toks.push_back(std::move(t));
      }
    } else {
      toks = pipeline(r.text, config);
    }
    d.tokens = encode(toks, vocab, config.max_len);
    toks.resize(d.tokens.size());
    d.raw_tokens = std::move(toks);
    // Nothing survived the pipeline; one UNK keeps the document encodable.
    if (d.tokens.empty()) {
      d.tokens.push_back(Vocabulary::kUnk);
      d.raw_tokens.emplace_back(Vocabulary::kUnkToken);
    }
    for (const auto& name : r.labels) d.labels.push_back(labels.index_of(name));
    std::sort(d.labels.begin(), d.labels.end());
    d.labels.erase(std::unique(d.labels.begin(), d.labels.end()), d.labels.end());
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace transicd::preprocess
