#include "transicd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_set>

#include "transicd/error.hpp"
#include "transicd/io.hpp"
#include "transicd/rng.hpp"
#include "transicd/stemmer.hpp"

namespace transicd::synth {

namespace {

constexpr char kConsonants[] = "bdfgkmnprtvz";
constexpr char kVowels[] = "aou";
// Pipeline-removed filler mixed into the raw text.
const std::vector<std::string> kFiller = {"the", "and", "of", "was", "with", "for", "on", "is", "to", "a"};

// CV syllables ending in a vowel from {a, o, u}: no English suffix rule fires,
// so the stem is the word itself.
std::string make_word(Rng& rng) {
  const std::size_t syllables = 2 + rng.below(2);
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w.push_back(kConsonants[rng.below(sizeof kConsonants - 1)]);
    w.push_back(kVowels[rng.below(sizeof kVowels - 1)]);
  }
  return w;
}

std::vector<std::string> make_lexicon(Rng& rng, std::size_t count) {
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  const auto& stop = preprocess::default_stopwords();
  std::size_t attempts = 0;
  while (words.size() < count) {
    if (++attempts > count * 1000) throw Error(ErrorKind::spec, "cannot draw " + std::to_string(count) + " distinct words");
    auto w = make_word(rng);
    if (stop.count(w) || preprocess::snowball_stem(w) != w || !seen.insert(w).second) continue;
    words.push_back(std::move(w));
  }
  return words;
}

std::string label_name(std::size_t l, std::size_t total) {
  std::string digits = std::to_string(l);
  const std::size_t width = std::to_string(total - 1).size();
  return "D" + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

void SynthSpec::validate() const {
  if (num_labels == 0) throw Error(ErrorKind::spec, "need at least one label");
  if (num_docs < 10 * num_labels) {
    throw Error(ErrorKind::spec, "num_docs " + std::to_string(num_docs) + " is below 10 x " +
                                     std::to_string(num_labels) + " labels");
  }
  if (doc_len_min < num_labels) {
    throw Error(ErrorKind::spec, "doc_len_min " + std::to_string(doc_len_min) + " cannot hold " +
                                     std::to_string(num_labels) + " triggers");
  }
  if (doc_len_max < doc_len_min) throw Error(ErrorKind::spec, "doc_len_max is below doc_len_min");
  if (vocab_noise_size < 10) throw Error(ErrorKind::spec, "vocab_noise_size must be at least 10");
  if (!(tail_decay > 0.0 && tail_decay <= 1.0)) throw Error(ErrorKind::spec, "tail_decay must lie in (0, 1]");
  if (!(trigger_strength > 0.0 && trigger_strength <= 1.0)) {
    throw Error(ErrorKind::spec, "trigger_strength must lie in (0, 1]");
  }
  if (!(head_rate > 0.0 && head_rate <= 1.0)) throw Error(ErrorKind::spec, "head_rate must lie in (0, 1]");
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Rng words_rng = rng.fork();
  auto lexicon = make_lexicon(words_rng, spec.vocab_noise_size + spec.num_labels);
  SynthCorpus out;
  out.triggers.assign(lexicon.end() - static_cast<std::ptrdiff_t>(spec.num_labels), lexicon.end());
  lexicon.resize(spec.vocab_noise_size);
  for (std::size_t l = 0; l < spec.num_labels; ++l) out.label_names.push_back(label_name(l, spec.num_labels));

  // Zipf(1) noise frequencies.
  std::vector<double> zipf(lexicon.size());
  for (std::size_t i = 0; i < zipf.size(); ++i) zipf[i] = 1.0 / static_cast<double>(i + 1);
  const DiscreteSampler noise(zipf);

  std::vector<double> rate(spec.num_labels);
  for (std::size_t l = 0; l < spec.num_labels; ++l) rate[l] = spec.head_rate * std::pow(spec.tail_decay, static_cast<double>(l));

  // Patients own 1-3 consecutive documents.
  struct Patient {
    std::vector<preprocess::CorpusRecord> docs;
  };
  std::vector<Patient> patients;
  std::size_t made = 0;
  while (made < spec.num_docs) {
    const std::size_t want = std::min<std::size_t>(1 + rng.below(3), spec.num_docs - made);
    Patient p;
    const std::size_t pid = patients.size();
    for (std::size_t k = 0; k < want; ++k) {
      preprocess::CorpusRecord rec;
      rec.id = "p" + std::to_string(pid) + "_" + std::to_string(k);
      std::vector<std::size_t> labels;
      while (labels.empty()) {
        for (std::size_t l = 0; l < spec.num_labels; ++l) {
          if (rng.bernoulli(rate[l])) labels.push_back(l);
        }
      }
      const std::size_t len = spec.doc_len_min + rng.below(spec.doc_len_max - spec.doc_len_min + 1);
      std::vector<std::string> tokens;
      for (auto l : labels) {
        if (rng.bernoulli(spec.trigger_strength)) tokens.push_back(out.triggers[l]);
      }
      const std::size_t triggers = tokens.size();
      std::vector<std::string> body;
      for (std::size_t i = triggers; i < len; ++i) body.push_back(lexicon[noise.sample(rng)]);
      for (std::size_t t = 0; t < triggers; ++t) {
        const auto at = rng.below(body.size() + 1);
        body.insert(body.begin() + static_cast<std::ptrdiff_t>(at), tokens[t]);
      }
      std::string text;
      bool sentence_start = true;
      for (std::size_t i = 0; i < body.size(); ++i) {
        if (rng.bernoulli(0.15)) text += kFiller[rng.below(kFiller.size())] + " ";
        if (rng.bernoulli(0.03)) text += std::to_string(rng.below(500)) + " ";
        std::string w = body[i];
        if (sentence_start) w[0] = static_cast<char>(w[0] - 'a' + 'A');
        sentence_start = rng.bernoulli(0.1);
        text += w;
        text += sentence_start ? ". " : (rng.bernoulli(0.05) ? ", " : " ");
      }
      while (!text.empty() && text.back() == ' ') text.pop_back();
      rec.text = std::move(text);
      for (auto l : labels) rec.labels.push_back(out.label_names[l]);
      p.docs.push_back(std::move(rec));
    }
    made += want;
    patients.push_back(std::move(p));
  }

  std::vector<std::size_t> order(patients.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const std::size_t n_train = (order.size() * 70) / 100;
  const std::size_t n_valid = (order.size() * 15) / 100;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? out.train : (i < n_train + n_valid ? out.valid : out.test);
    for (auto& d : patients[order[i]].docs) dst.push_back(std::move(d));
  }
  if (out.train.empty() || out.valid.empty() || out.test.empty()) {
    throw Error(ErrorKind::spec, "too few patients to fill train, valid and test splits");
  }
  return out;
}

void write(const std::string& dir, const SynthCorpus& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create directory " + dir + ": " + ec.message());
  const std::filesystem::path base(dir);
  preprocess::write_corpus((base / "train.tsv").string(), corpus.train);
  preprocess::write_corpus((base / "valid.tsv").string(), corpus.valid);
  preprocess::write_corpus((base / "test.tsv").string(), corpus.test);
  preprocess::LabelSet(corpus.label_names).save((base / "labels.txt").string());
  std::string triggers;
  for (std::size_t l = 0; l < corpus.label_names.size(); ++l) {
    triggers += corpus.label_names[l] + "\t" + corpus.triggers[l] + "\n";
  }
  io::write_text((base / "triggers.txt").string(), triggers);
}

std::vector<std::pair<std::string, std::string>> read_triggers(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t lineno = 0;
  for (const auto& line : io::split(io::read_text(path), '\n')) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    const auto f = io::split(line, '\t');
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      throw Error(ErrorKind::format, path + ":" + std::to_string(lineno) + ": expected label\\ttrigger_token");
    }
    out.emplace_back(f[0], std::string(io::trim(f[1])));
  }
  return out;
}

std::string patient_of(const std::string& doc_id) { return doc_id.substr(0, doc_id.find('_')); }

}  // namespace transicd::synth
