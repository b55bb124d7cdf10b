#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "transicd/preprocess.hpp"

namespace transicd::synth {

struct SynthSpec {
  std::size_t num_docs = 2000;
  std::size_t num_labels = 10;
  std::size_t vocab_noise_size = 400;
  std::size_t doc_len_min = 40;
  std::size_t doc_len_max = 64;
  double tail_decay = 0.7;        // gamma: P(label l) = head_rate * gamma^l
  double trigger_strength = 0.9;  // p: chance each true label's trigger is inserted
  double head_rate = 0.5;
  std::uint64_t seed = 1;

  // Throws ErrorKind::spec for infeasible combinations.
  void validate() const;
};

struct SynthCorpus {
  std::vector<preprocess::CorpusRecord> train, valid, test;
  std::vector<std::string> label_names;  // index order
  std::vector<std::string> triggers;     // triggers[l] is label l's trigger token
};

// Documents are `p<patient>_<k>`; every patient's documents land in one split
// (about 70/15/15 by patient). Text is noise words plus stopwords, numbers and
// punctuation that the preprocessing pipeline removes, so each noise word and
// trigger survives preprocessing unchanged.
SynthCorpus generate(const SynthSpec& spec);

// Writes train.tsv, valid.tsv, test.tsv, labels.txt and triggers.txt.
void write(const std::string& dir, const SynthCorpus& corpus);

// `label TAB trigger_token` per line.
std::vector<std::pair<std::string, std::string>> read_triggers(const std::string& path);

std::string patient_of(const std::string& doc_id);

}  // namespace transicd::synth
