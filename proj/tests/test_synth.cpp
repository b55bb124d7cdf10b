#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "support/errors.hpp"
#include "transicd/io.hpp"
#include "transicd/metrics.hpp"
#include "transicd/preprocess.hpp"
#include "transicd/synth.hpp"

using namespace transicd;
using namespace transicd::synth;
using transicd::testing::kind_of;

namespace {

std::vector<const preprocess::CorpusRecord*> all_docs(const SynthCorpus& c) {
  std::vector<const preprocess::CorpusRecord*> out;
  for (const auto* split : {&c.train, &c.valid, &c.test}) {
    for (const auto& r : *split) out.push_back(&r);
  }
  return out;
}

std::vector<double> label_counts(const SynthCorpus& c) {
  std::vector<double> counts(c.label_names.size(), 0.0);
  const preprocess::LabelSet labels(c.label_names);
  for (const auto* r : all_docs(c)) {
    for (const auto& name : r->labels) counts[labels.index_of(name)] += 1.0;
  }
  return counts;
}

}  // namespace

TEST_CASE("uniform decay gives equal label frequencies") {
  SynthSpec spec;
  spec.num_labels = 4;
  spec.num_docs = 4000;
  spec.tail_decay = 1.0;
  spec.doc_len_min = 10;
  spec.doc_len_max = 20;
  const auto c = generate(spec);
  const auto counts = label_counts(c);
  // Per label: Bernoulli(0.5) conditioned on a non-empty set.
  const double q = 0.5 / (1.0 - std::pow(0.5, 4));
  const double mean = q * 4000;
  const double sigma = std::sqrt(4000 * q * (1 - q));
  for (double n : counts) CHECK(std::abs(n - mean) < 3 * sigma);
}

TEST_CASE("long tail follows the decay ratio") {
  // At 2,000 documents the sampling sd of n5/n4 is ~0.07, so counts are pooled
  // over five independent corpora before taking ratios.
  std::vector<double> counts(10, 0.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec spec;
    spec.num_labels = 10;
    spec.num_docs = 2000;
    spec.tail_decay = 0.7;
    spec.seed = seed;
    const auto c = label_counts(generate(spec));
    for (std::size_t l = 0; l < 10; ++l) counts[l] += c[l];
  }
  for (std::size_t l = 0; l < 5; ++l) {
    CAPTURE(l);
    CHECK(std::abs(counts[l + 1] / counts[l] - 0.7) <= 0.1);
  }
}

TEST_CASE("generation is deterministic byte for byte") {
  SynthSpec spec;
  spec.num_docs = 300;
  spec.seed = 42;
  const auto dir = std::filesystem::temp_directory_path() / "transicd_synth_det";
  write((dir / "a").string(), generate(spec));
  write((dir / "b").string(), generate(spec));
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "labels.txt", "triggers.txt"}) {
    CAPTURE(f);
    CHECK(io::read_text((dir / "a" / f).string()) == io::read_text((dir / "b" / f).string()));
  }
  spec.seed = 43;
  write((dir / "c").string(), generate(spec));
  CHECK(io::read_text((dir / "a" / "train.tsv").string()) != io::read_text((dir / "c" / "train.tsv").string()));
  const auto trig = read_triggers((dir / "a" / "triggers.txt").string());
  CHECK(trig.size() == 10);
  CHECK(trig[0].first == "D0");
  std::filesystem::remove_all(dir);
}

TEST_CASE("patients never cross splits") {
  SynthSpec spec;
  spec.num_docs = 500;
  const auto c = generate(spec);
  std::map<std::string, int> owner;
  int split = 0;
  for (const auto* docs : {&c.train, &c.valid, &c.test}) {
    for (const auto& r : *docs) {
      const auto p = patient_of(r.id);
      auto [it, inserted] = owner.emplace(p, split);
      CHECK(it->second == split);
    }
    ++split;
  }
  CHECK(c.train.size() + c.valid.size() + c.test.size() == 500);
  CHECK(c.train.size() > c.test.size());
}

TEST_CASE("words survive preprocessing and documents respect the length range") {
  SynthSpec spec;
  spec.num_docs = 200;
  spec.trigger_strength = 1.0;
  const auto c = generate(spec);
  std::set<std::string> triggers(c.triggers.begin(), c.triggers.end());
  CHECK(triggers.size() == spec.num_labels);
  const preprocess::LabelSet labels(c.label_names);
  for (const auto* r : all_docs(c)) {
    const auto toks = preprocess::pipeline(r->text);
    CHECK(toks.size() >= spec.doc_len_min);
    CHECK(toks.size() <= spec.doc_len_max);
    CHECK_FALSE(r->labels.empty());
    // With strength 1 a label is present exactly when its trigger is.
    std::set<std::string> present;
    for (const auto& t : toks) {
      if (triggers.count(t)) present.insert(t);
    }
    std::set<std::string> expected;
    for (const auto& name : r->labels) expected.insert(c.triggers[labels.index_of(name)]);
    CHECK(present == expected);
  }
}

TEST_CASE("trigger presence is a perfect classifier at full strength") {
  SynthSpec spec;
  spec.num_docs = 300;
  spec.trigger_strength = 1.0;
  const auto c = generate(spec);
  const preprocess::LabelSet labels(c.label_names);
  metrics::ScoreMatrix sm;
  sm.labels = spec.num_labels;
  for (const auto& r : c.test) {
    const auto toks = preprocess::pipeline(r.text);
    std::set<std::string> seen(toks.begin(), toks.end());
    for (std::size_t l = 0; l < sm.labels; ++l) {
      sm.scores.push_back(seen.count(c.triggers[l]) ? 1.0 : 0.0);
      sm.truth.push_back(0);
    }
    for (const auto& name : r.labels) sm.truth[sm.docs * sm.labels + labels.index_of(name)] = 1;
    ++sm.docs;
  }
  CHECK(metrics::macro_micro_auc(sm).micro == 1.0);
}

TEST_CASE("infeasible specs are rejected") {
  SynthSpec spec;
  spec.num_docs = 99;
  CHECK(kind_of([&] { generate(spec); }) == ErrorKind::spec);
  spec = SynthSpec{};
  spec.doc_len_min = 5;
  CHECK(kind_of([&] { generate(spec); }) == ErrorKind::spec);
  spec = SynthSpec{};
  spec.tail_decay = 0.0;
  CHECK(kind_of([&] { generate(spec); }) == ErrorKind::spec);
  spec = SynthSpec{};
  spec.trigger_strength = 1.5;
  CHECK(kind_of([&] { generate(spec); }) == ErrorKind::spec);
}
