#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "support/errors.hpp"
#include "support/tiny_model.hpp"
#include "transicd/error.hpp"
#include "transicd/harness.hpp"
#include "transicd/io.hpp"
#include "transicd/synth.hpp"

using namespace transicd;
using namespace transicd::harness;
using numerics::Tensor;
using testing::kind_of;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("transicd_test_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig small_config() {
  RunConfig c;
  c.model.encoder.layers = 1;
  c.model.encoder.heads = 2;
  c.model.encoder.d_model = 8;
  c.model.encoder.dropout = 0.1;
  c.model.encoder.max_len = 32;
  c.epochs = 3;
  c.batch_size = 4;
  c.lr = 0.01;
  c.k = 2;
  c.cbow.epochs = 1;
  return c;
}

synth::SynthCorpus small_corpus(std::size_t docs, double strength, std::uint64_t seed = 3) {
  synth::SynthSpec s;
  s.num_docs = docs;
  s.num_labels = 4;
  s.vocab_noise_size = 40;
  s.doc_len_min = 8;
  s.doc_len_max = 16;
  s.tail_decay = 0.8;
  s.trigger_strength = strength;
  s.seed = seed;
  return synth::generate(s);
}

Dataset small_dataset(const RunConfig& c, const synth::SynthCorpus& corpus) {
  return prepare_dataset(c, corpus.train, corpus.valid, corpus.test, corpus.label_names);
}

TrainInputs inputs_for(const Dataset& d, const std::vector<Document>& valid) {
  return {&d.train, &valid, &d.vocab, &d.labels, nullptr, {}};
}

}  // namespace

TEST_CASE("config: parse, override and render round trip") {
  const auto c = parse_config("# comment\nlayers = 3\nloss = ldam  # trailing\nC=0\nseeds = 4, 5\n\n");
  CHECK(c.model.encoder.layers == 3);
  CHECK(c.loss == "ldam");
  CHECK(c.C == 0.0);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.lr == 0.001);
  CHECK(c.epochs == 30);

  auto d = c;
  d.set("lr", "0.5");
  CHECK(d.lr == 0.5);
  CHECK(parse_config(d.to_text()).to_text() == d.to_text());
  for (const auto& key : RunConfig::keys()) CHECK(parse_config(key + " = " + d.get(key), d).get(key) == d.get(key));
}

TEST_CASE("config: unknown keys and bad values are rejected") {
  CHECK(kind_of([] { parse_config("learning_rate = 0.1"); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config("epochs = -1"); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config("lr = fast"); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config("positional = maybe"); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config("just a line"); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config("loss = focal").validate(); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config("lr = 0").validate(); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config("heads = 3").validate(); }) == ErrorKind::config);
}

TEST_CASE("config: relative paths resolve against the config file") {
  const auto dir = scratch("config_paths");
  io::write_text((dir / "run.cfg").string(), "train = data/train.tsv\nvalid = /abs/valid.tsv\n");
  const auto c = load_config((dir / "run.cfg").string());
  CHECK(c.train_path == (dir / "data/train.tsv").string());
  CHECK(c.valid_path == "/abs/valid.tsv");
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor x({2, 2}, {1.0, -2.0, 3.0, 0.5});
  const Tensor before = x;
  std::vector<Tensor*> params = {&x};
  AdamState state;
  optimizer_step(params, {Tensor({2, 2}, std::vector<double>(4, 0.0))}, state, 0.1);
  CHECK(x.data()[0] == before.data()[0]);
  CHECK(std::equal(x.data().begin(), x.data().end(), before.data().begin()));
  CHECK(state.step == 1);
}

TEST_CASE("adam: constant positive gradient strictly decreases a scalar") {
  Tensor x({1, 1}, {0.0});
  std::vector<Tensor*> params = {&x};
  AdamState state;
  double prev = x.item();
  for (int i = 0; i < 50; ++i) {
    optimizer_step(params, {Tensor({1, 1}, {1.0})}, state, 0.01);
    CHECK(x.item() < prev);
    prev = x.item();
  }
}

TEST_CASE("adam: converges on x^2 from 1 within 500 steps at lr 0.01") {
  Tensor x({1, 1}, {1.0});
  std::vector<Tensor*> params = {&x};
  AdamState state;
  std::size_t reached = 0;
  for (std::size_t i = 1; i <= 500 && reached == 0; ++i) {
    optimizer_step(params, {Tensor({1, 1}, {2.0 * x.item()})}, state, 0.01);
    if (std::abs(x.item()) < 1e-3) reached = i;
  }
  CHECK(reached > 0);
}

TEST_CASE("adam: shape mismatch, frozen entries and the PAD row") {
  Tensor x({2, 2}, {1.0, 1.0, 1.0, 1.0});
  std::vector<Tensor*> params = {&x};
  AdamState state;
  CHECK(kind_of([&] { optimizer_step(params, {Tensor({1, 4}, std::vector<double>(4, 1.0))}, state, 0.1); }) ==
        ErrorKind::dimension);

  const Tensor g({2, 2}, {1.0, 1.0, 1.0, 1.0});
  optimizer_step(params, {g}, state, 0.1, {true});
  CHECK(x.data()[3] == 1.0);

  optimizer_step(params, {g}, state, 0.1, {false}, {true});
  CHECK(x.data()[0] == 0.0);
  CHECK(x.data()[1] == 0.0);
  CHECK(x.data()[2] < 1.0);
}

TEST_CASE("dataset: vocabulary from training only, shared label set") {
  const auto c = small_config();
  const auto corpus = small_corpus(60, 1.0);
  const auto d = small_dataset(c, corpus);
  CHECK(d.labels.names() == corpus.label_names);
  CHECK(d.train.size() == corpus.train.size());
  CHECK(d.valid.size() == corpus.valid.size());
  CHECK(d.test.size() == corpus.test.size());
  std::vector<std::vector<std::string>> streams;
  for (const auto& doc : d.train) streams.push_back(doc.raw_tokens);
  CHECK(preprocess::build_vocab(streams) == d.vocab);

  const auto e = embed(c, d);
  CHECK(e.vocab_size == d.vocab.size());
  CHECK(e.dim == c.model.encoder.d_model);
}

TEST_CASE("train: 8-document toy corpus is memorized") {
  auto c = small_config();
  c.model.encoder.d_model = 16;
  c.model.encoder.dropout = 0.0;
  c.epochs = 50;
  c.batch_size = 2;
  c.lr = 0.01;
  const auto corpus = small_corpus(40, 1.0);
  std::vector<preprocess::CorpusRecord> toy(corpus.train.begin(), corpus.train.begin() + 8);
  const auto d = prepare_dataset(c, toy, toy, toy, corpus.label_names);
  const auto result = train(c, inputs_for(d, d.train), "");
  CHECK(result.history.size() == 50);
  const auto report = evaluate(result.final, d.train, c.k);
  CHECK(report.micro_f1 == 1.0);
}

TEST_CASE("train: same seed gives identical history and checkpoints on disk") {
  const auto c = small_config();
  const auto d = small_dataset(c, small_corpus(60, 0.9));
  const auto dir = scratch("determinism");
  train(c, inputs_for(d, d.valid), (dir / "a").string());
  train(c, inputs_for(d, d.valid), (dir / "b").string());
  for (const char* f : {"history.tsv", "best.ckpt", "final.ckpt", "label_stats.tsv", "config.txt"}) {
    CAPTURE(f);
    CHECK(io::read_text((dir / "a" / f).string()) == io::read_text((dir / "b" / f).string()));
  }
  CHECK(fs::exists(dir / "a" / "timing.tsv"));

  auto other = c;
  other.seed = 2;
  train(other, inputs_for(d, d.valid), (dir / "c").string());
  CHECK(io::read_text((dir / "a/history.tsv").string()) != io::read_text((dir / "c/history.tsv").string()));
}

TEST_CASE("train: ldam with C = 0 reproduces the bce history exactly") {
  auto bce = small_config();
  bce.loss = "bce";
  const auto d = small_dataset(bce, small_corpus(60, 0.9));
  auto ldam = bce;
  ldam.loss = "ldam";
  ldam.C = 0.0;
  const auto a = train(bce, inputs_for(d, d.valid), "");
  const auto b = train(ldam, inputs_for(d, d.valid), "");
  CHECK(history_text(a.history) == history_text(b.history));

  ldam.C = 3.0;
  const auto m = train(ldam, inputs_for(d, d.valid), "");
  CHECK(history_text(a.history) != history_text(m.history));
}

TEST_CASE("train: best checkpoint tracks validation micro-AUC") {
  const auto c = small_config();
  const auto d = small_dataset(c, small_corpus(60, 0.9));
  const auto r = train(c, inputs_for(d, d.valid), "");
  double best = -1.0;
  std::size_t epoch = 0;
  for (const auto& h : r.history) {
    if (h.valid.micro_auc > best) {
      best = h.valid.micro_auc;
      epoch = h.epoch;
    }
  }
  CHECK(r.best_epoch == epoch);
  CHECK(evaluate(r.best, d.valid, c.k).micro_auc == best);
}

TEST_CASE("train: preconditions") {
  const auto c = small_config();
  const auto d = small_dataset(c, small_corpus(60, 0.9));
  const std::vector<Document> none;
  CHECK(kind_of([&] { train(c, inputs_for(d, none), ""); }) == ErrorKind::empty_corpus);
  auto big_k = c;
  big_k.k = 9;
  CHECK(kind_of([&] { train(big_k, inputs_for(d, d.valid), ""); }) == ErrorKind::range);
  const embeddings::EmbeddingMatrix wrong{3, 8, std::vector<double>(24, 0.0)};
  TrainInputs in = inputs_for(d, d.valid);
  in.embeddings = &wrong;
  CHECK(kind_of([&] { train(c, in, ""); }) == ErrorKind::artifact_incompatible);

  // A non-finite weight poisons every logit; the loop must stop with context.
  embeddings::EmbeddingMatrix poison{d.vocab.size(), 8, std::vector<double>(d.vocab.size() * 8, 0.1)};
  std::fill_n(poison.values.begin(), 8, 0.0);
  for (std::size_t i = 8; i < poison.values.size(); ++i) poison.values[i] = std::nan("");
  in.embeddings = &poison;
  try {
    train(c, in, "");
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::divergence);
    CHECK(std::string(e.what()).find("epoch 1, batch 0") != std::string::npos);
  }
}

TEST_CASE("evaluate: side-effect free and bitwise stable across checkpoint round trip") {
  const auto c = small_config();
  const auto d = small_dataset(c, small_corpus(60, 0.9));
  const auto dir = scratch("roundtrip");
  const auto r = train(c, inputs_for(d, d.valid), dir.string());
  const auto first = evaluate(r.best, d.test, c.k);
  CHECK(evaluate(r.best, d.test, c.k) == first);
  const auto loaded = model::load_checkpoint((dir / "best.ckpt").string());
  check_vocabulary(loaded, d.vocab);
  const auto again = evaluate(loaded, d.test, c.k);
  CHECK(again == first);
  CHECK(metrics::to_text(again) == metrics::to_text(first));
  const auto keys = metrics::report_keys();
  CHECK(keys == std::vector<std::string>{"macro_auc", "micro_auc", "macro_f1", "micro_f1", "p_at_k", "k"});

  preprocess::Vocabulary other = d.vocab;
  other.add("zzzextra");
  CHECK(kind_of([&] { check_vocabulary(loaded, other); }) == ErrorKind::artifact_incompatible);
}

TEST_CASE("attend: distributions per requested label") {
  const auto c = small_config();
  const auto corpus = small_corpus(60, 1.0);
  const auto d = small_dataset(c, corpus);
  const auto r = train(c, inputs_for(d, d.valid), "");
  const auto& doc = d.test.front();
  const auto rep = attend(r.final, doc, {corpus.label_names[0], corpus.label_names[1]});
  CHECK(rep.doc_id == doc.id);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.tokens.size() == doc.tokens.size());
  for (const auto& row : rep.rows) {
    CHECK(row.weights.size() == doc.tokens.size());
    CHECK(std::accumulate(row.weights.begin(), row.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(rep.rows[0].weights != rep.rows[1].weights);

  const auto tsv = attention_tsv(rep);
  CHECK(io::split(tsv, '\n').size() >= 1 + 2 * doc.tokens.size());
  const auto html = attention_html(rep);
  CHECK(html.find("<h2>" + corpus.label_names[1] + "</h2>") != std::string::npos);

  CHECK(kind_of([&] { attend(r.final, doc, {"NOPE"}); }) == ErrorKind::label_not_found);
}

TEST_CASE("intensity: monotone and normalized to the row maximum") {
  const std::vector<double> w = {0.7, 0.2, 0.1};
  CHECK(intensity(w[0], 0.7) == 1.0);
  CHECK(intensity(w[1], 0.7) < intensity(w[0], 0.7));
  CHECK(intensity(w[2], 0.7) < intensity(w[1], 0.7));
  CHECK(intensity(0.0, 0.7) == 0.0);
  CHECK(intensity(0.3, 0.0) == 0.0);
}

TEST_CASE("aggregate: mean and sample stdev per key") {
  metrics::MetricsReport a, b, e;
  a.micro_auc = 0.9;
  b.micro_auc = 0.8;
  e.micro_auc = 0.7;
  a.k = b.k = e.k = 5;
  const auto s = aggregate({a, b, e});
  CHECK(s.at("micro_auc").mean == doctest::Approx(0.8));
  CHECK(s.at("micro_auc").stdev == doctest::Approx(0.1));
  CHECK(s.at("micro_auc").n == 3);
  CHECK(s.at("k").stdev == 0.0);
  CHECK(s.size() == metrics::report_keys().size());
  const auto text = aggregate_text(s);
  for (const auto& key : metrics::report_keys()) CHECK(text.find(key + " = ") != std::string::npos);
  CHECK(text.find("\xC2\xB1") != std::string::npos);
  CHECK(aggregate(std::vector<metrics::MetricsReport>{a}).at("micro_auc").stdev == 0.0);
  CHECK(kind_of([] { aggregate({}); }) == ErrorKind::validation);
}

TEST_CASE("run_seeds: one directory per seed and a thread-count independent aggregate") {
  auto c = small_config();
  c.epochs = 2;
  c.seeds = {1, 2, 3};
  const auto d = small_dataset(c, small_corpus(60, 0.9));
  const auto dir = scratch("seeds");
  const auto serial = run_seeds(c, inputs_for(d, d.valid), d.test, (dir / "serial").string());
  c.threads = 3;
  const auto parallel = run_seeds(c, inputs_for(d, d.valid), d.test, (dir / "parallel").string());
  REQUIRE(serial.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(serial[i].seed == c.seeds[i]);
    CHECK(serial[i].test == parallel[i].test);
    CHECK(fs::exists(fs::path(serial[i].dir) / "best.ckpt"));
    CHECK(fs::exists(fs::path(serial[i].dir) / "test_report.json"));
  }
  CHECK(io::read_text((dir / "serial/aggregate.txt").string()) ==
        io::read_text((dir / "parallel/aggregate.txt").string()));
}
