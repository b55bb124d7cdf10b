#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "transicd/error.hpp"
#include "transicd/harness.hpp"
#include "transicd/io.hpp"
#include "transicd/kernels.hpp"
#include "transicd/synth.hpp"

namespace fs = std::filesystem;
using namespace transicd;
using harness::RunConfig;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

// One JSON object per line on stderr so scripts can parse failures.
void error_line(std::string_view kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

// --config FILE, --set key=value (repeatable) and one --<key> flag per config
// key. Precedence: defaults < file < --set < --<key>.
struct ConfigOptions {
  std::string path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;

  void attach(CLI::App* app) {
    app->add_option("--config", path, "flat key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override one config key (key=value), repeatable");
    for (const auto& key : RunConfig::keys()) {
      app->add_option_function<std::string>(
             "--" + key, [this, key](const std::string& v) { flags[key] = v; }, "config key " + key)
          ->group("Config keys");
    }
  }

  RunConfig resolve() const {
    RunConfig c = path.empty() ? RunConfig{} : harness::load_config(path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::config, "--set expects key=value, got '" + kv + "'");
      c.set(std::string(io::trim(kv.substr(0, eq))), std::string(io::trim(kv.substr(eq + 1))));
    }
    for (const auto& [k, v] : flags) c.set(k, v);
    c.validate();
    return c;
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir + ": " + ec.message());
}

std::string sibling(const std::string& file, const std::string& name) {
  return (fs::path(file).parent_path() / name).string();
}

void print_progress(std::uint64_t seed, const harness::EpochRecord& r) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::fprintf(stderr, "seed %llu epoch %zu loss %.6f valid_micro_auc %.4f valid_micro_f1 %.4f (%.1fs)\n",
               static_cast<unsigned long long>(seed), r.epoch, r.train_loss, r.valid.micro_auc, r.valid.micro_f1,
               r.wall_seconds);
}

// Vocabulary for a checkpoint: explicit path, config key, or vocab.txt beside it.
preprocess::Vocabulary checkpoint_vocab(const std::string& explicit_path, const RunConfig& c,
                                        const std::string& ckpt_path) {
  const std::string path = !explicit_path.empty() ? explicit_path
                           : !c.vocab_path.empty() ? c.vocab_path
                                                   : sibling(ckpt_path, "vocab.txt");
  return preprocess::Vocabulary::load(path);
}

std::vector<preprocess::Document> checkpoint_split(const model::Checkpoint& ckpt, const preprocess::Vocabulary& vocab,
                                                   const RunConfig& c, const std::string& path) {
  auto prep = c.prep_config();
  prep.max_len = ckpt.config.encoder.max_len;
  return harness::load_split(path, vocab, preprocess::LabelSet(ckpt.label_names), prep);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-attention transformer for multi-label clinical code assignment"};
  app.require_subcommand(1);
  std::string isa = "auto";
  app.add_option("--isa", isa, "kernel set: auto, scalar, avx2, neon");

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "write a long-tailed synthetic corpus");
  synth::SynthSpec spec;
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--docs", spec.num_docs, "number of documents");
  gen->add_option("--labels", spec.num_labels, "number of labels");
  gen->add_option("--noise-vocab", spec.vocab_noise_size, "noise vocabulary size");
  gen->add_option("--len-min", spec.doc_len_min, "minimum noise words per document");
  gen->add_option("--len-max", spec.doc_len_max, "maximum noise words per document");
  gen->add_option("--decay", spec.tail_decay, "label frequency decay gamma");
  gen->add_option("--strength", spec.trigger_strength, "trigger insertion probability");
  gen->add_option("--head-rate", spec.head_rate, "frequency of the most common label");
  gen->add_option("--seed", spec.seed, "generator seed");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "tokenize splits and build the training vocabulary");
  ConfigOptions prep_cfg;
  prep_cfg.attach(prep);
  std::string prep_out;
  prep->add_option("--out", prep_out, "output directory")->required();

  // embed
  auto* emb = app.add_subcommand("embed", "train CBOW word embeddings on the training split");
  ConfigOptions emb_cfg;
  emb_cfg.attach(emb);
  std::string emb_out;
  emb->add_option("--out", emb_out, "embedding file")->required();

  // train
  auto* tr = app.add_subcommand("train", "train a model (one seed, or every seed with --all-seeds)");
  ConfigOptions tr_cfg;
  tr_cfg.attach(tr);
  bool all_seeds = false;
  bool quiet = false;
  tr->add_flag("--all-seeds", all_seeds, "train one model per entry of `seeds` and aggregate test metrics");
  tr->add_flag("--quiet", quiet, "no per-epoch progress on stderr");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score a checkpoint on a corpus split");
  ConfigOptions ev_cfg;
  ev_cfg.attach(ev);
  std::string ev_ckpt, ev_split, ev_vocab, ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--split", ev_split, "corpus file (default: config key test)");
  ev->add_option("--vocabulary", ev_vocab, "vocabulary file (default: vocab key, then vocab.txt beside the checkpoint)");
  ev->add_option("--out", ev_out, "write <out>.txt and <out>.json");

  // attend
  auto* at = app.add_subcommand("attend", "per-token label attention for one document");
  ConfigOptions at_cfg;
  at_cfg.attach(at);
  std::string at_ckpt, at_split, at_vocab, at_doc, at_out;
  std::vector<std::string> at_labels;
  at->add_option("--checkpoint", at_ckpt, "checkpoint file")->required();
  at->add_option("--split", at_split, "corpus file holding the document (default: config key test)");
  at->add_option("--vocabulary", at_vocab, "vocabulary file (default: vocab key, then vocab.txt beside the checkpoint)");
  at->add_option("--doc", at_doc, "document id (default: first document)");
  at->add_option("--label", at_labels, "label to show, repeatable (default: the document's true labels)");
  at->add_option("--out", at_out, "write <out>.tsv and <out>.html (default: attention_<doc>)");

  // report
  auto* rep = app.add_subcommand("report", "mean and sample stdev of test metrics across seed runs");
  std::string runs_dir;
  rep->add_option("--runs", runs_dir, "directory holding seed_<s>/test_report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_line("usage", e.what());
    return kExitUsage;
  }

  try {
    kernels::select(isa == "auto" ? kernels::best_available() : kernels::parse_isa(isa));

    if (gen->parsed()) {
      const auto corpus = synth::generate(spec);
      synth::write(gen_out, corpus);
      std::printf("train %zu valid %zu test %zu labels %zu -> %s\n", corpus.train.size(), corpus.valid.size(),
                  corpus.test.size(), corpus.label_names.size(), gen_out.c_str());
    } else if (prep->parsed()) {
      const auto c = prep_cfg.resolve();
      if (c.train_path.empty()) throw Error(ErrorKind::config, "config key 'train' is required");
      const auto p = c.prep_config();
      ensure_dir(prep_out);
      std::map<std::string, std::vector<preprocess::CorpusRecord>> splits;
      for (const auto& [name, path] : {std::pair{"train", c.train_path}, {"valid", c.valid_path}, {"test", c.test_path}}) {
        if (!path.empty()) splits[name] = preprocess::read_corpus(path);
      }
      const auto labels = c.labels_path.empty()
                              ? preprocess::collect_labels({splits["train"], splits["valid"], splits["test"]})
                              : preprocess::LabelSet::load(c.labels_path);
      std::string data_cfg;
      preprocess::Vocabulary vocab;
      for (const auto& [name, records] : splits) {
        const auto streams = preprocess::tokenize_records(records, p);
        if (std::string(name) == "train") vocab = preprocess::build_vocab(streams);
        std::vector<preprocess::CorpusRecord> out;
        for (std::size_t i = 0; i < records.size(); ++i) {
          for (const auto& l : records[i].labels) labels.index_of(l);
          out.push_back({records[i].id, records[i].labels, preprocess::join(streams[i])});
        }
        preprocess::write_corpus((fs::path(prep_out) / (name + ".tok.tsv")).string(), out);
        data_cfg += name + " = " + name + ".tok.tsv\n";
      }
      vocab.save((fs::path(prep_out) / "vocab.txt").string());
      labels.save((fs::path(prep_out) / "labels.txt").string());
      data_cfg += "vocab = vocab.txt\nlabels = labels.txt\n";
      io::write_text((fs::path(prep_out) / "data.cfg").string(), data_cfg);
      std::printf("vocab %zu (checksum %s) labels %zu -> %s\n", vocab.size(), vocab.checksum_hex().c_str(),
                  labels.size(), prep_out.c_str());
    } else if (emb->parsed()) {
      const auto c = emb_cfg.resolve();
      const auto data = harness::load_dataset(c);
      const auto e = harness::embed(c, data);
      if (const auto dir = fs::path(emb_out).parent_path(); !dir.empty()) ensure_dir(dir.string());
      embeddings::save(emb_out, e, data.vocab.checksum_hex());
      if (c.vocab_path.empty()) data.vocab.save(sibling(emb_out, "vocab.txt"));
      std::printf("embeddings %zu x %zu (vocab %s) -> %s\n", e.vocab_size, e.dim, data.vocab.checksum_hex().c_str(),
                  emb_out.c_str());
    } else if (tr->parsed()) {
      const auto c = tr_cfg.resolve();
      const auto data = harness::load_dataset(c);
      ensure_dir(c.out_dir);
      data.vocab.save((fs::path(c.out_dir) / "vocab.txt").string());
      data.labels.save((fs::path(c.out_dir) / "labels.txt").string());
      std::optional<embeddings::EmbeddingMatrix> e;
      if (!c.embeddings_path.empty()) {
        e = embeddings::load(c.embeddings_path, data.vocab.checksum_hex());
      } else {
        e = harness::embed(c, data);
        embeddings::save((fs::path(c.out_dir) / "embeddings.emb").string(), *e, data.vocab.checksum_hex());
      }
      harness::TrainInputs in{&data.train, &data.valid, &data.vocab, &data.labels, &*e, {}};
      if (!quiet) in.progress = print_progress;
      if (all_seeds) {
        if (data.test.empty()) throw Error(ErrorKind::config, "--all-seeds needs the test split (config key test)");
        harness::run_seeds(c, in, data.test, c.out_dir);
        std::fputs(io::read_text((fs::path(c.out_dir) / "aggregate.txt").string()).c_str(), stdout);
      } else {
        const auto result = harness::train(c, in, c.out_dir);
        std::printf("best epoch %zu valid micro_auc %s\n", result.best_epoch,
                    io::format_double(result.history[result.best_epoch - 1].valid.micro_auc).c_str());
        if (!data.test.empty()) {
          const auto report = harness::evaluate(result.best, data.test, c.k);
          metrics::write_report((fs::path(c.out_dir) / "test_report").string(), report);
          std::fputs(metrics::to_text(report).c_str(), stdout);
        }
      }
    } else if (ev->parsed()) {
      const auto c = ev_cfg.resolve();
      const auto ckpt = model::load_checkpoint(ev_ckpt);
      const auto vocab = checkpoint_vocab(ev_vocab, c, ev_ckpt);
      harness::check_vocabulary(ckpt, vocab);
      const std::string split = ev_split.empty() ? c.test_path : ev_split;
      if (split.empty()) throw Error(ErrorKind::config, "no split given (--split or config key test)");
      const auto docs = checkpoint_split(ckpt, vocab, c, split);
      const auto report = harness::evaluate(ckpt, docs, c.k);
      if (!ev_out.empty()) metrics::write_report(ev_out, report);
      std::fputs(metrics::to_text(report).c_str(), stdout);
    } else if (at->parsed()) {
      const auto c = at_cfg.resolve();
      const auto ckpt = model::load_checkpoint(at_ckpt);
      const auto vocab = checkpoint_vocab(at_vocab, c, at_ckpt);
      harness::check_vocabulary(ckpt, vocab);
      const std::string split = at_split.empty() ? c.test_path : at_split;
      if (split.empty()) throw Error(ErrorKind::config, "no split given (--split or config key test)");
      const auto docs = checkpoint_split(ckpt, vocab, c, split);
      if (docs.empty()) throw Error(ErrorKind::empty_corpus, split + " has no documents");
      const preprocess::Document* doc = &docs.front();
      if (!at_doc.empty()) {
        doc = nullptr;
        for (const auto& d : docs) {
          if (d.id == at_doc) doc = &d;
        }
        if (!doc) throw Error(ErrorKind::validation, "document '" + at_doc + "' not found in " + split);
      }
      auto labels = at_labels;
      if (labels.empty()) {
        for (auto l : doc->labels) labels.push_back(ckpt.label_names.at(l));
      }
      if (labels.empty()) throw Error(ErrorKind::validation, "document " + doc->id + " has no labels; pass --label");
      const auto report = harness::attend(ckpt, *doc, labels);
      const std::string prefix = at_out.empty() ? "attention_" + doc->id : at_out;
      io::write_text(prefix + ".tsv", harness::attention_tsv(report));
      io::write_text(prefix + ".html", harness::attention_html(report));
      std::printf("%s: %zu tokens, %zu labels -> %s.tsv, %s.html\n", doc->id.c_str(), report.tokens.size(),
                  report.rows.size(), prefix.c_str(), prefix.c_str());
    } else if (rep->parsed()) {
      const auto summary = harness::aggregate(harness::load_seed_reports(runs_dir));
      io::write_text((fs::path(runs_dir) / "aggregate.txt").string(), harness::aggregate_text(summary));
      io::write_text((fs::path(runs_dir) / "aggregate.json").string(), harness::aggregate_json(summary));
      std::fputs(harness::aggregate_text(summary).c_str(), stdout);
    }
  } catch (const Error& e) {
    error_line(to_string(e.kind()), e.what());
    return kExitError;
  } catch (const std::exception& e) {
    error_line("internal", e.what());
    return kExitInternal;
  }
  return 0;
}
