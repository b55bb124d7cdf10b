#include <algorithm>
#include <filesystem>
#include <limits>

#include "transicd/error.hpp"
#include "transicd/harness.hpp"
#include "transicd/io.hpp"

namespace transicd::harness {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorKind::config, "config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    bad_value(key, v, "a non-negative integer");
  }
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    bad_value(key, v, "a non-negative integer");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x)) bad_value(key, v, "a finite number");
  return x;
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::string show(bool b) { return b ? "true" : "false"; }
std::string show(std::size_t n) { return std::to_string(n); }
std::string show(double x) { return io::format_double(x); }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field count_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_count(k, v); },
          [member](const RunConfig& c) { return show(member(const_cast<RunConfig&>(c))); }};
}
template <typename Member>
Field real_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_real(k, v); },
          [member](const RunConfig& c) { return show(member(const_cast<RunConfig&>(c))); }};
}
template <typename Member>
Field flag_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_flag(k, v); },
          [member](const RunConfig& c) { return show(member(const_cast<RunConfig&>(c))); }};
}
template <typename Member>
Field text_field(Member member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; },
          [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); }};
}

// Ordered so to_text() groups related keys.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"layers", count_field([](RunConfig& c) -> auto& { return c.model.encoder.layers; })},
      {"heads", count_field([](RunConfig& c) -> auto& { return c.model.encoder.heads; })},
      {"d_e", count_field([](RunConfig& c) -> auto& { return c.model.encoder.d_model; })},
      {"d_ff", count_field([](RunConfig& c) -> auto& { return c.model.encoder.d_ff; })},
      {"d_attn", count_field([](RunConfig& c) -> auto& { return c.model.d_attn; })},
      {"dropout", real_field([](RunConfig& c) -> auto& { return c.model.encoder.dropout; })},
      {"max_len", count_field([](RunConfig& c) -> auto& { return c.model.encoder.max_len; })},
      {"positional", flag_field([](RunConfig& c) -> auto& { return c.model.encoder.positional; })},
      {"mask_pad", flag_field([](RunConfig& c) -> auto& { return c.model.encoder.mask_pad; })},
      {"shared_head", flag_field([](RunConfig& c) -> auto& { return c.model.shared_head; })},
      {"lr", real_field([](RunConfig& c) -> auto& { return c.lr; })},
      {"epochs", count_field([](RunConfig& c) -> auto& { return c.epochs; })},
      {"batch_size", count_field([](RunConfig& c) -> auto& { return c.batch_size; })},
      {"loss", text_field([](RunConfig& c) -> auto& { return c.loss; })},
      {"C", real_field([](RunConfig& c) -> auto& { return c.C; })},
      {"ldam_scale", real_field([](RunConfig& c) -> auto& { return c.ldam_scale; })},
      {"fine_tune_embeddings", flag_field([](RunConfig& c) -> auto& { return c.fine_tune_embeddings; })},
      {"k", count_field([](RunConfig& c) -> auto& { return c.k; })},
      {"seed", {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_count(k, v); },
                [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"seeds",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.seeds.clear();
          for (const auto& part : io::split(v, ',')) c.seeds.push_back(parse_count(k, std::string(io::trim(part))));
        },
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
          return s;
        }}},
      {"threads", count_field([](RunConfig& c) -> auto& { return c.threads; })},
      {"cbow_window", count_field([](RunConfig& c) -> auto& { return c.cbow.window; })},
      {"cbow_negatives", count_field([](RunConfig& c) -> auto& { return c.cbow.negatives; })},
      {"cbow_epochs", count_field([](RunConfig& c) -> auto& { return c.cbow.epochs; })},
      {"cbow_lr", real_field([](RunConfig& c) -> auto& { return c.cbow.lr; })},
      {"cbow_all_splits", flag_field([](RunConfig& c) -> auto& { return c.cbow_all_splits; })},
      {"min_token_length", count_field([](RunConfig& c) -> auto& { return c.min_token_length; })},
      {"stopwords", text_field([](RunConfig& c) -> auto& { return c.stopwords; })},
      {"train", text_field([](RunConfig& c) -> auto& { return c.train_path; })},
      {"valid", text_field([](RunConfig& c) -> auto& { return c.valid_path; })},
      {"test", text_field([](RunConfig& c) -> auto& { return c.test_path; })},
      {"labels", text_field([](RunConfig& c) -> auto& { return c.labels_path; })},
      {"vocab", text_field([](RunConfig& c) -> auto& { return c.vocab_path; })},
      {"embeddings", text_field([](RunConfig& c) -> auto& { return c.embeddings_path; })},
      {"out_dir", text_field([](RunConfig& c) -> auto& { return c.out_dir; })},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw Error(ErrorKind::config, "unknown config key '" + key + "'");
}

}  // namespace

model::ModelConfig RunConfig::default_model() {
  model::ModelConfig m;
  m.encoder.layers = 2;
  m.encoder.heads = 8;
  m.encoder.d_model = 128;
  m.encoder.dropout = 0.1;
  m.encoder.max_len = 2500;
  return m;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, value); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

void RunConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::config, what);
  };
  auto m = model;
  m.num_labels = std::max<std::size_t>(m.num_labels, 1);
  m.validate();
  check(lr > 0.0, "lr must be positive");
  check(epochs >= 1, "epochs must be at least 1");
  check(batch_size >= 1, "batch_size must be at least 1");
  check(loss == "bce" || loss == "ldam", "loss must be bce or ldam, got '" + loss + "'");
  check(C >= 0.0, "C must be >= 0");
  check(ldam_scale > 0.0, "ldam_scale must be positive");
  check(k >= 1, "k must be at least 1");
  check(!seeds.empty(), "seeds must list at least one seed");
  check(threads >= 1, "threads must be at least 1");
  check(cbow.window >= 1, "cbow_window must be at least 1");
  check(cbow.negatives >= 1, "cbow_negatives must be at least 1");
  check(cbow.epochs >= 1, "cbow_epochs must be at least 1");
  check(cbow.lr > 0.0, "cbow_lr must be positive");
  check(min_token_length >= 1, "min_token_length must be at least 1");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

preprocess::PrepConfig RunConfig::prep_config() const {
  preprocess::PrepConfig p;
  p.min_token_length = min_token_length;
  p.max_len = model.encoder.max_len;
  if (!stopwords.empty()) p.stopwords = std::make_shared<preprocess::StopwordSet>(preprocess::load_stopwords(stopwords));
  return p;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::size_t lineno = 0;
  for (const auto& raw : io::split(text, '\n')) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::config, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    base.set(std::string(io::trim(line.substr(0, eq))), std::string(io::trim(line.substr(eq + 1))));
  }
  return base;
}

RunConfig load_config(const std::string& path) {
  auto config = parse_config(io::read_text(path));
  // Relative paths inside a config file resolve against its directory.
  const auto dir = std::filesystem::path(path).parent_path();
  for (auto* p : {&config.train_path, &config.valid_path, &config.test_path, &config.labels_path, &config.vocab_path,
                  &config.embeddings_path, &config.stopwords}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (dir / *p).lexically_normal().string();
  }
  return config;
}

}  // namespace transicd::harness
