#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "transicd/error.hpp"
#include "transicd/harness.hpp"
#include "transicd/io.hpp"

namespace transicd::harness {

namespace fs = std::filesystem;

AttentionReport attend(const model::Checkpoint& ckpt, const Document& doc, const std::vector<std::string>& labels) {
  if (doc.tokens.empty()) throw Error(ErrorKind::degenerate_mask, "document " + doc.id + " has no tokens");
  const preprocess::LabelSet names(ckpt.label_names);
  std::vector<std::size_t> wanted;
  for (const auto& l : labels) wanted.push_back(names.index_of(l));

  const std::vector<std::vector<std::size_t>> rows = {doc.tokens};
  const auto out = model::forward(model::Batch::pad(rows), ckpt.params, ckpt.config, nullptr);
  const std::size_t n = doc.tokens.size();
  AttentionReport report;
  report.doc_id = doc.id;
  report.tokens = doc.raw_tokens;
  report.tokens.resize(n);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto a = out.attention.data().subspan(wanted[i] * n, n);
    report.rows.push_back({labels[i], std::vector<double>(a.begin(), a.end())});
  }
  return report;
}

double intensity(double weight, double row_max) {
  if (!(row_max > 0.0)) return 0.0;
  return std::clamp(weight / row_max, 0.0, 1.0);
}

std::string attention_tsv(const AttentionReport& report) {
  std::string out = "label\tposition\ttoken\tweight\n";
  for (const auto& row : report.rows) {
    for (std::size_t j = 0; j < row.weights.size(); ++j) {
      out += row.label + "\t" + std::to_string(j) + "\t" + report.tokens[j] + "\t" + io::format_double(row.weights[j]) +
             "\n";
    }
  }
  return out;
}

namespace {

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string attention_html(const AttentionReport& report) {
  std::string out =
      "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>attention " + html_escape(report.doc_id) +
      "</title>\n<style>body{font-family:monospace;line-height:1.8}span{padding:1px 2px}</style></head><body>\n";
  out += "<h1>" + html_escape(report.doc_id) + "</h1>\n";
  for (const auto& row : report.rows) {
    const double peak = row.weights.empty() ? 0.0 : *std::max_element(row.weights.begin(), row.weights.end());
    out += "<h2>" + html_escape(row.label) + "</h2>\n<p>";
    for (std::size_t j = 0; j < row.weights.size(); ++j) {
      char alpha[32];
      std::snprintf(alpha, sizeof alpha, "%.4f", intensity(row.weights[j], peak));
      out += "<span title=\"" + io::format_double(row.weights[j]) + "\" style=\"background:rgba(220,30,30," + alpha +
             ")\">" + html_escape(report.tokens[j]) + "</span> ";
    }
    out += "</p>\n";
  }
  out += "</body></html>\n";
  return out;
}

std::map<std::string, MetricSummary> aggregate(const std::vector<metrics::MetricsReport>& reports) {
  if (reports.empty()) throw Error(ErrorKind::validation, "nothing to aggregate");
  std::map<std::string, MetricSummary> out;
  for (const auto& key : metrics::report_keys()) {
    MetricSummary s;
    s.n = reports.size();
    for (const auto& r : reports) s.mean += metrics::report_value(r, key);
    s.mean /= static_cast<double>(s.n);
    if (s.n > 1) {
      double ss = 0.0;
      for (const auto& r : reports) {
        const double d = metrics::report_value(r, key) - s.mean;
        ss += d * d;
      }
      s.stdev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    out[key] = s;
  }
  return out;
}

std::string aggregate_text(const std::map<std::string, MetricSummary>& summary) {
  std::string out;
  for (const auto& key : metrics::report_keys()) {
    const auto it = summary.find(key);
    if (it == summary.end()) continue;
    out += key + " = " + io::format_double(it->second.mean) + " \xC2\xB1 " + io::format_double(it->second.stdev) + "\n";
  }
  if (!summary.empty()) out += "runs = " + std::to_string(summary.begin()->second.n) + "\n";
  return out;
}

std::string aggregate_json(const std::map<std::string, MetricSummary>& summary) {
  nlohmann::ordered_json j;
  for (const auto& key : metrics::report_keys()) {
    const auto it = summary.find(key);
    if (it == summary.end()) continue;
    j[key] = {{"mean", it->second.mean}, {"stdev", it->second.stdev}, {"n", it->second.n}};
  }
  return j.dump(2) + "\n";
}

std::vector<SeedRun> run_seeds(const RunConfig& config, const TrainInputs& inputs, const std::vector<Document>& test,
                               const std::string& out_dir) {
  config.validate();
  std::vector<SeedRun> runs(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= runs.size()) return;
        i = next++;
      }
      try {
        RunConfig c = config;
        c.seed = config.seeds[i];
        const std::string dir = (fs::path(out_dir) / ("seed_" + std::to_string(c.seed))).string();
        const auto result = train(c, inputs, dir);
        runs[i].seed = c.seed;
        runs[i].dir = dir;
        runs[i].test = evaluate(result.best, test, c.k);
        metrics::write_report((fs::path(dir) / "test_report").string(), runs[i].test);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(config.threads, runs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<metrics::MetricsReport> reports;
  for (const auto& r : runs) reports.push_back(r.test);
  const auto summary = aggregate(reports);
  io::write_text((fs::path(out_dir) / "aggregate.txt").string(), aggregate_text(summary));
  io::write_text((fs::path(out_dir) / "aggregate.json").string(), aggregate_json(summary));
  return runs;
}

std::vector<metrics::MetricsReport> load_seed_reports(const std::string& runs_dir) {
  if (!fs::is_directory(runs_dir)) throw Error(ErrorKind::io, "not a directory: " + runs_dir);
  std::vector<std::pair<std::uint64_t, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("seed_", 0) != 0) continue;
    const auto digits = name.substr(5);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      continue;
    }
    const auto report = entry.path() / "test_report.json";
    if (fs::exists(report)) found.emplace_back(std::stoull(digits), report);
  }
  if (found.empty()) throw Error(ErrorKind::empty_corpus, "no seed_<s>/test_report.json under " + runs_dir);
  std::sort(found.begin(), found.end());
  std::vector<metrics::MetricsReport> out;
  for (const auto& [seed, path] : found) out.push_back(metrics::from_json(io::read_text(path.string())));
  return out;
}

}  // namespace transicd::harness
