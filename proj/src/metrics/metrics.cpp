#include "transicd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "transicd/error.hpp"
#include "transicd/io.hpp"

namespace transicd::metrics {

void ScoreMatrix::validate() const {
  if (docs == 0 || labels == 0) throw Error(ErrorKind::dimension, "score matrix is empty");
  if (scores.size() != docs * labels || truth.size() != docs * labels) {
    throw Error(ErrorKind::dimension, "score matrix " + std::to_string(docs) + "x" + std::to_string(labels) +
                                          " holds " + std::to_string(scores.size()) + " scores and " +
                                          std::to_string(truth.size()) + " truth entries");
  }
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::validation, "score " + io::format_double(s) + " outside [0, 1]");
  }
  for (auto t : truth) {
    if (t > 1) throw Error(ErrorKind::validation, "truth entries must be 0 or 1");
  }
}

double auc_binary(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) {
    throw Error(ErrorKind::dimension, "auc: " + std::to_string(scores.size()) + " scores vs " +
                                          std::to_string(truth.size()) + " labels");
  }
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (auto t : truth) pos += t ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorKind::undefined_auc, "AUC needs both a positive and a negative example");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of 1-based midranks of positives, kept doubled so it stays integral.
  std::uint64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      pos_in_group += truth[order[j]] ? 1 : 0;
      ++j;
    }
    // Ranks i+1..j; midrank*2 = i + 1 + j.
    twice_rank_sum += static_cast<std::uint64_t>(pos_in_group) * (i + 1 + j);
    i = j;
  }
  const double u = static_cast<double>(twice_rank_sum) / 2.0 - static_cast<double>(pos) * (pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

AucSummary macro_micro_auc(const ScoreMatrix& sm) {
  sm.validate();
  AucSummary out;
  std::vector<double> col(sm.docs);
  std::vector<std::uint8_t> tcol(sm.docs);
  double sum = 0.0;
  std::size_t computed = 0;
  for (std::size_t l = 0; l < sm.labels; ++l) {
    std::size_t pos = 0;
    for (std::size_t d = 0; d < sm.docs; ++d) {
      col[d] = sm.score(d, l);
      tcol[d] = sm.truth[d * sm.labels + l];
      pos += tcol[d];
    }
    if (pos == 0 || pos == sm.docs) {
      out.skipped.push_back(l);
      continue;
    }
    sum += auc_binary(col, tcol);
    ++computed;
  }
  if (computed == 0) throw Error(ErrorKind::no_computable_label, "every label has single-class truth; AUC undefined");
  out.macro = sum / static_cast<double>(computed);
  out.micro = auc_binary(sm.scores, sm.truth);
  return out;
}

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

F1Summary macro_micro_f1(const ScoreMatrix& sm, double threshold) {
  sm.validate();
  std::size_t TP = 0, FP = 0, FN = 0;
  double sum = 0.0;
  for (std::size_t l = 0; l < sm.labels; ++l) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t d = 0; d < sm.docs; ++d) {
      const bool pred = sm.score(d, l) >= threshold;
      const bool truth = sm.is_true(d, l);
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    sum += f1(tp, fp, fn);
    TP += tp;
    FP += fp;
    FN += fn;
  }
  return {sum / static_cast<double>(sm.labels), f1(TP, FP, FN)};
}

double precision_at_k(const ScoreMatrix& sm, std::size_t k) {
  sm.validate();
  if (k == 0 || k > sm.labels) {
    throw Error(ErrorKind::range, "P@k needs 1 <= k <= L; got k=" + std::to_string(k) + " with L=" +
                                      std::to_string(sm.labels));
  }
  std::vector<std::size_t> order(sm.labels);
  double total = 0.0;
  for (std::size_t d = 0; d < sm.docs; ++d) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double sa = sm.score(d, a), sb = sm.score(d, b);
                        return sa != sb ? sa > sb : a < b;
                      });
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += sm.is_true(d, order[i]);
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(sm.docs);
}

MetricsReport evaluate_scores(const ScoreMatrix& sm, std::size_t k) {
  MetricsReport r;
  const auto auc = macro_micro_auc(sm);
  const auto f = macro_micro_f1(sm);
  r.macro_auc = auc.macro;
  r.micro_auc = auc.micro;
  r.macro_f1 = f.macro;
  r.micro_f1 = f.micro;
  r.k = k;
  r.p_at_k = precision_at_k(sm, k);
  r.skipped_labels = auc.skipped;
  return r;
}

const std::vector<std::string>& report_keys() {
  static const std::vector<std::string> keys = {"macro_auc", "micro_auc", "macro_f1", "micro_f1", "p_at_k", "k"};
  return keys;
}

double report_value(const MetricsReport& r, const std::string& key) {
  if (key == "macro_auc") return r.macro_auc;
  if (key == "micro_auc") return r.micro_auc;
  if (key == "macro_f1") return r.macro_f1;
  if (key == "micro_f1") return r.micro_f1;
  if (key == "p_at_k") return r.p_at_k;
  if (key == "k") return static_cast<double>(r.k);
  throw Error(ErrorKind::validation, "unknown report key '" + key + "'");
}

std::string to_text(const MetricsReport& r) {
  std::string out;
  for (const auto& key : report_keys()) {
    out += key + " = ";
    out += key == "k" ? std::to_string(r.k) : io::format_double(report_value(r, key));
    out += '\n';
  }
  return out;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["macro_auc"] = r.macro_auc;
  j["micro_auc"] = r.micro_auc;
  j["macro_f1"] = r.macro_f1;
  j["micro_f1"] = r.micro_f1;
  j["p_at_k"] = r.p_at_k;
  j["k"] = r.k;
  return j.dump(2) + "\n";
}

MetricsReport from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.macro_auc = j.at("macro_auc").get<double>();
    r.micro_auc = j.at("micro_auc").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.micro_f1 = j.at("micro_f1").get<double>();
    r.p_at_k = j.at("p_at_k").get<double>();
    r.k = j.at("k").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad metrics report: ") + e.what());
  }
}

void write_report(const std::string& path_without_ext, const MetricsReport& r) {
  io::write_text(path_without_ext + ".txt", to_text(r));
  io::write_text(path_without_ext + ".json", to_json(r));
}

}  // namespace transicd::metrics
