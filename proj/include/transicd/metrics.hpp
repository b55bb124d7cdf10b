#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace transicd::metrics {

// docs x labels, row-major. Scores in [0, 1]; truth entries 0 or 1.
struct ScoreMatrix {
  std::size_t docs = 0;
  std::size_t labels = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> truth;

  double score(std::size_t d, std::size_t l) const { return scores[d * labels + l]; }
  bool is_true(std::size_t d, std::size_t l) const { return truth[d * labels + l] != 0; }

  // Throws on shape mismatch, empty matrix or out-of-range entries.
  void validate() const;
};

// Mann-Whitney with midranks: P(pos > neg) + P(pos == neg) / 2.
double auc_binary(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct AucSummary {
  double macro = 0.0;
  double micro = 0.0;
  std::vector<std::size_t> skipped;  // single-class labels
};
AucSummary macro_micro_auc(const ScoreMatrix& sm);

struct F1Summary {
  double macro = 0.0;
  double micro = 0.0;
};
inline constexpr double kThreshold = 0.5;
F1Summary macro_micro_f1(const ScoreMatrix& sm, double threshold = kThreshold);
double f1(std::size_t tp, std::size_t fp, std::size_t fn);

// Mean over documents of hits / k; ties at equal score go to the lower label index.
double precision_at_k(const ScoreMatrix& sm, std::size_t k);

struct MetricsReport {
  double macro_auc = 0.0;
  double micro_auc = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  double p_at_k = 0.0;
  std::size_t k = 5;
  std::vector<std::size_t> skipped_labels;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport evaluate_scores(const ScoreMatrix& sm, std::size_t k);

// Report keys, in output order.
const std::vector<std::string>& report_keys();
double report_value(const MetricsReport& r, const std::string& key);

// `key = value` lines with exactly the report keys.
std::string to_text(const MetricsReport& r);
std::string to_json(const MetricsReport& r);
MetricsReport from_json(const std::string& text);
void write_report(const std::string& path_without_ext, const MetricsReport& r);

}  // namespace transicd::metrics
