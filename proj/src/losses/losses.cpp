#include "transicd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "transicd/error.hpp"
#include "transicd/io.hpp"
#include "transicd/ops.hpp"

namespace transicd::losses {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::dimension, std::string(what) + ": targets " + numerics::shape_string(a.shape()) +
                                          " vs predictions " + numerics::shape_string(b.shape()));
  }
}

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

}  // namespace

double bce(std::span<const double> y, std::span<const double> probs) {
  if (y.size() != probs.size()) {
    throw Error(ErrorKind::dimension, "bce: " + std::to_string(y.size()) + " targets vs " +
                                          std::to_string(probs.size()) + " probabilities");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    loss -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return loss;
}

Tensor bce_loss(const Tensor& targets, const Tensor& probs) {
  require_same_shape(targets, probs, "bce_loss");
  if (targets.empty()) throw Error(ErrorKind::dimension, "bce_loss: empty batch");
  const std::size_t rows = probs.rows();
  const std::size_t cols = probs.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    total += bce(targets.data().subspan(r * cols, cols), probs.data().subspan(r * cols, cols));
  }
  const double value = total / static_cast<double>(rows);
  numerics::Tape* tape = probs.tape();
  if (!tape) return Tensor::scalar(value);
  if (targets.on_tape()) throw Error(ErrorKind::validation, "bce_loss: targets must be constants");
  auto y = targets.storage();
  auto p = probs.storage();
  return tape->record({}, {value}, {probs}, [y, p, rows](std::span<const double> g, const numerics::GradSlots& grads) {
    const double scale = g[0] / static_cast<double>(rows);
    auto out = grads[0];
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double pi = (*p)[i];
      // The clamp is flat outside [eps, 1-eps].
      if (pi < kProbEps || pi > 1.0 - kProbEps) continue;
      const double yi = (*y)[i];
      out[i] += scale * (-yi / pi + (1.0 - yi) / (1.0 - pi));
    }
  });
}

std::vector<double> ldam_margins(std::span<const double> counts, double C) {
  if (!(C >= 0.0) || !std::isfinite(C)) throw Error(ErrorKind::validation, "LDAM constant C must be finite and >= 0");
  std::vector<double> margins(counts.size());
  for (std::size_t l = 0; l < counts.size(); ++l) {
    const double n = counts[l];
    if (!(n >= 0.0) || !std::isfinite(n)) {
      throw Error(ErrorKind::validation, "label " + std::to_string(l) + " has invalid count " + io::format_double(n));
    }
    // sqrt is correctly rounded, so exact fourth powers give exact roots.
    margins[l] = C / std::sqrt(std::sqrt(std::max(n, 1.0)));
  }
  return margins;
}

Tensor ldam_loss(const Tensor& targets, const Tensor& logits, std::span<const double> margins, double scale) {
  require_same_shape(targets, logits, "ldam_loss");
  if (logits.empty()) throw Error(ErrorKind::dimension, "ldam_loss: empty batch");
  const std::size_t cols = logits.cols();
  if (margins.size() != cols) {
    throw Error(ErrorKind::dimension, "ldam_loss: " + std::to_string(margins.size()) + " margins for " +
                                          std::to_string(cols) + " labels");
  }
  if (targets.on_tape()) throw Error(ErrorKind::validation, "ldam_loss: targets must be constants");
  std::vector<double> shift(targets.size());
  for (std::size_t i = 0; i < shift.size(); ++i) shift[i] = margins[i % cols] * targets[i];
  Tensor z = numerics::sub(logits, Tensor(logits.shape(), std::move(shift)));
  if (scale != 1.0) z = numerics::scale(z, scale);
  return bce_loss(targets, numerics::sigmoid(z));
}

LabelStats LabelStats::from_label_sets(std::span<const std::vector<std::size_t>> label_sets, std::size_t num_labels,
                                       double C) {
  LabelStats stats;
  stats.C = C;
  stats.counts.assign(num_labels, 0.0);
  for (const auto& set : label_sets) {
    for (auto l : set) {
      if (l >= num_labels) {
        throw Error(ErrorKind::index, "label index " + std::to_string(l) + " out of range for " +
                                          std::to_string(num_labels) + " labels");
      }
      stats.counts[l] += 1.0;
    }
  }
  stats.margins = ldam_margins(stats.counts, C);
  return stats;
}

void LabelStats::save(const std::string& path) const {
  auto out = io::open_out(path);
  for (std::size_t l = 0; l < counts.size(); ++l) {
    out << l << '\t' << static_cast<long long>(counts[l]) << '\t' << io::format_double(margins[l]) << '\n';
  }
  io::finish(out, path);
}

LabelStats LabelStats::load(const std::string& path, double C) {
  std::vector<double> counts;
  std::size_t lineno = 0;
  for (const auto& line : io::split(io::read_text(path), '\n')) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    const auto fields = io::split(line, '\t');
    std::istringstream is(fields.size() == 3 ? fields[0] + " " + fields[1] : std::string());
    std::size_t index = 0;
    long long count = 0;
    if (!(is >> index >> count) || index != counts.size() || count < 0) {
      throw Error(ErrorKind::format, path + ":" + std::to_string(lineno) + ": expected label_index\\tcount\\tmargin");
    }
    counts.push_back(static_cast<double>(count));
  }
  LabelStats stats;
  stats.C = C;
  stats.counts = std::move(counts);
  stats.margins = ldam_margins(stats.counts, C);
  return stats;
}

}  // namespace transicd::losses
