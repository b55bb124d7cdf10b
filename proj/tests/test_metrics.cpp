#include <doctest.h>

#include <cmath>

#include "support/errors.hpp"
#include "support/metric_oracles.hpp"
#include "transicd/metrics.hpp"

using namespace transicd;
using namespace transicd::metrics;
using transicd::testing::kind_of;

namespace {

ScoreMatrix make(std::size_t docs, std::size_t labels, std::vector<double> s, std::vector<std::uint8_t> t) {
  return ScoreMatrix{docs, labels, std::move(s), std::move(t)};
}

}  // namespace

TEST_CASE("auc_binary examples") {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<std::uint8_t> t = {0, 0, 1, 1};
  CHECK(auc_binary(s, t) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(auc_binary(std::vector<double>{0.1, 0.2, 0.8, 0.9}, t) == 1.0);
  CHECK(auc_binary(std::vector<double>{0.3, 0.3, 0.3, 0.3}, t) == 0.5);
  CHECK(kind_of([&] { auc_binary(s, std::vector<std::uint8_t>{1, 1, 1, 1}); }) == ErrorKind::undefined_auc);
  CHECK(kind_of([&] { auc_binary(s, std::vector<std::uint8_t>{1, 0}); }) == ErrorKind::dimension);
}

TEST_CASE("AUC is invariant under increasing transforms") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto sm = transicd::testing::random_score_matrix(rng);
    auto cubed = sm;
    for (auto& x : cubed.scores) x = x * x * x;
    CHECK(auc_binary(sm.scores, sm.truth) == auc_binary(cubed.scores, cubed.truth));
  }
}

TEST_CASE("macro_micro_auc") {
  // Label 0 perfectly ranked (1.0), label 1 all ties (0.5).
  const auto sm = make(2, 2, {0.9, 0.5, 0.1, 0.5}, {1, 1, 0, 0});
  const auto r = macro_micro_auc(sm);
  CHECK(r.macro == 0.75);
  CHECK(r.skipped.empty());

  const auto skip = make(2, 2, {0.9, 0.5, 0.1, 0.5}, {1, 0, 0, 0});
  const auto r2 = macro_micro_auc(skip);
  CHECK(r2.skipped == std::vector<std::size_t>{1});
  CHECK(r2.macro == 1.0);

  CHECK(kind_of([] { macro_micro_auc(make(2, 1, {0.2, 0.3}, {1, 1})); }) == ErrorKind::no_computable_label);
}

TEST_CASE("macro_micro_f1") {
  const auto perfect = make(2, 2, {0.9, 0.1, 0.2, 0.7}, {1, 0, 0, 1});
  const auto p = macro_micro_f1(perfect);
  CHECK(p.macro == 1.0);
  CHECK(p.micro == 1.0);

  // TP=1 FP=1 FN=1.
  const auto one = make(3, 1, {0.9, 0.8, 0.1}, {1, 0, 1});
  CHECK(macro_micro_f1(one).macro == 0.5);
  CHECK(macro_micro_f1(one).micro == 0.5);

  // Label 1 has no true and no predicted positives.
  const auto empty = make(2, 2, {0.9, 0.1, 0.2, 0.2}, {1, 0, 0, 0});
  CHECK(macro_micro_f1(empty).macro == 0.5);

  // Threshold tie is positive.
  CHECK(macro_micro_f1(make(1, 1, {0.5}, {1})).micro == 1.0);
}

TEST_CASE("precision_at_k") {
  const auto sm = make(1, 6, {0.9, 0.8, 0.1, 0.7, 0.6, 0.5}, {1, 0, 0, 1, 1, 0});
  CHECK(precision_at_k(sm, 5) == doctest::Approx(0.6).epsilon(1e-15));
  const auto exact = make(1, 3, {0.9, 0.8, 0.1}, {1, 1, 0});
  CHECK(precision_at_k(exact, 2) == 1.0);
  const auto none = make(1, 3, {0.9, 0.8, 0.1}, {0, 0, 0});
  CHECK(precision_at_k(none, 2) == 0.0);
  // Ties at the cutoff go to the lower label index.
  const auto ties = make(1, 3, {0.5, 0.5, 0.5}, {0, 0, 1});
  CHECK(precision_at_k(ties, 2) == 0.0);
  CHECK(kind_of([&] { precision_at_k(sm, 7); }) == ErrorKind::range);
}

TEST_CASE("P@k is invariant under document order") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto sm = transicd::testing::random_score_matrix(rng);
    std::vector<std::size_t> perm(sm.docs);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    auto shuffled = sm;
    for (std::size_t d = 0; d < sm.docs; ++d) {
      for (std::size_t l = 0; l < sm.labels; ++l) {
        shuffled.scores[d * sm.labels + l] = sm.score(perm[d], l);
        shuffled.truth[d * sm.labels + l] = sm.truth[perm[d] * sm.labels + l];
      }
    }
    CHECK(precision_at_k(sm, 5) == doctest::Approx(precision_at_k(shuffled, 5)).epsilon(1e-12));
  }
}

TEST_CASE("fast metrics equal brute-force oracles") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto sm = transicd::testing::random_score_matrix(rng);
    const auto fast = evaluate_scores(sm, 5);
    const auto slow = transicd::testing::brute_metrics(sm, 5);
    CHECK(std::abs(fast.micro_auc - slow.micro_auc) < 1e-9);
    CHECK(std::abs(fast.macro_auc - slow.macro_auc) < 1e-9);
    CHECK(std::abs(fast.macro_f1 - slow.macro_f1) < 1e-9);
    CHECK(std::abs(fast.micro_f1 - slow.micro_f1) < 1e-9);
    CHECK(std::abs(fast.p_at_k - slow.p_at_k) < 1e-9);
    CHECK(fast.macro_f1 <= 1.0);
    CHECK(fast.micro_f1 <= 1.0);
  }
}

TEST_CASE("micro F1 equals per-label F1 with one label") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto sm = transicd::testing::random_score_matrix(rng, 20, 1, 1);
    const auto f = macro_micro_f1(sm);
    CHECK(f.micro == f.macro);
  }
}

TEST_CASE("score matrix validation") {
  CHECK(kind_of([] { macro_micro_f1(make(1, 2, {0.5}, {1, 0})); }) == ErrorKind::dimension);
  CHECK(kind_of([] { macro_micro_f1(make(1, 1, {1.5}, {1})); }) == ErrorKind::validation);
  CHECK(kind_of([] { macro_micro_f1(make(0, 0, {}, {})); }) == ErrorKind::dimension);
}

TEST_CASE("report schema") {
  MetricsReport r;
  r.macro_auc = 0.9;
  r.micro_auc = 0.95;
  r.macro_f1 = 0.5;
  r.micro_f1 = 0.6;
  r.p_at_k = 0.4;
  r.k = 5;
  CHECK(to_text(r) == "macro_auc = 0.90000000000000002\nmicro_auc = 0.94999999999999996\nmacro_f1 = 0.5\n"
                      "micro_f1 = 0.59999999999999998\np_at_k = 0.40000000000000002\nk = 5\n");
  const auto back = from_json(to_json(r));
  CHECK(back == r);
  CHECK(kind_of([] { from_json("{\"macro_auc\": 1}"); }) == ErrorKind::format);
}
