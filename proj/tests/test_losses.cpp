#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "support/errors.hpp"
#include "support/gradcheck.hpp"
#include "support/random.hpp"
#include "transicd/losses.hpp"
#include "transicd/ops.hpp"

using namespace transicd;
using namespace transicd::losses;
using numerics::Tensor;
using transicd::testing::kind_of;

namespace {

Tensor random_targets(Rng& rng, std::size_t rows, std::size_t cols) {
  std::vector<double> y(rows * cols);
  for (auto& v : y) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
  return Tensor({rows, cols}, std::move(y));
}

}  // namespace

TEST_CASE("bce examples") {
  CHECK(bce(std::vector<double>{1}, std::vector<double>{1}) == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(bce(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}) == doctest::Approx(2 * std::log(2.0)));
  CHECK(bce(std::vector<double>{1}, std::vector<double>{0.25}) == doctest::Approx(1.38629436112));
  CHECK(kind_of([] { bce(std::vector<double>{1}, std::vector<double>{0.5, 0.5}); }) == ErrorKind::dimension);
}

TEST_CASE("bce clamps probabilities") {
  const double at_zero = bce(std::vector<double>{1}, std::vector<double>{0.0});
  CHECK(std::isfinite(at_zero));
  CHECK(at_zero == doctest::Approx(-std::log(kProbEps)));
}

TEST_CASE("ldam_margins") {
  CHECK(ldam_margins(std::vector<double>{81, 16, 1}, 3.0) == std::vector<double>{1.0, 1.5, 3.0});
  CHECK(ldam_margins(std::vector<double>{7, 0}, 0.0) == std::vector<double>{0.0, 0.0});
  CHECK(ldam_margins(std::vector<double>{0}, 3.0) == std::vector<double>{3.0});
  CHECK(kind_of([] { ldam_margins(std::vector<double>{-1}, 3.0); }) == ErrorKind::validation);
  CHECK(kind_of([] { ldam_margins(std::vector<double>{1}, -3.0); }) == ErrorKind::validation);
  std::vector<double> counts;
  for (int n = 1; n < 500; n += 7) counts.push_back(n);
  const auto m = ldam_margins(counts, 3.0);
  for (std::size_t i = 1; i < m.size(); ++i) CHECK(m[i] < m[i - 1]);
}

TEST_CASE("ldam_loss examples") {
  const auto one = Tensor::matrix(1, 1, {1});
  const auto zero = Tensor::matrix(1, 1, {0});
  const auto logit = Tensor::matrix(1, 1, {1});
  CHECK(ldam_loss(one, logit, std::vector<double>{1.0}).item() == doctest::Approx(std::log(2.0)));
  CHECK(ldam_loss(zero, logit, std::vector<double>{5.0}).item() ==
        bce(std::vector<double>{0}, std::vector<double>{1.0 / (1.0 + std::exp(-1.0))}));
  // A logit of 0 with margin 1 on a positive gives probability sigmoid(-1).
  CHECK(ldam_loss(one, Tensor::matrix(1, 1, {0}), std::vector<double>{1.0}).item() ==
        doctest::Approx(-std::log(0.2689414213699951)));
  CHECK(kind_of([&] { ldam_loss(one, logit, std::vector<double>{1.0, 2.0}); }) == ErrorKind::dimension);
  CHECK(kind_of([&] { ldam_loss(one, Tensor::matrix(1, 2, {0, 0}), std::vector<double>{1.0}); }) ==
        ErrorKind::dimension);
}

TEST_CASE("ldam with C=0 equals bce bitwise") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto y = random_targets(rng, 3, 5);
    const auto logits = transicd::testing::random_tensor(rng, {3, 5}, -6, 6);
    const std::vector<double> counts = {1, 4, 9, 0, 100};
    const auto stats_margins = ldam_margins(counts, 0.0);
    const double a = ldam_loss(y, logits, stats_margins).item();
    const double b = bce_loss(y, numerics::sigmoid(logits)).item();
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
  }
}

TEST_CASE("ldam dominates bce when positives exist") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto y = random_targets(rng, 1, 6);
    auto yv = y.to_vector();
    yv[rng.below(6)] = 1.0;
    y = Tensor({1, 6}, yv);
    const auto logits = transicd::testing::random_tensor(rng, {1, 6}, -5, 5);
    const auto margins = ldam_margins(std::vector<double>{1, 2, 5, 10, 50, 300}, 3.0);
    CHECK(ldam_loss(y, logits, margins).item() >= bce_loss(y, numerics::sigmoid(logits)).item());
  }
}

TEST_CASE("loss gradients wrt logits match finite differences") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto y = random_targets(rng, 2, 4);
    const auto logits = transicd::testing::random_tensor(rng, {2, 4}, -4, 4);
    const auto margins = ldam_margins(std::vector<double>{1, 3, 20, 81}, 3.0);
    const auto bce_res = transicd::testing::check_gradients(
        [&](std::span<const Tensor> in) { return bce_loss(y, numerics::sigmoid(in[0])); }, {logits});
    CHECK(bce_res.max_rel_error < 1e-4);
    const auto ldam_res = transicd::testing::check_gradients(
        [&](std::span<const Tensor> in) { return ldam_loss(y, in[0], margins); }, {logits});
    CHECK(ldam_res.max_rel_error < 1e-4);
    const auto scaled = transicd::testing::check_gradients(
        [&](std::span<const Tensor> in) { return ldam_loss(y, in[0], margins, 2.0); }, {logits});
    CHECK(scaled.max_rel_error < 1e-4);
  }
}

TEST_CASE("label stats table") {
  const std::vector<std::vector<std::size_t>> sets = {{0, 2}, {0}, {2}, {0}};
  const auto stats = LabelStats::from_label_sets(sets, 4, 3.0);
  CHECK(stats.counts == std::vector<double>{3, 0, 2, 0});
  CHECK(stats.margins[1] == 3.0);
  const auto path = (std::filesystem::temp_directory_path() / "transicd_label_stats.tsv").string();
  stats.save(path);
  const auto back = LabelStats::load(path, 3.0);
  CHECK(back.counts == stats.counts);
  CHECK(back.margins == stats.margins);
  std::filesystem::remove(path);
  CHECK(kind_of([&] { LabelStats::from_label_sets(sets, 2, 3.0); }) == ErrorKind::index);
}
