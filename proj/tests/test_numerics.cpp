#include <doctest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "support/random.hpp"
#include "transicd/error.hpp"
#include "transicd/ops.hpp"

using namespace transicd;
using namespace transicd::numerics;
using transicd::testing::check_gradients;
using transicd::testing::random_extent;
using transicd::testing::random_tensor;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected transicd::Error");
  return ErrorKind::io;
}

constexpr double kGradTol = 1e-4;
constexpr int kRandomCases = 50;

}  // namespace

TEST_CASE("matmul") {
  SUBCASE("identity") {
    const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
    CHECK(bitwise_equal(matmul(eye, m), m));
  }
  SUBCASE("hand arithmetic") {
    const Tensor out = matmul(Tensor::matrix(2, 2, {1, 2, 3, 4}), Tensor::matrix(2, 1, {0, 1}));
    CHECK(out.shape() == Shape{2, 1});
    CHECK(out[0] == 2.0);
    CHECK(out[1] == 4.0);
  }
  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::dimension);
      const std::string what = e.what();
      CHECK(what.find("[2x3]") != std::string::npos);
    }
  }
  SUBCASE("gradient of sum(A*B) wrt A is the row-broadcast of the column sums of B") {
    Rng rng(3);
    const Tensor a = random_tensor(rng, {3, 4});
    const Tensor b = random_tensor(rng, {4, 5});
    Tape tape;
    const Tensor va = tape.variable(a);
    tape.backward(sum(matmul(va, b)));
    const Tensor g = tape.grad(va);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 4; ++k) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < 5; ++j) row_sum += b.at(k, j);
        CHECK(g.at(i, k) == doctest::Approx(row_sum).epsilon(1e-12));
      }
    const auto fd = check_gradients([&](std::span<const Tensor> in) { return sum(matmul(in[0], b)); },
                                    {a});
    CHECK(fd.max_rel_error < kGradTol);
  }
}

TEST_CASE("softmax") {
  SUBCASE("uniform on equal scores") {
    const Tensor y = softmax(Tensor::vector({0, 0, 0}));
    for (double v : y.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("[1,2,3]") {
    const Tensor y = softmax(Tensor::vector({1, 2, 3}));
    CHECK(std::abs(y[0] - 0.09003) < 1e-5);
    CHECK(std::abs(y[1] - 0.24473) < 1e-5);
    CHECK(std::abs(y[2] - 0.66524) < 1e-5);
  }
  SUBCASE("single unmasked position") {
    const Tensor y = softmax(Tensor::vector({5, 9}), Mask{1, 0});
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 0.0);
  }
  SUBCASE("fully masked row is rejected") {
    CHECK(kind_of([] { softmax(Tensor::vector({1, 2}), Mask{0, 0}); }) == ErrorKind::degenerate_mask);
  }
  SUBCASE("rows sum to one and masked entries are exactly zero") {
    Rng rng(11);
    for (int t = 0; t < kRandomCases; ++t) {
      const std::size_t rows = random_extent(rng, 1, 6), cols = random_extent(rng, 1, 12);
      const Tensor x = random_tensor(rng, {rows, cols}, -30.0, 30.0);
      Mask valid(cols);
      for (auto& m : valid) m = rng.bernoulli(0.7);
      valid[rng.below(cols)] = 1;
      const Tensor y = softmax(x, valid);
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          if (!valid[c]) CHECK(y.at(r, c) == 0.0);
          CHECK(y.at(r, c) >= 0.0);
          total += y.at(r, c);
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("elementwise") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(numerics::tanh(Tensor::scalar(0.0)).item() == 0.0);
  Tape tape;
  const Tensor x = tape.variable(Tensor::scalar(0.0));
  tape.backward(sigmoid(x));
  CHECK(tape.grad(x).item() == 0.25);

  CHECK(kind_of([] { add(Tensor::zeros({2, 3}), Tensor::zeros({2})); }) == ErrorKind::dimension);
  CHECK(kind_of([] { mul(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})); }) == ErrorKind::dimension);
  // Bias broadcast over rows is the one permitted pattern.
  const Tensor biased = add(Tensor::zeros({2, 3}), Tensor::vector({1, 2, 3}));
  CHECK(biased.at(1, 2) == 3.0);
  CHECK(sigmoid(Tensor::scalar(-800.0)).item() >= 0.0);
  CHECK(sigmoid(Tensor::scalar(800.0)).item() == 1.0);
}

TEST_CASE("layer_norm") {
  const Tensor ones = Tensor::vector({1.0, 1.0});
  const Tensor zeros = Tensor::vector({0.0, 0.0});
  SUBCASE("constant row maps to zeros") {
    const Tensor y = layer_norm(Tensor::matrix(1, 4, {1, 1, 1, 1}), Tensor::full({4}, 1.0),
                                Tensor::zeros({4}));
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("[1,-1] normalises to +-1 under the epsilon guard") {
    const Tensor y = layer_norm(Tensor::matrix(1, 2, {1, -1}), ones, zeros);
    CHECK(std::abs(y[0] - 1.0) < 1e-4);
    CHECK(std::abs(y[1] + 1.0) < 1e-4);
  }
  SUBCASE("width below two is rejected") {
    CHECK(kind_of([] {
            layer_norm(Tensor::matrix(2, 1, {1, 2}), Tensor::vector({1}), Tensor::vector({0}));
          }) == ErrorKind::dimension);
  }
}

TEST_CASE("backward contract") {
  SUBCASE("sum") {
    Tape tape;
    const Tensor x = tape.variable(Tensor::vector({4, 5, 6}));
    tape.backward(sum(x));
    const Tensor g = tape.grad(x);
    CHECK(g.to_vector() == std::vector<double>{1, 1, 1});
  }
  SUBCASE("sum of squares") {
    Tape tape;
    const Tensor x = tape.variable(Tensor::vector({1, 2}));
    tape.backward(sum(mul(x, x)));
    CHECK(tape.grad(x).to_vector() == std::vector<double>{2, 4});
  }
  SUBCASE("non-scalar loss") {
    Tape tape;
    const Tensor x = tape.variable(Tensor::vector({1, 2}));
    CHECK(kind_of([&] { tape.backward(mul(x, x)); }) == ErrorKind::rank);
  }
  SUBCASE("second backward on the same tape") {
    Tape tape;
    const Tensor x = tape.variable(Tensor::vector({1, 2}));
    const Tensor loss = sum(x);
    tape.backward(loss);
    CHECK(kind_of([&] { tape.backward(loss); }) == ErrorKind::tape_consumed);
    CHECK(kind_of([&] { sum(x); }) == ErrorKind::tape_consumed);
  }
  SUBCASE("every trainable leaf receives a gradient of its own shape") {
    Tape tape;
    const Tensor w = tape.variable(Tensor::zeros({3, 2}));
    const Tensor unused = tape.variable(Tensor::zeros({4}));
    tape.backward(sum(matmul(Tensor::full({1, 3}, 1.0), w)));
    CHECK(tape.grad(w).shape() == w.shape());
    CHECK(tape.grad(unused).shape() == unused.shape());
  }
  SUBCASE("each node is visited once, nodes precede their consumers") {
    Tape tape;
    const Tensor x = tape.variable(Tensor::vector({0.5}));
    Tensor y = x;
    for (int i = 0; i < 5; ++i) y = add(y, x);  // diamond-shaped reuse
    tape.backward(sum(y));
    CHECK(tape.grad(x)[0] == 6.0);
  }
}

TEST_CASE("finite-difference agreement on 50 random cases per op") {
  Rng rng(2024);
  struct Case {
    const char* name;
    std::function<void(Rng&)> run;
  };
  auto expect = [](const testing::GradCheckResult& r) {
    CAPTURE(r.worst_analytic);
    CAPTURE(r.worst_numeric);
    CHECK(r.max_rel_error < kGradTol);
  };
  const std::vector<Case> cases = {
      {"matmul",
       [&](Rng& g) {
         const std::size_t m = random_extent(g, 1, 5), k = random_extent(g, 1, 5), p = random_extent(g, 1, 5);
         const Tensor w = random_tensor(g, {m, p});
         expect(check_gradients(
             [w](std::span<const Tensor> in) { return sum(mul(matmul(in[0], in[1]), w)); },
             {random_tensor(g, {m, k}), random_tensor(g, {k, p})}));
       }},
      {"transpose",
       [&](Rng& g) {
         const std::size_t m = random_extent(g, 1, 5), n = random_extent(g, 1, 5);
         const Tensor w = random_tensor(g, {n, m});
         expect(check_gradients([w](std::span<const Tensor> in) { return sum(mul(transpose(in[0]), w)); },
                                {random_tensor(g, {m, n})}));
       }},
      {"add/sub/mul with bias broadcast",
       [&](Rng& g) {
         const std::size_t r = random_extent(g, 1, 4), c = random_extent(g, 1, 6);
         const Tensor w = random_tensor(g, {r, c});
         expect(check_gradients(
             [w](std::span<const Tensor> in) {
               Tensor t = add(in[0], in[2]);
               t = mul(t, in[1]);
               t = sub(t, in[3]);
               t = mul(t, in[2]);
               return sum(mul(scale(t, 0.7), w));
             },
             {random_tensor(g, {r, c}), random_tensor(g, {r, c}), random_tensor(g, {c}),
              random_tensor(g, {r, c})}));
       }},
      {"tanh/sigmoid/relu",
       [&](Rng& g) {
         const std::size_t n = random_extent(g, 1, 10);
         const Tensor w = random_tensor(g, {n});
         std::vector<double> x(n);
         // keep relu inputs away from the kink at zero
         for (double& v : x) v = (g.bernoulli(0.5) ? 1.0 : -1.0) * g.uniform(0.05, 2.0);
         expect(check_gradients(
             [w](std::span<const Tensor> in) {
               return sum(mul(add(add(numerics::tanh(in[0]), sigmoid(in[0])), relu(in[0])), w));
             },
             {Tensor::vector(x)}));
       }},
      {"softmax masked",
       [&](Rng& g) {
         const std::size_t r = random_extent(g, 1, 4), c = random_extent(g, 1, 8);
         Mask valid(c);
         for (auto& m : valid) m = g.bernoulli(0.75);
         valid[g.below(c)] = 1;
         const Tensor w = random_tensor(g, {r, c});
         expect(check_gradients(
             [w, valid](std::span<const Tensor> in) { return sum(mul(softmax(in[0], valid), w)); },
             {random_tensor(g, {r, c}, -3.0, 3.0)}));
       }},
      {"layer_norm",
       [&](Rng& g) {
         const std::size_t r = random_extent(g, 1, 4), d = random_extent(g, 2, 8);
         const Tensor w = random_tensor(g, {r, d});
         expect(check_gradients(
             [w](std::span<const Tensor> in) { return sum(mul(layer_norm(in[0], in[1], in[2]), w)); },
             {random_tensor(g, {r, d}, -2.0, 2.0), random_tensor(g, {d}, 0.5, 1.5),
              random_tensor(g, {d})}));
       }},
      {"gather_rows",
       [&](Rng& g) {
         const std::size_t vocab = random_extent(g, 1, 6), d = random_extent(g, 1, 4);
         const std::size_t n = random_extent(g, 1, 7);
         std::vector<std::size_t> ids(n);
         for (auto& id : ids) id = g.below(vocab);
         const Tensor w = random_tensor(g, {n, d});
         expect(check_gradients(
             [w, ids](std::span<const Tensor> in) { return sum(mul(gather_rows(in[0], ids), w)); },
             {random_tensor(g, {vocab, d})}));
       }},
      {"multi_head_attention",
       [&](Rng& g) {
         const std::size_t heads = random_extent(g, 1, 3), dh = random_extent(g, 1, 3);
         const std::size_t n = random_extent(g, 1, 6), d = heads * dh;
         Mask valid(n);
         for (auto& m : valid) m = g.bernoulli(0.7);
         valid[g.below(n)] = 1;
         const Tensor w = random_tensor(g, {n, d});
         expect(check_gradients(
             [w, valid, heads](std::span<const Tensor> in) {
               return sum(mul(multi_head_attention(in[0], in[1], in[2], heads, valid), w));
             },
             {random_tensor(g, {n, d}), random_tensor(g, {n, d}), random_tensor(g, {n, d})}));
       }},
      {"row_dot/stack/reshape/mean",
       [&](Rng& g) {
         const std::size_t r = random_extent(g, 1, 5), c = random_extent(g, 1, 5);
         expect(check_gradients(
             [r](std::span<const Tensor> in) {
               const Tensor dots = row_dot(in[0], in[1]);
               const Tensor stacked = stack(std::vector<Tensor>{dots, scale(dots, 2.0), in[2]});
               return mean(mul(reshape(stacked, {3 * r}), reshape(stacked, {3 * r})));
             },
             {random_tensor(g, {r, c}), random_tensor(g, {r, c}), random_tensor(g, {r})}));
       }},
  };
  for (const auto& c : cases) {
    const std::string name = c.name;
    CAPTURE(name);
    for (int t = 0; t < kRandomCases; ++t) c.run(rng);
  }
}

TEST_CASE("ops are bitwise deterministic") {
  Rng rng(5);
  const Tensor a = random_tensor(rng, {7, 9});
  const Tensor b = random_tensor(rng, {9, 4});
  auto run = [&] {
    Tape tape;
    const Tensor va = tape.variable(a);
    const Tensor y = softmax(matmul(numerics::tanh(va), b));
    const Tensor loss = sum(mul(y, y));
    tape.backward(loss);
    return std::pair{loss, tape.grad(va)};
  };
  const auto first = run();
  const auto second = run();
  CHECK(bitwise_equal(first.first, second.first));
  CHECK(bitwise_equal(first.second, second.second));
}

TEST_CASE("dropout") {
  Rng rng(1);
  const Tensor x = Tensor::full({100}, 1.0);
  CHECK(bitwise_equal(dropout(x, 0.0, rng), x));
  const Tensor y = dropout(x, 0.5, rng);
  for (double v : y.data()) CHECK((v == 0.0 || v == 2.0));
  CHECK(kind_of([&] { dropout(x, 1.0, rng); }) == ErrorKind::validation);
}
