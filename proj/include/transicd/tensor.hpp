#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace transicd::numerics {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tape;

// Dense row-major float64 array. Values are immutable once built; a tensor
// produced by an op on a recording tape carries a handle into that tape.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_ ? data_->size() : 0; }
  bool empty() const noexcept { return size() == 0; }

  // Matrix view: a rank-1 tensor [n] is one row; higher ranks fold leading
  // extents into rows.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<const double> data() const noexcept;
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t row, std::size_t col) const { return (*data_)[row * cols() + col]; }
  double item() const;
  std::vector<double> to_vector() const { return data_ ? *data_ : std::vector<double>{}; }

  Tape* tape() const noexcept { return tape_; }
  std::size_t node() const noexcept { return node_; }
  bool on_tape() const noexcept { return tape_ != nullptr; }

  // Same value, no tape handle.
  Tensor detach() const;

  // Shared storage, for ops that capture inputs in backward closures.
  const std::shared_ptr<const std::vector<double>>& storage() const noexcept { return data_; }

 private:
  friend class Tape;

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

bool bitwise_equal(const Tensor& a, const Tensor& b) noexcept;

// Gradient buffers for an op's inputs, indexed by argument position. Inputs
// that are constants (not on the tape) have an empty span.
class GradSlots {
 public:
  explicit GradSlots(std::vector<std::span<double>> slots) : slots_(std::move(slots)) {}
  bool wants(std::size_t input) const noexcept { return !slots_[input].empty(); }
  std::span<double> operator[](std::size_t input) const noexcept { return slots_[input]; }

 private:
  std::vector<std::span<double>> slots_;
};

// Receives d(loss)/d(output) and accumulates (+=) into the input slots.
using BackwardFn = std::function<void(std::span<const double> grad_out, const GradSlots& grads)>;

// Append-only record of one forward pass. Nodes are stored in creation order,
// which is a topological order; backward() may run once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a trainable leaf holding `value`.
  Tensor variable(const Tensor& value);

  // Records an op result. Returns a constant tensor when no input is on this
  // tape (nothing to differentiate).
  Tensor record(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
                BackwardFn backward);
  Tensor record(Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
                BackwardFn backward) {
    return record(std::move(shape), std::move(value),
                  std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(backward));
  }

  void backward(const Tensor& loss);

  // d(loss)/d(t); zeros when nothing flowed into t.
  Tensor grad(const Tensor& t) const;

  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::size_t size = 0;
    std::vector<std::optional<std::size_t>> inputs;
    BackwardFn backward;
    std::vector<double> grad;  // allocated lazily
  };

  Tensor make_handle(Shape shape, std::shared_ptr<const std::vector<double>> data,
                     std::size_t node);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Finds the tape shared by the taped inputs; throws if they disagree.
Tape* common_tape(std::span<const Tensor> inputs);

}  // namespace transicd::numerics
