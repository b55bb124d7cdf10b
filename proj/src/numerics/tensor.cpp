#include "transicd/tensor.hpp"

#include <cstring>
#include <sstream>

#include "transicd/error.hpp"

namespace transicd::numerics {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  for (std::size_t e : shape_)
    if (e == 0) throw Error(ErrorKind::dimension, "zero extent in shape " + shape_string(shape_));
  if (shape_size(shape_) != data.size())
    throw Error(ErrorKind::dimension, "shape " + shape_string(shape_) + " needs " +
                                          std::to_string(shape_size(shape_)) + " values, got " +
                                          std::to_string(data.size()));
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw Error(ErrorKind::rank, "axis " + std::to_string(axis) + " out of range for shape " +
                                     shape_string(shape_));
  return shape_[axis];
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.size() <= 1) return 1;
  return size() / shape_.back();
}

std::size_t Tensor::cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }

std::span<const double> Tensor::data() const noexcept {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Tensor::item() const {
  if (size() != 1)
    throw Error(ErrorKind::rank, "item() on non-scalar tensor " + shape_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::detach() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = data_;
  return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) noexcept {
  if (a.shape() != b.shape()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

Tape* common_tape(std::span<const Tensor> inputs) {
  Tape* tape = nullptr;
  for (const Tensor& t : inputs) {
    if (!t.on_tape()) continue;
    if (tape && tape != t.tape())
      throw Error(ErrorKind::validation, "op inputs recorded on different tapes");
    tape = t.tape();
  }
  return tape;
}

Tensor Tape::make_handle(Shape shape, std::shared_ptr<const std::vector<double>> data,
                         std::size_t node) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  t.tape_ = this;
  t.node_ = node;
  return t;
}

Tensor Tape::variable(const Tensor& value) {
  if (consumed_) throw Error(ErrorKind::tape_consumed, "tape already ran backward()");
  Node node;
  node.shape = value.shape();
  node.size = value.size();
  nodes_.push_back(std::move(node));
  return make_handle(value.shape(), value.storage(), nodes_.size() - 1);
}

Tensor Tape::record(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
                    BackwardFn backward) {
  bool any = false;
  for (const Tensor& t : inputs) {
    if (t.on_tape() && t.tape() != this)
      throw Error(ErrorKind::validation, "op inputs recorded on different tapes");
    any = any || t.on_tape();
  }
  Tensor result(std::move(shape), std::move(value));
  if (!any) return result;
  if (consumed_) throw Error(ErrorKind::tape_consumed, "tape already ran backward()");
  Node node;
  node.shape = result.shape();
  node.size = result.size();
  node.inputs.reserve(inputs.size());
  for (const Tensor& t : inputs)
    node.inputs.push_back(t.on_tape() ? std::optional<std::size_t>(t.node()) : std::nullopt);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return make_handle(result.shape(), result.storage(), nodes_.size() - 1);
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw Error(ErrorKind::tape_consumed, "backward() already ran on this tape");
  if (loss.tape() != this) throw Error(ErrorKind::validation, "loss is not recorded on this tape");
  if (loss.size() != 1)
    throw Error(ErrorKind::rank, "backward() needs a scalar loss, got " + shape_string(loss.shape()));
  consumed_ = true;
  nodes_[loss.node()].grad.assign(1, 1.0);

  for (std::size_t idx = loss.node() + 1; idx-- > 0;) {
    Node& node = nodes_[idx];
    if (node.grad.empty() || !node.backward) continue;
    std::vector<std::span<double>> slots;
    slots.reserve(node.inputs.size());
    for (const auto& input : node.inputs) {
      if (!input) {
        slots.emplace_back();
        continue;
      }
      Node& parent = nodes_[*input];
      if (parent.grad.empty()) parent.grad.assign(parent.size, 0.0);
      slots.emplace_back(parent.grad.data(), parent.grad.size());
    }
    node.backward(std::span<const double>(node.grad.data(), node.grad.size()),
                  GradSlots(std::move(slots)));
    // Interior gradients are no longer needed once propagated.
    if (!node.inputs.empty()) std::vector<double>().swap(node.grad);
  }
}

Tensor Tape::grad(const Tensor& t) const {
  if (t.tape() != this) return Tensor::zeros(t.shape());
  const Node& node = nodes_[t.node()];
  if (node.grad.empty()) return Tensor::zeros(t.shape());
  return Tensor(t.shape(), node.grad);
}

}  // namespace transicd::numerics
