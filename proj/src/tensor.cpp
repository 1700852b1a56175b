#include "duality/tensor.hpp"

#include <algorithm>

namespace duality {

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<int> s, bool rg)
    : shape(std::move(s)),
      values(static_cast<std::size_t>(shape_numel(shape)), 0.0),
      requires_grad(rg) {
  for (int d : shape)
    if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(shape));
  if (rg) grad.assign(values.size(), 0.0);
}

Tensor::Tensor(std::vector<double> v, std::vector<int> s, bool rg)
    : shape(std::move(s)), values(std::move(v)), requires_grad(rg) {
  for (int d : shape)
    if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(shape));
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  if (rg) grad.assign(values.size(), 0.0);
}

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(shape), requires_grad);
}

TensorPtr Tensor::from(std::vector<double> values, std::vector<int> shape,
                       bool requires_grad) {
  return std::make_shared<Tensor>(std::move(values), std::move(shape),
                                  requires_grad);
}

TensorPtr Tensor::scalar(double v, bool requires_grad) {
  return from({v}, {1}, requires_grad);
}

int Tensor::rows() const {
  if (shape.size() == 2) return shape[0];
  if (shape.size() == 1) return shape[0];
  throw ShapeError("rows() on tensor of shape " + shape_str(shape));
}

int Tensor::cols() const {
  if (shape.size() == 2) return shape[1];
  if (shape.size() == 1) return 1;
  throw ShapeError("cols() on tensor of shape " + shape_str(shape));
}

double Tensor::item() const {
  if (!is_scalar())
    throw ContractError("item() on non-scalar tensor of shape " +
                        shape_str(shape));
  return values[0];
}

void Tensor::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

std::string Tensor::shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void Tape::record(TensorPtr out, std::vector<TensorPtr> inputs,
                  std::function<void()> backward) {
  if (!recording_) return;
  nodes_.push_back({std::move(out), std::move(inputs), std::move(backward)});
}

void Tape::run_backward(const TensorPtr& loss) {
  if (!loss || !loss->is_scalar())
    throw ContractError("backward requires a scalar loss");
  bool found = false;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->out == loss) {
      found = true;
      break;
    }
  }
  if (!found) throw ContractError("loss tensor was not produced on this tape");
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->backward) it->backward();
}

void Tape::backward(const TensorPtr& loss) {
  run_backward(loss);
  clear();
}

void Tape::backward_retain(const TensorPtr& loss) { run_backward(loss); }

void Tape::zero_grads() {
  for (auto& n : nodes_) {
    if (n.out) n.out->zero_grad();
    for (auto& in : n.inputs)
      if (in) in->zero_grad();
  }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace duality
