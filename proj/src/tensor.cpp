// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0

#include "cds/tensor.hpp"

#include <sstream>
#include <utility>

namespace cds {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape s, T fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != shape_size(shape)) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
}

template <typename T>
void Tape<T>::check_usable() const {
  if (consumed_) throw std::logic_error("tape already consumed by backward(); re-run the forward pass");
}

template <typename T>
Var<T> Tape<T>::push(Node node) {
  check_usable();
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T>& param) {
  Node n;
  n.op = "leaf";
  n.external = &param;
  n.sink = &param;
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.op = "constant";
  n.own = std::move(value);
  n.own.grad.clear();
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::constant_ref(const Tensor<T>& value) {
  Node n;
  n.op = "constant";
  n.external = &value;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::record(const char* op, Tensor<T> value, const std::vector<Var<T>>& inputs,
                       BackwardFn backward) {
  Node n;
  n.op = op;
  n.own = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var<T>& in : inputs) {
    if (&in.tape() != this) throw std::logic_error(std::string(op) + ": input belongs to another tape");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || requires_grad(in.id());
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                       BackwardFn backward) {
  return record(op, std::move(value), std::vector<Var<T>>(inputs), std::move(backward));
}

template <typename T>
const Tensor<T>& Tape<T>::value(int id) const {
  check_usable();
  const Node& n = nodes_.at(static_cast<std::size_t>(id));
  return n.external ? *n.external : n.own;
}

template <typename T>
bool Tape<T>::requires_grad(int id) const {
  return nodes_.at(static_cast<std::size_t>(id)).requires_grad;
}

template <typename T>
std::vector<T>& Tape<T>::grad(int id) {
  Node& n = nodes_.at(static_cast<std::size_t>(id));
  if (n.grad.empty()) {
    const Tensor<T>& v = n.external ? *n.external : n.own;
    n.grad.assign(v.size(), T(0));
  }
  return n.grad;
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  check_usable();
  if (&loss.tape() != this) throw std::logic_error("backward: loss belongs to another tape");
  if (loss.size() != 1) {
    throw DimensionError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  grad(loss.id())[0] = T(1);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.sink) {
      if (n.sink->grad.empty()) n.sink->grad.assign(n.sink->size(), T(0));
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.sink->grad[i] += n.grad[i];
    }
  }
  nodes_.clear();
  consumed_ = true;
}

template <typename T>
Var<T> ParamBinder<T>::operator()(Tensor<T>& param) {
  for (const auto& [ptr, var] : bound_) {
    if (ptr == &param) return var;
  }
  Var<T> v = trainable_ ? tape_->leaf(param) : tape_->constant_ref(param);
  bound_.emplace_back(&param, v);
  return v;
}

template struct Tensor<float>;
template struct Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class ParamBinder<float>;
template class ParamBinder<double>;

}  // namespace cds
