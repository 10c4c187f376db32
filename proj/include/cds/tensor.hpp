// Copyright (c) 2026 The CDS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors and a single-use reverse-mode tape.
//
// A Tape records every operation applied to its Vars. Parameters enter the
// tape as leaves (gradients are accumulated into Tensor::grad on backward) or
// as constants (no gradient). backward() walks the recorded nodes once in
// reverse order and then clears the tape; it cannot be called again without a
// fresh forward pass.

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cds/errors.hpp"

namespace cds {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty when no gradient has been accumulated

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0));
  Tensor(Shape s, std::vector<T> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }
  bool has_grad() const { return !grad.empty(); }
  void zero_grad() { grad.clear(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

template <typename T>
class Tape;

// Lightweight handle to a node on a Tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;
  Tape<T>& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

template <typename T>
class Tape {
 public:
  // Propagates the node's own gradient into the gradients of its inputs.
  using BackwardFn = std::function<void(Tape<T>&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Parameter whose gradient is accumulated into param.grad by backward().
  Var<T> leaf(Tensor<T>& param);
  // Value copied onto the tape, no gradient.
  Var<T> constant(Tensor<T> value);
  // Value referenced in place, no gradient. The tensor must outlive the tape.
  Var<T> constant_ref(const Tensor<T>& value);

  // Records an operation result. The backward function is only retained when
  // at least one input requires a gradient.
  Var<T> record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                BackwardFn backward);
  Var<T> record(const char* op, Tensor<T> value, const std::vector<Var<T>>& inputs,
                BackwardFn backward);

  const Tensor<T>& value(int id) const;
  bool requires_grad(int id) const;
  // Gradient buffer of a node, allocated (zero) on first access.
  std::vector<T>& grad(int id);
  const std::vector<T>& grad_if_any(int id) const { return nodes_.at(id).grad; }
  int input(int id, std::size_t k) const { return nodes_.at(id).inputs.at(k); }

  void backward(const Var<T>& loss);

  std::size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    const char* op = "";
    Tensor<T> own;
    const Tensor<T>* external = nullptr;
    Tensor<T>* sink = nullptr;
    std::vector<int> inputs;
    BackwardFn backward;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  Var<T> push(Node node);
  void check_usable() const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

// Maps parameters onto a tape either as leaves or as constants. A parameter
// bound more than once resolves to the same node.
template <typename T>
class ParamBinder {
 public:
  ParamBinder(Tape<T>& tape, bool trainable) : tape_(&tape), trainable_(trainable) {}

  Var<T> operator()(Tensor<T>& param);
  Tape<T>& tape() const { return *tape_; }
  bool trainable() const { return trainable_; }

 private:
  Tape<T>* tape_;
  bool trainable_;
  std::vector<std::pair<const Tensor<T>*, Var<T>>> bound_;
};

}  // namespace cds
