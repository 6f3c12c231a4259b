// SPDX-License-Identifier: Apache-2.0
//
// Dense numeric core with a tape-based reverse mode.
//
// Values live in one contiguous arena per tape and nodes are appended in
// creation order, so every node's inputs have smaller ids than the node
// itself. Backward walks the arena once from the output down to id 0 and
// accumulates parameter gradients in that fixed order, which keeps results
// bitwise reproducible.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irnn/errors.hpp"

namespace irnn::nd {

/// Row-major 64-bit tensor of rank 0, 1 or 2.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor scalar(double value);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

/// Named collection of trainable tensors. Indices are stable and used as
/// parameter ids on the tape.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  Tensor& operator[](std::string_view name) { return tensors_[index_of(name)]; }
  const Tensor& operator[](std::string_view name) const {
    return tensors_[index_of(name)];
  }
  Tensor& at(std::size_t i) { return tensors_[i]; }
  const Tensor& at(std::size_t i) const { return tensors_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

/// One gradient tensor per ParamSet entry, same shapes.
using Gradients = std::vector<Tensor>;

Gradients zeros_like(const ParamSet& params);

enum class Elementwise : std::uint8_t {
  sigmoid,
  tanh,
  exp_neg,
  max0,
  one_minus,
  hadamard,
  add,
  sub,
};

struct NodeId {
  std::uint32_t index = 0;
};

/// Single-threaded recording of one computation. Reuse a tape across samples
/// with clear(); the arenas keep their capacity.
class Tape {
 public:
  NodeId constant(std::span<const double> values);
  NodeId constant(const Tensor& value);
  NodeId parameter(std::size_t param_index, const Tensor& value);

  /// w ⊙ x + b: the identity-masked matrix product in O(D).
  NodeId diag_affine(NodeId w, NodeId x, NodeId b);
  /// W x + b with W of shape (out, in).
  NodeId dense_affine(NodeId w, NodeId x, NodeId b);
  NodeId matvec(NodeId w, NodeId x);

  NodeId elementwise(Elementwise kind, NodeId a);
  NodeId elementwise(Elementwise kind, NodeId a, NodeId b);

  NodeId sigmoid(NodeId a) { return elementwise(Elementwise::sigmoid, a); }
  NodeId tanh(NodeId a) { return elementwise(Elementwise::tanh, a); }
  NodeId exp_neg(NodeId a) { return elementwise(Elementwise::exp_neg, a); }
  NodeId max0(NodeId a) { return elementwise(Elementwise::max0, a); }
  NodeId one_minus(NodeId a) { return elementwise(Elementwise::one_minus, a); }
  NodeId hadamard(NodeId a, NodeId b) {
    return elementwise(Elementwise::hadamard, a, b);
  }
  NodeId add(NodeId a, NodeId b) { return elementwise(Elementwise::add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return elementwise(Elementwise::sub, a, b); }

  /// Sum of all entries, as a length-1 node.
  NodeId sum(NodeId a);
  /// Scalar-times-tensor; the only broadcasting the tape allows.
  NodeId scale(NodeId a, double factor);
  /// Numerically stable binary cross-entropy on a length-1 logit node.
  NodeId bce_with_logits(NodeId logit, double label);

  std::span<const double> value(NodeId id) const;
  double scalar(NodeId id) const;
  std::size_t rows(NodeId id) const { return nodes_[id.index].rows; }
  std::size_t cols(NodeId id) const { return nodes_[id.index].cols; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Adds seed * d(output)/d(param) into `accumulate` for every parameter
  /// leaf. Constants receive nothing. `output` must hold exactly one value.
  void backward(NodeId output, Gradients& accumulate, double seed = 1.0);
  Gradients backward(NodeId output, const ParamSet& params);

  void clear();

 private:
  enum class Op : std::uint8_t {
    constant,
    parameter,
    diag_affine,
    dense_affine,
    matvec,
    sigmoid,
    tanh,
    exp_neg,
    max0,
    one_minus,
    hadamard,
    add,
    sub,
    sum,
    scale,
    bce,
  };

  struct Node {
    Op op;
    bool needs_grad;
    std::uint32_t a, b, c;
    std::uint32_t offset;
    std::uint32_t rows, cols;
    std::int32_t param;
    double aux;
  };

  NodeId push(Op op, std::uint32_t rows, std::uint32_t cols, bool needs_grad,
              std::uint32_t a = 0, std::uint32_t b = 0, std::uint32_t c = 0);
  const Node& node(NodeId id) const;
  std::size_t length(const Node& n) const {
    return static_cast<std::size_t>(n.rows) * n.cols;
  }
  void check_finite(NodeId id, const char* what) const;

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
};

/// Builds a scalar output on `tape` from parameter leaves, one per ParamSet
/// entry in index order.
using ScalarBuilder =
    std::function<NodeId(Tape& tape, std::span<const NodeId> params)>;

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients against central differences over every
/// parameter entry. Relative error is
/// |a - n| / max(1e-8, |a| + |n|).
GradcheckResult gradcheck(const ScalarBuilder& f, const ParamSet& params,
                          double step);

}  // namespace irnn::nd
