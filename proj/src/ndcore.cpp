// SPDX-License-Identifier: Apache-2.0
#include "irnn/ndcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace irnn::nd {

namespace {

std::string shape_string(std::size_t rows, std::size_t cols) {
  std::ostringstream os;
  os << "(" << rows << "x" << cols << ")";
  return os.str();
}

double sigmoid_value(double v) {
  if (v >= 0.0) {
    return 1.0 / (1.0 + std::exp(-v));
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------- Tensor

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) {
    n *= s;
  }
  return n;
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape.size() > 2) {
    throw DimensionError("tensor rank above 2 is not supported");
  }
  if (shape_product(shape) != data.size()) {
    throw DimensionError("tensor shape does not match data length");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

std::size_t Tensor::rows() const {
  if (shape.size() == 2) {
    return shape[0];
  }
  return shape.empty() ? 1 : shape[0];
}

std::size_t Tensor::cols() const { return shape.size() == 2 ? shape[1] : 1; }

// -------------------------------------------------------------- ParamSet

std::size_t ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) {
    throw ContractError("duplicate parameter name: " + name);
  }
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
  return tensors_.size() - 1;
}

std::size_t ParamSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) {
      return i;
    }
  }
  throw ContractError("unknown parameter: " + std::string(name));
}

bool ParamSet::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) {
    n += t.size();
  }
  return n;
}

Gradients zeros_like(const ParamSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    g.push_back(Tensor::zeros(params.at(i).shape));
  }
  return g;
}

// ------------------------------------------------------------------ Tape

NodeId Tape::push(Op op, std::uint32_t rows, std::uint32_t cols,
                  bool needs_grad, std::uint32_t a, std::uint32_t b,
                  std::uint32_t c) {
  Node n{};
  n.op = op;
  n.needs_grad = needs_grad;
  n.a = a;
  n.b = b;
  n.c = c;
  n.offset = static_cast<std::uint32_t>(values_.size());
  n.rows = rows;
  n.cols = cols;
  n.param = -1;
  n.aux = 0.0;
  values_.resize(values_.size() + static_cast<std::size_t>(rows) * cols);
  nodes_.push_back(n);
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw ContractError("node id out of range");
  }
  return nodes_[id.index];
}

void Tape::check_finite(NodeId id, const char* what) const {
  const Node& n = nodes_[id.index];
  const double* v = values_.data() + n.offset;
  for (std::size_t i = 0; i < length(n); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(std::string("non-finite value produced by ") + what);
    }
  }
}

std::span<const double> Tape::value(NodeId id) const {
  const Node& n = node(id);
  return {values_.data() + n.offset, length(n)};
}

double Tape::scalar(NodeId id) const {
  const Node& n = node(id);
  if (length(n) != 1) {
    throw ContractError("node is not a scalar");
  }
  return values_[n.offset];
}

NodeId Tape::constant(std::span<const double> values) {
  const NodeId id =
      push(Op::constant, static_cast<std::uint32_t>(values.size()), 1, false);
  std::copy(values.begin(), values.end(),
            values_.begin() + nodes_[id.index].offset);
  check_finite(id, "constant");
  return id;
}

NodeId Tape::constant(const Tensor& value) {
  const NodeId id = push(Op::constant, static_cast<std::uint32_t>(value.rows()),
                         static_cast<std::uint32_t>(value.cols()), false);
  std::copy(value.data.begin(), value.data.end(),
            values_.begin() + nodes_[id.index].offset);
  check_finite(id, "constant");
  return id;
}

NodeId Tape::parameter(std::size_t param_index, const Tensor& value) {
  const NodeId id = push(Op::parameter, static_cast<std::uint32_t>(value.rows()),
                         static_cast<std::uint32_t>(value.cols()), true);
  nodes_[id.index].param = static_cast<std::int32_t>(param_index);
  std::copy(value.data.begin(), value.data.end(),
            values_.begin() + nodes_[id.index].offset);
  check_finite(id, "parameter");
  return id;
}

NodeId Tape::diag_affine(NodeId w, NodeId x, NodeId b) {
  const Node nw = node(w), nx = node(x), nb = node(b);
  const std::size_t d = length(nw);
  if (length(nx) != d || length(nb) != d || nw.cols != 1 || nx.cols != 1) {
    throw DimensionError("diag_affine: length mismatch " +
                         shape_string(nw.rows, nw.cols) + " " +
                         shape_string(nx.rows, nx.cols) + " " +
                         shape_string(nb.rows, nb.cols));
  }
  const NodeId id = push(Op::diag_affine, static_cast<std::uint32_t>(d), 1,
                         nw.needs_grad || nx.needs_grad || nb.needs_grad,
                         w.index, x.index, b.index);
  double* out = values_.data() + nodes_[id.index].offset;
  const double* pw = values_.data() + nw.offset;
  const double* px = values_.data() + nx.offset;
  const double* pb = values_.data() + nb.offset;
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = pw[i] * px[i] + pb[i];
  }
  check_finite(id, "diag_affine");
  return id;
}

NodeId Tape::dense_affine(NodeId w, NodeId x, NodeId b) {
  const Node nw = node(w), nx = node(x), nb = node(b);
  if (nx.cols != 1 || length(nx) != nw.cols || length(nb) != nw.rows) {
    throw DimensionError("dense_affine: shape mismatch W" +
                         shape_string(nw.rows, nw.cols) + " x" +
                         shape_string(nx.rows, nx.cols) + " b" +
                         shape_string(nb.rows, nb.cols));
  }
  const NodeId id = push(Op::dense_affine, nw.rows, 1,
                         nw.needs_grad || nx.needs_grad || nb.needs_grad,
                         w.index, x.index, b.index);
  double* out = values_.data() + nodes_[id.index].offset;
  const double* pw = values_.data() + nw.offset;
  const double* px = values_.data() + nx.offset;
  const double* pb = values_.data() + nb.offset;
  for (std::size_t r = 0; r < nw.rows; ++r) {
    double acc = pb[r];
    const double* row = pw + r * nw.cols;
    for (std::size_t c = 0; c < nw.cols; ++c) {
      acc += row[c] * px[c];
    }
    out[r] = acc;
  }
  check_finite(id, "dense_affine");
  return id;
}

NodeId Tape::matvec(NodeId w, NodeId x) {
  const Node nw = node(w), nx = node(x);
  if (nx.cols != 1 || length(nx) != nw.cols) {
    throw DimensionError("matvec: shape mismatch W" +
                         shape_string(nw.rows, nw.cols) + " x" +
                         shape_string(nx.rows, nx.cols));
  }
  const NodeId id = push(Op::matvec, nw.rows, 1,
                         nw.needs_grad || nx.needs_grad, w.index, x.index);
  double* out = values_.data() + nodes_[id.index].offset;
  const double* pw = values_.data() + nw.offset;
  const double* px = values_.data() + nx.offset;
  for (std::size_t r = 0; r < nw.rows; ++r) {
    double acc = 0.0;
    const double* row = pw + r * nw.cols;
    for (std::size_t c = 0; c < nw.cols; ++c) {
      acc += row[c] * px[c];
    }
    out[r] = acc;
  }
  check_finite(id, "matvec");
  return id;
}

NodeId Tape::elementwise(Elementwise kind, NodeId a) {
  const Node na = node(a);
  Op op{};
  switch (kind) {
    case Elementwise::sigmoid: op = Op::sigmoid; break;
    case Elementwise::tanh: op = Op::tanh; break;
    case Elementwise::exp_neg: op = Op::exp_neg; break;
    case Elementwise::max0: op = Op::max0; break;
    case Elementwise::one_minus: op = Op::one_minus; break;
    default:
      throw ContractError("binary elementwise kind used with one operand");
  }
  const NodeId id = push(op, na.rows, na.cols, na.needs_grad, a.index);
  double* out = values_.data() + nodes_[id.index].offset;
  const double* in = values_.data() + na.offset;
  const std::size_t n = length(na);
  switch (op) {
    case Op::sigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_value(in[i]);
      break;
    case Op::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
      break;
    case Op::exp_neg:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(-in[i]);
      break;
    case Op::max0:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case Op::one_minus:
      for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 - in[i];
      break;
    default:
      break;
  }
  check_finite(id, "elementwise");
  return id;
}

NodeId Tape::elementwise(Elementwise kind, NodeId a, NodeId b) {
  const Node na = node(a), nb = node(b);
  if (na.rows != nb.rows || na.cols != nb.cols) {
    throw DimensionError("elementwise: shape mismatch " +
                         shape_string(na.rows, na.cols) + " vs " +
                         shape_string(nb.rows, nb.cols));
  }
  Op op{};
  switch (kind) {
    case Elementwise::hadamard: op = Op::hadamard; break;
    case Elementwise::add: op = Op::add; break;
    case Elementwise::sub: op = Op::sub; break;
    default:
      throw ContractError("unary elementwise kind used with two operands");
  }
  const NodeId id = push(op, na.rows, na.cols, na.needs_grad || nb.needs_grad,
                         a.index, b.index);
  double* out = values_.data() + nodes_[id.index].offset;
  const double* pa = values_.data() + na.offset;
  const double* pb = values_.data() + nb.offset;
  const std::size_t n = length(na);
  switch (op) {
    case Op::hadamard:
      for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] * pb[i];
      break;
    case Op::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] + pb[i];
      break;
    case Op::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] - pb[i];
      break;
    default:
      break;
  }
  check_finite(id, "elementwise");
  return id;
}

NodeId Tape::sum(NodeId a) {
  const Node na = node(a);
  const NodeId id = push(Op::sum, 1, 1, na.needs_grad, a.index);
  const double* in = values_.data() + na.offset;
  double acc = 0.0;
  for (std::size_t i = 0; i < length(na); ++i) {
    acc += in[i];
  }
  values_[nodes_[id.index].offset] = acc;
  check_finite(id, "sum");
  return id;
}

NodeId Tape::scale(NodeId a, double factor) {
  const Node na = node(a);
  const NodeId id = push(Op::scale, na.rows, na.cols, na.needs_grad, a.index);
  nodes_[id.index].aux = factor;
  double* out = values_.data() + nodes_[id.index].offset;
  const double* in = values_.data() + na.offset;
  for (std::size_t i = 0; i < length(na); ++i) {
    out[i] = factor * in[i];
  }
  check_finite(id, "scale");
  return id;
}

NodeId Tape::bce_with_logits(NodeId logit, double label) {
  const Node nl = node(logit);
  if (length(nl) != 1) {
    throw DimensionError("bce_with_logits expects a single logit");
  }
  const double z = values_[nl.offset];
  if (!std::isfinite(z)) {
    throw NumericError("non-finite logit");
  }
  const NodeId id = push(Op::bce, 1, 1, nl.needs_grad, logit.index);
  nodes_[id.index].aux = label;
  values_[nodes_[id.index].offset] =
      std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
  return id;
}

void Tape::clear() {
  nodes_.clear();
  values_.clear();
}

void Tape::backward(NodeId output, Gradients& accumulate, double seed) {
  const Node& out = node(output);
  if (length(out) != 1) {
    throw ContractError("backward requires a scalar output");
  }
  grads_.assign(values_.size(), 0.0);
  grads_[out.offset] = seed;

  const double* val = values_.data();
  double* grad = grads_.data();

  for (std::int64_t i = output.index; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad) {
      continue;
    }
    const std::size_t len = length(n);
    const double* g = grad + n.offset;
    switch (n.op) {
      case Op::constant:
        break;
      case Op::parameter: {
        Tensor& dst = accumulate.at(static_cast<std::size_t>(n.param));
        if (dst.size() != len) {
          throw DimensionError("gradient buffer shape mismatch");
        }
        for (std::size_t k = 0; k < len; ++k) {
          dst.data[k] += g[k];
        }
        break;
      }
      case Op::diag_affine: {
        const Node& w = nodes_[n.a];
        const Node& x = nodes_[n.b];
        const Node& b = nodes_[n.c];
        if (w.needs_grad) {
          for (std::size_t k = 0; k < len; ++k) grad[w.offset + k] += g[k] * val[x.offset + k];
        }
        if (x.needs_grad) {
          for (std::size_t k = 0; k < len; ++k) grad[x.offset + k] += g[k] * val[w.offset + k];
        }
        if (b.needs_grad) {
          for (std::size_t k = 0; k < len; ++k) grad[b.offset + k] += g[k];
        }
        break;
      }
      case Op::dense_affine:
      case Op::matvec: {
        const Node& w = nodes_[n.a];
        const Node& x = nodes_[n.b];
        const std::size_t cols = w.cols;
        if (w.needs_grad) {
          for (std::size_t r = 0; r < n.rows; ++r) {
            double* gw = grad + w.offset + r * cols;
            for (std::size_t c = 0; c < cols; ++c) gw[c] += g[r] * val[x.offset + c];
          }
        }
        if (x.needs_grad) {
          for (std::size_t r = 0; r < n.rows; ++r) {
            const double* wr = val + w.offset + r * cols;
            for (std::size_t c = 0; c < cols; ++c) grad[x.offset + c] += g[r] * wr[c];
          }
        }
        if (n.op == Op::dense_affine) {
          const Node& b = nodes_[n.c];
          if (b.needs_grad) {
            for (std::size_t k = 0; k < len; ++k) grad[b.offset + k] += g[k];
          }
        }
        break;
      }
      case Op::sigmoid: {
        const Node& a = nodes_[n.a];
        const double* y = val + n.offset;
        for (std::size_t k = 0; k < len; ++k) grad[a.offset + k] += g[k] * y[k] * (1.0 - y[k]);
        break;
      }
      case Op::tanh: {
        const Node& a = nodes_[n.a];
        const double* y = val + n.offset;
        for (std::size_t k = 0; k < len; ++k) grad[a.offset + k] += g[k] * (1.0 - y[k] * y[k]);
        break;
      }
      case Op::exp_neg: {
        const Node& a = nodes_[n.a];
        const double* y = val + n.offset;
        for (std::size_t k = 0; k < len; ++k) grad[a.offset + k] -= g[k] * y[k];
        break;
      }
      case Op::max0: {
        const Node& a = nodes_[n.a];
        const double* x = val + a.offset;
        for (std::size_t k = 0; k < len; ++k) {
          if (x[k] > 0.0) grad[a.offset + k] += g[k];
        }
        break;
      }
      case Op::one_minus: {
        const Node& a = nodes_[n.a];
        for (std::size_t k = 0; k < len; ++k) grad[a.offset + k] -= g[k];
        break;
      }
      case Op::hadamard: {
        const Node& a = nodes_[n.a];
        const Node& b = nodes_[n.b];
        if (a.needs_grad) {
          for (std::size_t k = 0; k < len; ++k) grad[a.offset + k] += g[k] * val[b.offset + k];
        }
        if (b.needs_grad) {
          for (std::size_t k = 0; k < len; ++k) grad[b.offset + k] += g[k] * val[a.offset + k];
        }
        break;
      }
      case Op::add:
      case Op::sub: {
        const Node& a = nodes_[n.a];
        const Node& b = nodes_[n.b];
        const double sign = n.op == Op::add ? 1.0 : -1.0;
        if (a.needs_grad) {
          for (std::size_t k = 0; k < len; ++k) grad[a.offset + k] += g[k];
        }
        if (b.needs_grad) {
          for (std::size_t k = 0; k < len; ++k) grad[b.offset + k] += sign * g[k];
        }
        break;
      }
      case Op::sum: {
        const Node& a = nodes_[n.a];
        for (std::size_t k = 0; k < length(a); ++k) grad[a.offset + k] += g[0];
        break;
      }
      case Op::scale: {
        const Node& a = nodes_[n.a];
        for (std::size_t k = 0; k < len; ++k) grad[a.offset + k] += g[k] * n.aux;
        break;
      }
      case Op::bce: {
        const Node& a = nodes_[n.a];
        grad[a.offset] += g[0] * (sigmoid_value(val[a.offset]) - n.aux);
        break;
      }
    }
  }
}

Gradients Tape::backward(NodeId output, const ParamSet& params) {
  Gradients g = zeros_like(params);
  backward(output, g, 1.0);
  return g;
}

// ------------------------------------------------------------- gradcheck

namespace {

double evaluate(const ScalarBuilder& f, const ParamSet& params, Tape& tape) {
  tape.clear();
  std::vector<NodeId> leaves;
  leaves.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    leaves.push_back(tape.parameter(i, params.at(i)));
  }
  const double v = tape.scalar(f(tape, leaves));
  if (!std::isfinite(v)) {
    throw NumericError("gradcheck: function value is not finite");
  }
  return v;
}

}  // namespace

GradcheckResult gradcheck(const ScalarBuilder& f, const ParamSet& params,
                          double step) {
  if (!(step > 0.0)) {
    throw ContractError("gradcheck step must be positive");
  }
  Tape tape;
  std::vector<NodeId> leaves;
  for (std::size_t i = 0; i < params.size(); ++i) {
    leaves.push_back(tape.parameter(i, params.at(i)));
  }
  const NodeId out = f(tape, leaves);
  if (!std::isfinite(tape.scalar(out))) {
    throw NumericError("gradcheck: function value is not finite");
  }
  const Gradients analytic = tape.backward(out, params);

  GradcheckResult result;
  ParamSet probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t k = 0; k < params.at(p).size(); ++k) {
      const double original = params.at(p).data[k];
      probe.at(p).data[k] = original + step;
      const double up = evaluate(f, probe, tape);
      probe.at(p).data[k] = original - step;
      const double down = evaluate(f, probe, tape);
      probe.at(p).data[k] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p].data[k];
      const double err =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > result.max_relative_error || (p == 0 && k == 0)) {
        result.max_relative_error = std::max(result.max_relative_error, err);
        result.worst_param = p;
        result.worst_entry = k;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace irnn::nd
