// Copyright 2026 The kpirl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kpirl/graph.h"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace kpirl {

const char* OpName(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kVariable: return "variable";
    case Op::kAdd: return "add";
    case Op::kSub: return "subtract";
    case Op::kMul: return "elementwise-multiply";
    case Op::kScale: return "scale";
    case Op::kScalarMul: return "scalar-multiply";
    case Op::kSquare: return "square";
    case Op::kExp: return "exponential";
    case Op::kRelu: return "rectified-linear";
    case Op::kSum: return "sum-reduce";
    case Op::kDot: return "dot-product";
    case Op::kMatVec: return "matrix-vector-product";
    case Op::kOuter: return "outer-product";
    case Op::kConcat: return "concatenate";
    case Op::kSlice: return "slice";
    case Op::kSin: return "sine";
    case Op::kCos: return "cosine";
  }
  return "?";
}

void Graph::Fail(Op op, const std::string& message) const {
  throw std::invalid_argument(std::string(OpName(op)) + ": " + message);
}

NodeId Graph::Append(Node node) {
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<int32_t>(nodes_.size() - 1)};
}

NodeId Graph::Variable(Tensor t) {
  Node n;
  n.op = Op::kVariable;
  n.requires_grad = true;
  n.value = std::move(t);
  return Append(std::move(n));
}

NodeId Graph::Constant(Tensor t) {
  Node n;
  n.op = Op::kConstant;
  n.requires_grad = false;
  n.value = std::move(t);
  return Append(std::move(n));
}

NodeId Graph::Primitive(Op op, std::span<const NodeId> parents, OpAttr attr) {
  if (op == Op::kConstant || op == Op::kVariable) {
    Fail(op, "leaf nodes are created with Variable()/Constant()");
  }
  for (NodeId p : parents) {
    if (!p.valid() || p.index >= static_cast<int32_t>(nodes_.size())) {
      Fail(op, "invalid parent id");
    }
  }
  Node n;
  n.op = op;
  n.attr = attr;
  n.parents.assign(parents.begin(), parents.end());
  n.value = Evaluate(op, attr, parents);
  for (NodeId p : parents) {
    if (nodes_[p.index].requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  return Append(std::move(n));
}

namespace {

int ExpectedArity(Op op) {
  switch (op) {
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kScalarMul:
    case Op::kDot:
    case Op::kMatVec:
    case Op::kOuter:
      return 2;
    case Op::kScale:
    case Op::kSquare:
    case Op::kExp:
    case Op::kRelu:
    case Op::kSum:
    case Op::kSlice:
    case Op::kSin:
    case Op::kCos:
      return 1;
    default:
      return -1;  // variadic or leaf
  }
}

}  // namespace

Tensor Graph::Evaluate(const Op op, const OpAttr& attr, std::span<const NodeId> parents) const {
  const int arity = ExpectedArity(op);
  if (arity >= 0 && static_cast<int>(parents.size()) != arity) {
    Fail(op, "expects " + std::to_string(arity) + " operands, got " +
                 std::to_string(parents.size()));
  }
  auto val = [&](int i) -> const Tensor& { return nodes_[parents[i].index].value; };

  switch (op) {
    case Op::kAdd:
    case Op::kSub: {
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      if (!a.same_shape(b)) {
        Fail(op, "shape mismatch " + a.ShapeString() + " vs " + b.ShapeString());
      }
      std::vector<double> out(a.values());
      const double sign = op == Op::kAdd ? 1.0 : -1.0;
      for (int64_t i = 0; i < a.size(); ++i) out[i] += sign * b[i];
      return a.rank() == 2 ? Tensor::Matrix(a.rows(), a.cols(), std::move(out))
                           : Tensor::Vector(std::move(out));
    }
    case Op::kMul: {
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      if (!a.same_shape(b)) {
        Fail(op, "shape mismatch " + a.ShapeString() + " vs " + b.ShapeString());
      }
      std::vector<double> out(a.values());
      for (int64_t i = 0; i < a.size(); ++i) out[i] *= b[i];
      return a.rank() == 2 ? Tensor::Matrix(a.rows(), a.cols(), std::move(out))
                           : Tensor::Vector(std::move(out));
    }
    case Op::kScale: {
      const Tensor& a = val(0);
      std::vector<double> out(a.values());
      for (double& v : out) v *= attr.factor;
      return a.rank() == 2 ? Tensor::Matrix(a.rows(), a.cols(), std::move(out))
                           : Tensor::Vector(std::move(out));
    }
    case Op::kScalarMul: {
      const Tensor& s = val(0);
      const Tensor& a = val(1);
      if (!s.is_scalar()) {
        Fail(op, "first operand must be scalar, got " + s.ShapeString());
      }
      std::vector<double> out(a.values());
      for (double& v : out) v *= s.scalar();
      return a.rank() == 2 ? Tensor::Matrix(a.rows(), a.cols(), std::move(out))
                           : Tensor::Vector(std::move(out));
    }
    case Op::kSquare: {
      const Tensor& a = val(0);
      std::vector<double> out(a.values());
      for (double& v : out) v *= v;
      return a.rank() == 2 ? Tensor::Matrix(a.rows(), a.cols(), std::move(out))
                           : Tensor::Vector(std::move(out));
    }
    case Op::kExp: {
      const Tensor& a = val(0);
      std::vector<double> out(a.values());
      for (double& v : out) v = std::exp(v);
      return a.rank() == 2 ? Tensor::Matrix(a.rows(), a.cols(), std::move(out))
                           : Tensor::Vector(std::move(out));
    }
    case Op::kRelu: {
      const Tensor& a = val(0);
      std::vector<double> out(a.values());
      for (double& v : out) v = v > 0.0 ? v : 0.0;
      return a.rank() == 2 ? Tensor::Matrix(a.rows(), a.cols(), std::move(out))
                           : Tensor::Vector(std::move(out));
    }
    case Op::kSin: {
      const Tensor& a = val(0);
      std::vector<double> out(a.values());
      for (double& v : out) v = std::sin(v);
      return a.rank() == 2 ? Tensor::Matrix(a.rows(), a.cols(), std::move(out))
                           : Tensor::Vector(std::move(out));
    }
    case Op::kCos: {
      const Tensor& a = val(0);
      std::vector<double> out(a.values());
      for (double& v : out) v = std::cos(v);
      return a.rank() == 2 ? Tensor::Matrix(a.rows(), a.cols(), std::move(out))
                           : Tensor::Vector(std::move(out));
    }
    case Op::kSum: {
      const Tensor& a = val(0);
      double acc = 0.0;
      for (int64_t i = 0; i < a.size(); ++i) acc += a[i];
      return Tensor::Scalar(acc);
    }
    case Op::kDot: {
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      if (a.rank() != 1 || b.rank() != 1 || a.rows() != b.rows()) {
        Fail(op, "needs equal-length vectors, got " + a.ShapeString() + " and " +
                     b.ShapeString());
      }
      double acc = 0.0;
      for (int64_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
      return Tensor::Scalar(acc);
    }
    case Op::kMatVec: {
      const Tensor& m = val(0);
      const Tensor& x = val(1);
      if (m.rank() != 2 || x.rank() != 1) {
        Fail(op, "needs matrix and vector, got " + m.ShapeString() + " and " +
                     x.ShapeString());
      }
      if (!attr.transposed) {
        if (x.rows() != m.cols()) {
          Fail(op, "shape mismatch " + m.ShapeString() + " * " + x.ShapeString());
        }
        std::vector<double> out(m.rows(), 0.0);
        for (int r = 0; r < m.rows(); ++r) {
          double acc = 0.0;
          for (int c = 0; c < m.cols(); ++c) acc += m.at(r, c) * x[c];
          out[r] = acc;
        }
        return Tensor::Vector(std::move(out));
      }
      if (x.rows() != m.rows()) {
        Fail(op, "shape mismatch " + m.ShapeString() + "^T * " + x.ShapeString());
      }
      std::vector<double> out(m.cols(), 0.0);
      for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) out[c] += m.at(r, c) * x[r];
      }
      return Tensor::Vector(std::move(out));
    }
    case Op::kOuter: {
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      if (a.rank() != 1 || b.rank() != 1) {
        Fail(op, "needs two vectors, got " + a.ShapeString() + " and " + b.ShapeString());
      }
      std::vector<double> out;
      out.reserve(a.size() * b.size());
      for (int64_t i = 0; i < a.size(); ++i) {
        for (int64_t j = 0; j < b.size(); ++j) out.push_back(a[i] * b[j]);
      }
      return Tensor::Matrix(a.rows(), b.rows(), std::move(out));
    }
    case Op::kConcat: {
      if (parents.empty()) Fail(op, "needs at least one operand");
      std::vector<double> out;
      for (size_t i = 0; i < parents.size(); ++i) {
        const Tensor& t = val(static_cast<int>(i));
        if (t.rank() != 1) {
          Fail(op, "operands must be vectors, got " + t.ShapeString());
        }
        out.insert(out.end(), t.values().begin(), t.values().end());
      }
      return Tensor::Vector(std::move(out));
    }
    case Op::kSlice: {
      const Tensor& a = val(0);
      if (a.rank() != 1) {
        Fail(op, "operand must be a vector, got " + a.ShapeString());
      }
      if (attr.begin < 0 || attr.end <= attr.begin || attr.end > a.rows()) {
        Fail(op, "bounds [" + std::to_string(attr.begin) + "," + std::to_string(attr.end) +
                     ") invalid for " + a.ShapeString());
      }
      return Tensor::Vector(std::vector<double>(a.values().begin() + attr.begin,
                                                a.values().begin() + attr.end));
    }
    default:
      Fail(op, "not a computable primitive");
  }
}

namespace {
inline std::span<const NodeId> One(const NodeId& a) { return {&a, 1}; }
}  // namespace

NodeId Graph::Add(NodeId a, NodeId b) {
  const NodeId p[] = {a, b};
  return Primitive(Op::kAdd, p);
}

NodeId Graph::Sub(NodeId a, NodeId b) {
  const NodeId p[] = {a, b};
  return Primitive(Op::kSub, p);
}

NodeId Graph::Mul(NodeId a, NodeId b) {
  const NodeId p[] = {a, b};
  return Primitive(Op::kMul, p);
}

NodeId Graph::Scale(NodeId a, double factor) {
  OpAttr attr;
  attr.factor = factor;
  return Primitive(Op::kScale, One(a), attr);
}

NodeId Graph::ScalarMul(NodeId scalar, NodeId tensor) {
  const NodeId p[] = {scalar, tensor};
  return Primitive(Op::kScalarMul, p);
}

NodeId Graph::Square(NodeId a) { return Primitive(Op::kSquare, One(a)); }
NodeId Graph::Exp(NodeId a) { return Primitive(Op::kExp, One(a)); }
NodeId Graph::Relu(NodeId a) { return Primitive(Op::kRelu, One(a)); }
NodeId Graph::Sum(NodeId a) { return Primitive(Op::kSum, One(a)); }

NodeId Graph::Dot(NodeId a, NodeId b) {
  const NodeId p[] = {a, b};
  return Primitive(Op::kDot, p);
}

NodeId Graph::MatVec(NodeId matrix, NodeId vec, bool transposed) {
  OpAttr attr;
  attr.transposed = transposed;
  const NodeId p[] = {matrix, vec};
  return Primitive(Op::kMatVec, p, attr);
}

NodeId Graph::Outer(NodeId a, NodeId b) {
  const NodeId p[] = {a, b};
  return Primitive(Op::kOuter, p);
}

NodeId Graph::Concat(std::span<const NodeId> parts) { return Primitive(Op::kConcat, parts); }

NodeId Graph::Slice(NodeId a, int begin, int end) {
  OpAttr attr;
  attr.begin = begin;
  attr.end = end;
  return Primitive(Op::kSlice, One(a), attr);
}

NodeId Graph::Sin(NodeId a) { return Primitive(Op::kSin, One(a)); }
NodeId Graph::Cos(NodeId a) { return Primitive(Op::kCos, One(a)); }

std::vector<NodeId> Graph::Gradient(NodeId output, std::span<const NodeId> inputs) {
  if (!output.valid() || output.index >= static_cast<int32_t>(nodes_.size())) {
    throw std::invalid_argument("gradient: invalid output node");
  }
  if (!nodes_[output.index].value.is_scalar()) {
    throw std::invalid_argument("gradient: output must be scalar, got shape " +
                                nodes_[output.index].value.ShapeString());
  }
  const int32_t n = static_cast<int32_t>(nodes_.size());

  // anc[i]: the output depends on node i.
  std::vector<char> anc(n, 0);
  {
    std::vector<int32_t> stack = {output.index};
    anc[output.index] = 1;
    while (!stack.empty()) {
      const int32_t id = stack.back();
      stack.pop_back();
      for (NodeId p : nodes_[id].parents) {
        if (!anc[p.index]) {
          anc[p.index] = 1;
          stack.push_back(p.index);
        }
      }
    }
  }
  // dep[i]: node i depends on (or is) one of the requested inputs. Parents
  // precede children, so one ascending sweep suffices.
  std::vector<char> dep(n, 0);
  for (NodeId in : inputs) {
    if (!in.valid() || in.index >= n) {
      throw std::invalid_argument("gradient: invalid input node");
    }
    dep[in.index] = 1;
  }
  for (int32_t id = 0; id < n; ++id) {
    if (dep[id]) continue;
    for (NodeId p : nodes_[id].parents) {
      if (dep[p.index]) {
        dep[id] = 1;
        break;
      }
    }
  }

  // Cotangent node per tape position; only positions on an input->output
  // path receive one.
  std::vector<NodeId> cot(n);
  if (dep[output.index]) {
    cot[output.index] = Constant(Tensor::Ones(1));
  }

  auto accumulate = [&](NodeId parent, NodeId grad) {
    if (!cot[parent.index].valid()) {
      cot[parent.index] = grad;
    } else {
      cot[parent.index] = Add(cot[parent.index], grad);
    }
  };
  auto needs = [&](NodeId p) { return dep[p.index] != 0; };

  for (int32_t id = output.index; id >= 0; --id) {
    if (!cot[id].valid() || !anc[id]) continue;
    const NodeId g = cot[id];
    // Copy what we need: Appends below may reallocate nodes_.
    const Op op = nodes_[id].op;
    const OpAttr attr = nodes_[id].attr;
    const std::vector<NodeId> parents = nodes_[id].parents;
    const NodeId self{id};

    switch (op) {
      case Op::kConstant:
      case Op::kVariable:
        break;
      case Op::kAdd:
        if (needs(parents[0])) accumulate(parents[0], g);
        if (needs(parents[1])) accumulate(parents[1], g);
        break;
      case Op::kSub:
        if (needs(parents[0])) accumulate(parents[0], g);
        if (needs(parents[1])) accumulate(parents[1], Scale(g, -1.0));
        break;
      case Op::kMul:
        if (needs(parents[0])) accumulate(parents[0], Mul(g, parents[1]));
        if (needs(parents[1])) accumulate(parents[1], Mul(g, parents[0]));
        break;
      case Op::kScale:
        if (needs(parents[0])) accumulate(parents[0], Scale(g, attr.factor));
        break;
      case Op::kScalarMul:
        if (needs(parents[0])) accumulate(parents[0], Sum(Mul(g, parents[1])));
        if (needs(parents[1])) accumulate(parents[1], ScalarMul(parents[0], g));
        break;
      case Op::kSquare:
        if (needs(parents[0])) accumulate(parents[0], Scale(Mul(g, parents[0]), 2.0));
        break;
      case Op::kExp:
        if (needs(parents[0])) accumulate(parents[0], Mul(g, self));
        break;
      case Op::kRelu:
        if (needs(parents[0])) {
          // Derivative mask frozen at record time; 0 at the kink.
          const Tensor& x = nodes_[parents[0].index].value;
          std::vector<double> mask(x.size());
          for (int64_t i = 0; i < x.size(); ++i) mask[i] = x[i] > 0.0 ? 1.0 : 0.0;
          NodeId m = Constant(x.rank() == 2
                                  ? Tensor::Matrix(x.rows(), x.cols(), std::move(mask))
                                  : Tensor::Vector(std::move(mask)));
          accumulate(parents[0], Mul(g, m));
        }
        break;
      case Op::kSin:
        if (needs(parents[0])) accumulate(parents[0], Mul(g, Cos(parents[0])));
        break;
      case Op::kCos:
        if (needs(parents[0])) accumulate(parents[0], Scale(Mul(g, Sin(parents[0])), -1.0));
        break;
      case Op::kSum:
        if (needs(parents[0])) {
          const Tensor& x = nodes_[parents[0].index].value;
          NodeId ones = Constant(x.rank() == 2
                                     ? Tensor::Matrix(x.rows(), x.cols(),
                                                      std::vector<double>(x.size(), 1.0))
                                     : Tensor::Ones(static_cast<int>(x.size())));
          accumulate(parents[0], ScalarMul(g, ones));
        }
        break;
      case Op::kDot:
        if (needs(parents[0])) accumulate(parents[0], ScalarMul(g, parents[1]));
        if (needs(parents[1])) accumulate(parents[1], ScalarMul(g, parents[0]));
        break;
      case Op::kMatVec:
        if (!attr.transposed) {
          if (needs(parents[1])) accumulate(parents[1], MatVec(parents[0], g, true));
          if (needs(parents[0])) accumulate(parents[0], Outer(g, parents[1]));
        } else {
          if (needs(parents[1])) accumulate(parents[1], MatVec(parents[0], g, false));
          if (needs(parents[0])) accumulate(parents[0], Outer(parents[1], g));
        }
        break;
      case Op::kOuter:
        if (needs(parents[0])) accumulate(parents[0], MatVec(g, parents[1], false));
        if (needs(parents[1])) accumulate(parents[1], MatVec(g, parents[0], true));
        break;
      case Op::kConcat: {
        int offset = 0;
        for (NodeId p : parents) {
          const int len = static_cast<int>(nodes_[p.index].value.size());
          if (needs(p)) accumulate(p, Slice(g, offset, offset + len));
          offset += len;
        }
        break;
      }
      case Op::kSlice:
        if (needs(parents[0])) {
          const int total = static_cast<int>(nodes_[parents[0].index].value.size());
          if (attr.begin == 0 && attr.end == total) {
            accumulate(parents[0], g);
          } else {
            std::vector<NodeId> parts;
            if (attr.begin > 0) parts.push_back(Constant(Tensor::Zeros(attr.begin)));
            parts.push_back(g);
            if (attr.end < total) parts.push_back(Constant(Tensor::Zeros(total - attr.end)));
            accumulate(parents[0], Concat(parts));
          }
        }
        break;
    }
  }

  std::vector<NodeId> result;
  result.reserve(inputs.size());
  for (NodeId in : inputs) {
    if (cot[in.index].valid()) {
      result.push_back(cot[in.index]);
    } else {
      result.push_back(Constant(Tensor::ZerosLike(nodes_[in.index].value)));
    }
  }
  return result;
}

}  // namespace kpirl
