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

#ifndef KPIRL_CORE_GRAPH_H_
#define KPIRL_CORE_GRAPH_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpirl/tensor.h"

namespace kpirl {

// Primitive operations of the tape. Gradients of every primitive are emitted
// as further primitive nodes, so the tape supports repeated differentiation.
enum class Op : uint8_t {
  kConstant,
  kVariable,
  kAdd,
  kSub,
  kMul,        // elementwise multiply
  kScale,      // multiply by compile-time constant
  kScalarMul,  // scalar node times tensor node
  kSquare,
  kExp,
  kRelu,
  kSum,     // reduce to scalar
  kDot,     // vector dot product
  kMatVec,  // matrix-vector product, optionally transposed
  kOuter,   // outer product of two vectors
  kConcat,  // concatenate vectors
  kSlice,   // contiguous sub-vector
  kSin,
  kCos,
};

const char* OpName(Op op);

struct NodeId {
  int32_t index = -1;
  bool valid() const { return index >= 0; }
  friend bool operator==(NodeId a, NodeId b) { return a.index == b.index; }
};

// Extra operands for kScale (factor), kSlice (begin/end) and kMatVec
// (transposed).
struct OpAttr {
  double factor = 0.0;
  int32_t begin = 0;
  int32_t end = 0;
  bool transposed = false;
};

struct Node {
  Op op = Op::kConstant;
  bool requires_grad = false;
  OpAttr attr;
  std::vector<NodeId> parents;
  Tensor value;
};

// An append-only computation tape. Values are computed eagerly as nodes are
// recorded; node ids are indices into the tape and parents always precede
// children. A Graph is single-owner: independent graphs may run concurrently,
// one graph must not be shared across threads.
class Graph {
 public:
  NodeId Variable(Tensor t);
  NodeId Constant(Tensor t);

  NodeId Add(NodeId a, NodeId b);
  NodeId Sub(NodeId a, NodeId b);
  NodeId Mul(NodeId a, NodeId b);
  NodeId Scale(NodeId a, double factor);
  NodeId ScalarMul(NodeId scalar, NodeId tensor);
  NodeId Square(NodeId a);
  NodeId Exp(NodeId a);
  NodeId Relu(NodeId a);
  NodeId Sum(NodeId a);
  NodeId Dot(NodeId a, NodeId b);
  NodeId MatVec(NodeId matrix, NodeId vec, bool transposed = false);
  NodeId Outer(NodeId a, NodeId b);
  NodeId Concat(std::span<const NodeId> parts);
  NodeId Slice(NodeId a, int begin, int end);
  NodeId Sin(NodeId a);
  NodeId Cos(NodeId a);

  // Generic entry point used by the named builders above.
  NodeId Primitive(Op op, std::span<const NodeId> parents, OpAttr attr = {});

  // Reverse-mode differentiation of a scalar-valued node. Returns one node
  // per input, shaped like that input (a zero constant when the output does
  // not depend on it). The returned nodes are ordinary tape nodes, so they
  // can be differentiated again.
  std::vector<NodeId> Gradient(NodeId output, std::span<const NodeId> inputs);

  const Node& node(NodeId id) const { return nodes_[id.index]; }
  const Tensor& value(NodeId id) const { return nodes_[id.index].value; }
  double scalar(NodeId id) const { return nodes_[id.index].value.scalar(); }
  int64_t size() const { return static_cast<int64_t>(nodes_.size()); }

 private:
  NodeId Append(Node node);
  Tensor Evaluate(const Op op, const OpAttr& attr, std::span<const NodeId> parents) const;
  [[noreturn]] void Fail(Op op, const std::string& message) const;

  std::vector<Node> nodes_;
};

}  // namespace kpirl

#endif  // KPIRL_CORE_GRAPH_H_
