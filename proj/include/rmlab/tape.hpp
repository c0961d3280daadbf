#pragma once

#include <functional>
#include <vector>

#include "rmlab/tensor.hpp"

namespace rmlab {

// Index into the tape's node list. Ids are assigned in creation order, which
// is a topological order by construction: an op can only consume nodes that
// already exist.
using NodeId = int;

// Define-by-run reverse-mode autodiff tape. Records every op as a node with
// a backward closure; backward() replays the closures in reverse id order,
// touching each reachable node exactly once. Every op validates shapes up
// front and checks its output for non-finite values.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // -- node creation ---------------------------------------------------

  NodeId leaf(Tensor value, bool requires_grad = false);
  NodeId constant(Tensor value) { return leaf(std::move(value), false); }
  NodeId constant_scalar(double v) { return leaf(Tensor::scalar(v), false); }

  // -- elementwise -----------------------------------------------------

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);
  NodeId neg(NodeId a) { return scale(a, -1.0); }
  NodeId gelu(NodeId a);      // exact erf form
  NodeId softplus(NodeId a);  // stable: max(x,0) + log1p(exp(-|x|))
  NodeId sigmoid(NodeId a);

  // -- linear algebra ----------------------------------------------------

  // a: [M,K] or [B,M,K]; b: [K,N]. Shared weight applied per batch row.
  NodeId matmul(NodeId a, NodeId b);
  // a: [B,M,K]; b: [B,K,N].
  NodeId bmatmul(NodeId a, NodeId b);
  // Swap the trailing two dims of a rank-2 or rank-3 tensor.
  NodeId transpose_last(NodeId a);

  // -- normalization and reductions --------------------------------------

  // Softmax over the last dimension, max-subtracted row by row.
  NodeId softmax_lastdim(NodeId a);
  // Per-row layer norm over the last dimension. gain/bias have shape [D].
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
  NodeId sum_all(NodeId a);   // -> [1]
  NodeId mean_all(NodeId a);  // -> [1]
  // Elementwise sum of same-shaped nodes (non-empty list).
  NodeId sum_nodes(const std::vector<NodeId>& parts);

  // -- broadcasting --------------------------------------------------------

  // b's shape must be a suffix of a's shape; b is tiled across the leading
  // dims. Covers bias rows ([..,D] + [D]) and positional tables
  // ([B,S,D] + [S,D]).
  NodeId add_suffix(NodeId a, NodeId b);
  // a: [1, rest...] -> [n, rest...]. Backward sums over the new dim.
  NodeId expand_leading(NodeId a, int n);

  // -- indexing and reshaping ----------------------------------------------

  NodeId slice_lastdim(NodeId a, int start, int len);
  NodeId concat_lastdim(const std::vector<NodeId>& parts);
  // [B,S,D] -> [B,D] (row `pos` of each batch); [S,D] -> [D].
  NodeId select_position(NodeId a, int pos);
  // Mean over the second-to-last dim: [B,S,D] -> [B,D]; [S,D] -> [D].
  NodeId mean_rows(NodeId a);
  NodeId reshape(NodeId a, std::vector<int> shape);
  // Single element by flat index -> [1].
  NodeId element(NodeId a, int flat_index);

  // -- access ---------------------------------------------------------------

  const Tensor& value(NodeId id) const { return node_at(id).value; }
  const Tensor& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return node_at(id).requires_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // -- reverse pass ----------------------------------------------------------

  // root must be scalar-shaped ([1]). Zeroes all grads, seeds d(root)=1 and
  // runs backward closures of nodes reachable from root in reverse id order.
  void backward(NodeId root);
  void zero_grad();

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated only when requires_grad
    bool requires_grad = false;
    std::vector<NodeId> inputs;
    std::function<void(Tape&, NodeId)> backward_fn;  // (tape, own id)
  };

  Node& node_at(NodeId id);
  const Node& node_at(NodeId id) const;
  NodeId push(Tensor value, std::vector<NodeId> inputs,
              std::function<void(Tape&, NodeId)> backward_fn, const char* op_name);

  std::vector<Node> nodes_;
};

// y = x @ w + b for x [..,K], w [K,N], b [N].
NodeId affine(Tape& tape, NodeId x, NodeId w, NodeId b);

// Projection weights of one attention block, as tape nodes. The key
// projection carries no bias: a constant shift of every key moves all
// attention logits of a row by the same amount, which softmax cancels, so
// a key bias is a dead parameter.
struct MhaWeights {
  NodeId wq, bq, wk, wv, bv, wo, bo;
};

// Standard multi-head attention. query [B,Q,D], keys/values [B,S,D],
// D divisible by heads, per-head scaling 1/sqrt(D/heads). Built entirely
// from tape primitives so it differentiates for free.
NodeId multi_head_attention(Tape& tape, NodeId query, NodeId keys, NodeId values,
                            const MhaWeights& w, int heads);

}  // namespace rmlab
