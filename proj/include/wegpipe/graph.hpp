#pragma once

#include <cstdint>
#include <vector>

#include "wegpipe/tensor.hpp"

namespace wegpipe {

using NodeId = int32_t;

enum class Op : uint8_t {
    Leaf,
    Matmul,
    Transpose,
    Add,
    AddBias,
    Mul,
    Scale,
    Softmax,
    LayerNorm,
    Gelu,
    Reshape,
    SliceRows,
    SliceCols,
    ConcatRows,
    ConcatCols,
    MeanAxis,
    SumAll,
    Select,
    BceLoss,
};

struct Node {
    Op op = Op::Leaf;
    std::vector<NodeId> in;
    Tensor value;
    Tensor grad;      // filled by backward()
    Tensor rel;       // filled by relprop()
    bool requires_grad = false;
    bool is_param = false;
    double fscalar = 0.0;         // scale factor / layer-norm eps
    std::vector<int64_t> attrs;   // axis / slice bounds / select index
    std::vector<Tensor> saved;    // op-specific activations kept for backward
};

// Tape-style compute graph. Nodes are appended in execution order, which is
// a topological order by construction; backward() and relprop() walk the
// tape once in reverse. One graph is owned by one thread at a time.
//
// backward() accumulates d(loss)/d(node) into every node reachable from a
// requires_grad leaf, resetting all gradients first, so repeated calls on
// the same graph are independent and deterministic.
//
// relprop() runs conservation-style relevance propagation from a seed node
// down to the leaves: the z-rule (with an optional stabilizer) for linear
// layers, proportional splitting for additions and bilinear products, and
// identity pass-through for softmax, layer-norm and GELU.
class Graph {
public:
    NodeId input(Tensor t) { return leaf(std::move(t), false); }
    NodeId leaf(Tensor t, bool requires_grad);
    NodeId param(Tensor t); // requires_grad leaf marked as a model parameter

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId add_bias(NodeId x, NodeId bias);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId softmax(NodeId a, int64_t axis);
    NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-6);
    NodeId gelu(NodeId a);
    NodeId reshape(NodeId a, std::vector<int64_t> shape);
    NodeId slice_rows(NodeId a, int64_t r0, int64_t r1);
    NodeId slice_cols(NodeId a, int64_t c0, int64_t c1);
    NodeId concat_rows(NodeId a, NodeId b);
    NodeId concat_cols(NodeId a, NodeId b);
    NodeId mean_axis(NodeId a, int64_t axis);
    NodeId sum_all(NodeId a);
    NodeId select(NodeId a, int64_t flat_index);
    NodeId bce_multilabel(NodeId logits, const Tensor& targets);

    const Tensor& value(NodeId id) const { return node(id).value; }
    const Tensor& grad(NodeId id) const { return node(id).grad; }
    const Tensor& relevance(NodeId id) const { return node(id).rel; }

    void backward(NodeId loss);
    void relprop(NodeId seed, const Tensor& seed_rel, double eps = 1e-9);

    size_t num_nodes() const { return nodes_.size(); }
    const Node& node(NodeId id) const;

private:
    std::vector<Node> nodes_;

    Node& mut(NodeId id);
    NodeId push(Node n);
    Tensor& ensure_grad(NodeId id);
    Tensor& ensure_rel(NodeId id);
    void backward_node(NodeId id);
    void relprop_node(NodeId id, double eps);
};

} // namespace wegpipe
