#pragma once

#include <memory>
#include <string>
#include <vector>

#include "wegpipe/graph.hpp"
#include "wegpipe/tensor.hpp"

namespace wegpipe {

// DeiT-style ViT: patch embedding, class token at position 0, learned
// positional embeddings, pre-norm blocks (LN -> MHSA -> residual -> LN ->
// MLP(GELU) -> residual), final LN, linear head on the class token.
struct ViTConfig {
    int64_t image_size = 64;
    int64_t patch_size = 8;
    int64_t embed_dim = 64;
    int64_t num_heads = 4;
    int64_t num_blocks = 6;
    double mlp_ratio = 2.0;
    int64_t num_classes = 3;

    void validate() const;

    int64_t grid() const { return image_size / patch_size; }
    int64_t tokens() const { return grid() * grid(); }
    int64_t seq_len() const { return tokens() + 1; }
    int64_t head_dim() const { return embed_dim / num_heads; }
    int64_t patch_dim() const { return 3 * patch_size * patch_size; }
    int64_t mlp_hidden() const;
};

struct ViTModel {
    ViTConfig config;
    std::vector<std::string> names;
    std::vector<Tensor> params; // parallel to names, canonical order

    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;
    int64_t total_elements() const;
};

// Deterministic initialization: truncated normal (std 0.02) projections,
// zero biases, normal (std 0.02) class token and positional embedding,
// unit/zero layer-norm affine.
ViTModel build_model(const ViTConfig& config, uint64_t seed);

// image [3 x H x W] -> [s x 3*p*p]; row i is patch i in raster order,
// flattened channel-major.
Tensor patchify(const Tensor& image, int64_t patch_size);

// Forward-pass record: the compute graph plus the node ids needed to reach
// per-block per-head attention matrices, logits, and pre-head features.
struct AttentionTrace {
    std::shared_ptr<Graph> graph;
    int64_t num_blocks = 0;
    int64_t num_heads = 0;
    int64_t seq = 0;
    std::vector<std::vector<NodeId>> attn_nodes; // [block][head], each (s+1)x(s+1)
    NodeId logits_id = -1;
    NodeId features_id = -1; // (s+1) x D after the final norm
    NodeId input_id = -1;
    std::vector<NodeId> param_ids; // same order as ViTModel::params

    Tensor attention(int64_t block) const;           // [h x n x n]
    Tensor attention_grad(int64_t block) const;      // after graph->backward
    Tensor attention_relevance(int64_t block) const; // after graph->relprop
    const Tensor& logits() const;
    const Tensor& token_features() const;
};

// Builds the forward graph for one image. Attention node ids are recorded
// only when record_attention is set; logits are identical either way.
AttentionTrace vit_build_graph(const ViTModel& model, const Tensor& image, bool record_attention);

struct ForwardResult {
    Tensor logits; // [1 x c]
    std::shared_ptr<AttentionTrace> trace;
};

ForwardResult vit_forward(const ViTModel& model, const Tensor& image, bool record_attention);

// Rescales the positional embedding's patch grid (bilinear, class-token row
// kept) so a trained model can run on a different input resolution.
ViTModel resize_for_image(const ViTModel& model, int64_t new_image_size);

// Weight container: <prefix>.manifest.json (names, shapes, offsets) plus
// <prefix>.tnsr (one flat blob). Round-trips bit-exactly.
void save_weights(const ViTModel& model, const std::string& prefix);
ViTModel load_weights(const std::string& prefix);

} // namespace wegpipe
