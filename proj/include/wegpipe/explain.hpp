#pragma once

#include <vector>

#include "wegpipe/vit.hpp"

namespace wegpipe {

// Attention-map extraction from a recorded forward pass. The primary method
// seeds a one-hot relevance vector at the logits, walks it back through the
// network (relevance_propagate), pairs each block's attention relevance with
// its gradient, and reads the class-token row of the combined map. Rollout
// and CAM are the class-agnostic / feature-projection baselines.
struct RelevanceConfig {
    double eps = 1e-9;               // stabilizer for division-based rules
    bool positive_clamp = true;      // clamp grad*relevance before the head mean
    std::vector<int64_t> block_set;  // blocks combined into the map; empty = last block only
};

// S = logits[class_index]; gradient of S w.r.t. the logits is the one-hot
// indicator of class_index.
NodeId class_score(Graph& g, NodeId logits, int64_t class_index);

// Fills the relevance slot of every recorded attention matrix by seeding a
// one-hot at the logits node. Requires a trace recorded with attention.
void relevance_propagate(AttentionTrace& trace, int64_t class_index, const RelevanceConfig& config);

struct InitialAttentionMap {
    int64_t class_index = -1; // classifier index; -1 for class-agnostic maps
    Tensor grid;              // [g x g] patch-resolution response
};

// Runs backward for the class score, relevance propagation, combines the
// chosen blocks' (I + head-mean(grad * relevance)) matrices by matrix
// product in ascending block order, and slices the class-token row over the
// patch columns.
InitialAttentionMap dtd_attention(AttentionTrace& trace, int64_t class_index, const RelevanceConfig& config);
InitialAttentionMap dtd_attention(const ViTModel& model, const Tensor& image, int64_t class_index,
                                  const RelevanceConfig& config);

// Product of row-normalized (I + head-mean attention) over all blocks.
InitialAttentionMap rollout_attention(const AttentionTrace& trace);
InitialAttentionMap rollout_attention(const ViTModel& model, const Tensor& image);

// Head-weight row for the class dotted with each patch token's final
// feature.
InitialAttentionMap cam_attention(const ViTModel& model, const AttentionTrace& trace, int64_t class_index);
InitialAttentionMap cam_attention(const ViTModel& model, const Tensor& image, int64_t class_index);

} // namespace wegpipe
