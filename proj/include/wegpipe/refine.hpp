#pragma once

#include <vector>

#include "wegpipe/tensor.hpp"

namespace wegpipe {

// Attention-map post-processing. All functions are pure; maps are rank-2
// [H x W] tensors.

// (x - min) / (max - min); a constant map maps to all zeros.
Tensor normalize01(const Tensor& map);

// General bilinear resampling, align-corners-false, edge-clamped.
Tensor bilinear_resize(const Tensor& map, int64_t out_h, int64_t out_w);

// bilinear_resize restricted to enlargement.
Tensor upsample_bilinear(const Tensor& map, int64_t out_h, int64_t out_w);

// Caps a normalized map at soft_rate times its maximum, flattening the gap
// between high- and low-response regions. soft_rate must lie in (0, 1];
// soft_rate = 1 is the identity.
Tensor soft_erase(const Tensor& map, double soft_rate);

// Pointwise mean of same-size maps followed by renormalization to [0, 1].
Tensor multi_scale_fuse(const std::vector<Tensor>& maps);

} // namespace wegpipe
