#include "wegpipe/explain.hpp"

#include <algorithm>
#include <cmath>

#include "wegpipe/kernels.hpp"

namespace wegpipe {
namespace {

void check_trace(const AttentionTrace& trace) {
    if (!trace.graph || trace.attn_nodes.empty()) {
        throw UsageError("explainer requires a trace recorded with attention");
    }
}

std::vector<int64_t> resolve_blocks(const RelevanceConfig& config, int64_t num_blocks) {
    std::vector<int64_t> blocks = config.block_set;
    if (blocks.empty()) blocks = {num_blocks - 1};
    std::sort(blocks.begin(), blocks.end());
    blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
    for (int64_t b : blocks) {
        if (b < 0 || b >= num_blocks) {
            throw UsageError("block index " + std::to_string(b) + " out of range [0, " +
                             std::to_string(num_blocks) + ")");
        }
    }
    return blocks;
}

Tensor mat_product(const Tensor& a, const Tensor& b) {
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    kernels::active().gemm_nn(m, n, k, a.data(), k, b.data(), n, out.mutable_data(), n, false);
    return out;
}

// class-token row restricted to the patch columns, reshaped to the grid
Tensor cls_row_to_grid(const Tensor& mat, int64_t seq) {
    const int64_t s = seq - 1;
    const int64_t g = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(s))));
    Tensor grid({g, g});
    std::copy(mat.data() + 1, mat.data() + seq, grid.mutable_data());
    return grid;
}

} // namespace

NodeId class_score(Graph& g, NodeId logits, int64_t class_index) {
    const Tensor& o = g.value(logits);
    if (class_index < 0 || class_index >= o.size()) {
        throw UsageError("class index " + std::to_string(class_index) + " out of range for logits " +
                         o.shape_str());
    }
    return g.select(logits, class_index);
}

void relevance_propagate(AttentionTrace& trace, int64_t class_index, const RelevanceConfig& config) {
    check_trace(trace);
    Graph& g = *trace.graph;
    const Tensor& logits = g.value(trace.logits_id);
    if (class_index < 0 || class_index >= logits.size()) {
        throw UsageError("class index " + std::to_string(class_index) + " out of range for logits " +
                         logits.shape_str());
    }
    Tensor seed(logits.shape());
    seed.mutable_data()[class_index] = 1.0;
    g.relprop(trace.logits_id, seed, config.eps);
}

InitialAttentionMap dtd_attention(AttentionTrace& trace, int64_t class_index, const RelevanceConfig& config) {
    check_trace(trace);
    const std::vector<int64_t> blocks = resolve_blocks(config, trace.num_blocks);
    Graph& g = *trace.graph;

    const NodeId score = class_score(g, trace.logits_id, class_index);
    g.backward(score);
    relevance_propagate(trace, class_index, config);

    const int64_t n = trace.seq;
    Tensor combined;
    for (int64_t b : blocks) {
        Tensor grad = trace.attention_grad(b);
        Tensor rel = trace.attention_relevance(b);
        Tensor prod({trace.num_heads, n, n});
        kernels::active().mul(static_cast<size_t>(prod.size()), grad.data(), rel.data(), prod.mutable_data());
        if (config.positive_clamp) {
            kernels::active().clamp0(static_cast<size_t>(prod.size()), prod.data(), prod.mutable_data());
        }
        Tensor block_map({n, n});
        double* bm = block_map.mutable_data();
        const double* pv = prod.data();
        const double inv_h = 1.0 / static_cast<double>(trace.num_heads);
        for (int64_t i = 0; i < n * n; ++i) {
            double s = 0.0;
            for (int64_t h = 0; h < trace.num_heads; ++h) s += pv[h * n * n + i];
            bm[i] = s * inv_h;
        }
        for (int64_t i = 0; i < n; ++i) bm[i * n + i] += 1.0; // A^b = I + head-mean
        if (blocks.size() > 1) {
            // rollout-style accumulation: row-normalize each factor before
            // chaining, as in single-block use the scale cancels later
            for (int64_t i = 0; i < n; ++i) {
                double rs = 0.0;
                for (int64_t j = 0; j < n; ++j) rs += bm[i * n + j];
                if (std::abs(rs) > 1e-12) {
                    const double inv = 1.0 / rs;
                    for (int64_t j = 0; j < n; ++j) bm[i * n + j] *= inv;
                }
            }
        }
        combined = combined.empty() ? std::move(block_map) : mat_product(block_map, combined);
    }

    InitialAttentionMap out;
    out.class_index = class_index;
    out.grid = cls_row_to_grid(combined, n);
    if (!out.grid.all_finite()) throw NumericError("attention map contains non-finite values");
    return out;
}

InitialAttentionMap dtd_attention(const ViTModel& model, const Tensor& image, int64_t class_index,
                                  const RelevanceConfig& config) {
    AttentionTrace trace = vit_build_graph(model, image, true);
    return dtd_attention(trace, class_index, config);
}

InitialAttentionMap rollout_attention(const AttentionTrace& trace) {
    check_trace(trace);
    const int64_t n = trace.seq;
    Tensor combined;
    for (int64_t b = 0; b < trace.num_blocks; ++b) {
        Tensor attn = trace.attention(b);
        Tensor avg({n, n});
        double* av = avg.mutable_data();
        const double* m = attn.data();
        const double inv_h = 1.0 / static_cast<double>(trace.num_heads);
        for (int64_t i = 0; i < n * n; ++i) {
            double s = 0.0;
            for (int64_t h = 0; h < trace.num_heads; ++h) s += m[h * n * n + i];
            av[i] = s * inv_h;
        }
        for (int64_t i = 0; i < n; ++i) av[i * n + i] += 1.0;
        for (int64_t i = 0; i < n; ++i) {
            double rs = 0.0;
            for (int64_t j = 0; j < n; ++j) rs += av[i * n + j];
            const double inv = 1.0 / rs;
            for (int64_t j = 0; j < n; ++j) av[i * n + j] *= inv;
        }
        combined = combined.empty() ? std::move(avg) : mat_product(avg, combined);
    }
    InitialAttentionMap out;
    out.grid = cls_row_to_grid(combined, n);
    return out;
}

InitialAttentionMap rollout_attention(const ViTModel& model, const Tensor& image) {
    AttentionTrace trace = vit_build_graph(model, image, true);
    return rollout_attention(trace);
}

InitialAttentionMap cam_attention(const ViTModel& model, const AttentionTrace& trace, int64_t class_index) {
    if (!trace.graph) throw UsageError("cam_attention requires a recorded trace");
    const Tensor& features = trace.token_features(); // [n x d]
    const Tensor& w = model.param("head.weight");    // [d x c]
    const int64_t c = w.dim(1);
    if (class_index < 0 || class_index >= c) {
        throw UsageError("class index " + std::to_string(class_index) + " out of range");
    }
    const int64_t n = features.dim(0), d = features.dim(1);
    const int64_t s = n - 1;
    const int64_t g = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(s))));
    InitialAttentionMap out;
    out.class_index = class_index;
    out.grid = Tensor({g, g});
    double* o = out.grid.mutable_data();
    const double* f = features.data();
    const double* wv = w.data();
    for (int64_t i = 0; i < s; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < d; ++j) acc += f[(i + 1) * d + j] * wv[j * c + class_index];
        o[i] = acc;
    }
    return out;
}

InitialAttentionMap cam_attention(const ViTModel& model, const Tensor& image, int64_t class_index) {
    AttentionTrace trace = vit_build_graph(model, image, true);
    return cam_attention(model, trace, class_index);
}

} // namespace wegpipe
