#include "wegpipe/graph.hpp"

#include <cmath>
#include <cstring>

#include "wegpipe/kernels.hpp"

namespace wegpipe {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// signed stabilizer for relevance divisions; eps=0 gives the plain z-rule
inline double stab(double z, double eps) { return z + (z >= 0.0 ? eps : -eps); }

void check_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw ShapeError(std::string(what) + " requires a rank-2 tensor, got " + t.shape_str());
}

// decompose shape around `axis` into [outer, d, inner] strides
struct AxisView {
    int64_t outer = 1, d = 1, inner = 1;
};

AxisView axis_view(const Tensor& t, int64_t axis) {
    if (axis < 0 || axis >= t.rank()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + t.shape_str());
    }
    AxisView v;
    for (int64_t i = 0; i < axis; ++i) v.outer *= t.dim(i);
    v.d = t.dim(axis);
    for (int64_t i = axis + 1; i < t.rank(); ++i) v.inner *= t.dim(i);
    return v;
}

} // namespace

const Node& Graph::node(NodeId id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) throw UsageError("invalid node id");
    return nodes_[static_cast<size_t>(id)];
}

Node& Graph::mut(NodeId id) { return nodes_[static_cast<size_t>(id)]; }

NodeId Graph::push(Node n) {
    for (NodeId in : n.in) {
        if (nodes_[static_cast<size_t>(in)].requires_grad) n.requires_grad = true;
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Graph::ensure_grad(NodeId id) {
    Node& n = mut(id);
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
}

Tensor& Graph::ensure_rel(NodeId id) {
    Node& n = mut(id);
    if (n.rel.empty()) n.rel = Tensor::zeros(n.value.shape());
    return n.rel;
}

NodeId Graph::leaf(Tensor t, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(t);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::param(Tensor t) {
    NodeId id = leaf(std::move(t), true);
    mut(id).is_param = true;
    return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_rank2(ta, "matmul");
    check_rank2(tb, "matmul");
    if (ta.dim(1) != tb.dim(0)) {
        throw ShapeError("matmul dimension mismatch: " + ta.shape_str() + " * " + tb.shape_str());
    }
    const int64_t m = ta.dim(0), k = ta.dim(1), n2 = tb.dim(1);
    Node n;
    n.op = Op::Matmul;
    n.in = {a, b};
    n.value = Tensor({m, n2});
    kernels::active().gemm_nn(m, n2, k, ta.data(), k, tb.data(), n2, n.value.mutable_data(), n2, false);
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    const Tensor& ta = value(a);
    check_rank2(ta, "transpose");
    const int64_t m = ta.dim(0), c = ta.dim(1);
    Node n;
    n.op = Op::Transpose;
    n.in = {a};
    n.value = Tensor({c, m});
    double* out = n.value.mutable_data();
    const double* src = ta.data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < c; ++j) out[j * m + i] = src[i * c + j];
    }
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
        throw ShapeError("add shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::Add;
    n.in = {a, b};
    n.value = Tensor(ta.shape());
    kernels::active().add(static_cast<size_t>(ta.size()), ta.data(), tb.data(), n.value.mutable_data());
    return push(std::move(n));
}

NodeId Graph::add_bias(NodeId x, NodeId bias) {
    const Tensor& tx = value(x);
    const Tensor& tb = value(bias);
    if (tb.rank() != 1 || tb.dim(0) != tx.dim(tx.rank() - 1)) {
        throw ShapeError("bias shape " + tb.shape_str() + " does not match last dim of " + tx.shape_str());
    }
    const int64_t d = tb.dim(0), rows = tx.size() / d;
    Node n;
    n.op = Op::AddBias;
    n.in = {x, bias};
    n.value = Tensor(tx.shape());
    double* out = n.value.mutable_data();
    const double* xv = tx.data();
    const double* bv = tb.data();
    for (int64_t r = 0; r < rows; ++r) {
        kernels::active().add(static_cast<size_t>(d), xv + r * d, bv, out + r * d);
    }
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
        throw ShapeError("mul shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::Mul;
    n.in = {a, b};
    n.value = Tensor(ta.shape());
    kernels::active().mul(static_cast<size_t>(ta.size()), ta.data(), tb.data(), n.value.mutable_data());
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::Scale;
    n.in = {a};
    n.fscalar = c;
    n.value = Tensor(ta.shape());
    kernels::active().scale(static_cast<size_t>(ta.size()), c, ta.data(), n.value.mutable_data());
    return push(std::move(n));
}

NodeId Graph::softmax(NodeId a, int64_t axis) {
    const Tensor& ta = value(a);
    if (!ta.all_finite()) throw NumericError("softmax input contains non-finite values");
    const AxisView v = axis_view(ta, axis);
    Node n;
    n.op = Op::Softmax;
    n.in = {a};
    n.attrs = {axis};
    n.value = Tensor(ta.shape());
    const double* x = ta.data();
    double* y = n.value.mutable_data();
    for (int64_t o = 0; o < v.outer; ++o) {
        for (int64_t i = 0; i < v.inner; ++i) {
            const int64_t base = o * v.d * v.inner + i;
            double mx = x[base];
            for (int64_t j = 1; j < v.d; ++j) mx = std::max(mx, x[base + j * v.inner]);
            double denom = 0.0;
            for (int64_t j = 0; j < v.d; ++j) {
                const double e = std::exp(x[base + j * v.inner] - mx);
                y[base + j * v.inner] = e;
                denom += e;
            }
            const double inv = 1.0 / denom;
            for (int64_t j = 0; j < v.d; ++j) y[base + j * v.inner] *= inv;
        }
    }
    return push(std::move(n));
}

NodeId Graph::layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gamma);
    const Tensor& tb = value(beta);
    const int64_t d = tx.dim(tx.rank() - 1);
    if (tg.rank() != 1 || tg.dim(0) != d || tb.rank() != 1 || tb.dim(0) != d) {
        throw ShapeError("layer_norm gamma/beta must have shape [" + std::to_string(d) + "]");
    }
    const int64_t rows = tx.size() / d;
    Node n;
    n.op = Op::LayerNorm;
    n.in = {x, gamma, beta};
    n.fscalar = eps;
    n.value = Tensor(tx.shape());
    Tensor xhat(tx.shape());
    Tensor inv_std({rows});
    const double* xv = tx.data();
    const double* gv = tg.data();
    const double* bv = tb.data();
    double* yv = n.value.mutable_data();
    double* hv = xhat.mutable_data();
    double* iv = inv_std.mutable_data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* row = xv + r * d;
        double mean = 0.0;
        for (int64_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const double c = row[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        iv[r] = inv;
        for (int64_t j = 0; j < d; ++j) {
            const double h = (row[j] - mean) * inv;
            hv[r * d + j] = h;
            yv[r * d + j] = h * gv[j] + bv[j];
        }
    }
    n.saved = {std::move(xhat), std::move(inv_std)};
    return push(std::move(n));
}

NodeId Graph::gelu(NodeId a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::Gelu;
    n.in = {a};
    n.value = Tensor(ta.shape());
    const double* x = ta.data();
    double* y = n.value.mutable_data();
    for (int64_t i = 0; i < ta.size(); ++i) {
        y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
    }
    return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, std::vector<int64_t> shape) {
    Node n;
    n.op = Op::Reshape;
    n.in = {a};
    n.value = value(a).reshaped(std::move(shape));
    return push(std::move(n));
}

NodeId Graph::slice_rows(NodeId a, int64_t r0, int64_t r1) {
    const Tensor& ta = value(a);
    check_rank2(ta, "slice_rows");
    if (r0 < 0 || r1 <= r0 || r1 > ta.dim(0)) throw ShapeError("bad row slice on " + ta.shape_str());
    const int64_t c = ta.dim(1);
    Node n;
    n.op = Op::SliceRows;
    n.in = {a};
    n.attrs = {r0, r1};
    n.value = Tensor({r1 - r0, c});
    std::memcpy(n.value.mutable_data(), ta.data() + r0 * c, static_cast<size_t>((r1 - r0) * c) * sizeof(double));
    return push(std::move(n));
}

NodeId Graph::slice_cols(NodeId a, int64_t c0, int64_t c1) {
    const Tensor& ta = value(a);
    check_rank2(ta, "slice_cols");
    if (c0 < 0 || c1 <= c0 || c1 > ta.dim(1)) throw ShapeError("bad column slice on " + ta.shape_str());
    const int64_t m = ta.dim(0), c = ta.dim(1), w = c1 - c0;
    Node n;
    n.op = Op::SliceCols;
    n.in = {a};
    n.attrs = {c0, c1};
    n.value = Tensor({m, w});
    double* out = n.value.mutable_data();
    const double* src = ta.data();
    for (int64_t i = 0; i < m; ++i) {
        std::memcpy(out + i * w, src + i * c + c0, static_cast<size_t>(w) * sizeof(double));
    }
    return push(std::move(n));
}

NodeId Graph::concat_rows(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_rank2(ta, "concat_rows");
    check_rank2(tb, "concat_rows");
    if (ta.dim(1) != tb.dim(1)) {
        throw ShapeError("concat_rows column mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Node n;
    n.op = Op::ConcatRows;
    n.in = {a, b};
    n.value = Tensor({ta.dim(0) + tb.dim(0), ta.dim(1)});
    double* out = n.value.mutable_data();
    std::memcpy(out, ta.data(), static_cast<size_t>(ta.size()) * sizeof(double));
    std::memcpy(out + ta.size(), tb.data(), static_cast<size_t>(tb.size()) * sizeof(double));
    return push(std::move(n));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_rank2(ta, "concat_cols");
    check_rank2(tb, "concat_cols");
    if (ta.dim(0) != tb.dim(0)) {
        throw ShapeError("concat_cols row mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
    }
    const int64_t m = ta.dim(0), ca = ta.dim(1), cb = tb.dim(1);
    Node n;
    n.op = Op::ConcatCols;
    n.in = {a, b};
    n.value = Tensor({m, ca + cb});
    double* out = n.value.mutable_data();
    for (int64_t i = 0; i < m; ++i) {
        std::memcpy(out + i * (ca + cb), ta.data() + i * ca, static_cast<size_t>(ca) * sizeof(double));
        std::memcpy(out + i * (ca + cb) + ca, tb.data() + i * cb, static_cast<size_t>(cb) * sizeof(double));
    }
    return push(std::move(n));
}

NodeId Graph::mean_axis(NodeId a, int64_t axis) {
    const Tensor& ta = value(a);
    const AxisView v = axis_view(ta, axis);
    std::vector<int64_t> out_shape;
    for (int64_t i = 0; i < ta.rank(); ++i) {
        if (i != axis) out_shape.push_back(ta.dim(i));
    }
    if (out_shape.empty()) out_shape = {1};
    Node n;
    n.op = Op::MeanAxis;
    n.in = {a};
    n.attrs = {axis};
    n.value = Tensor(out_shape);
    const double* x = ta.data();
    double* y = n.value.mutable_data();
    const double inv = 1.0 / static_cast<double>(v.d);
    for (int64_t o = 0; o < v.outer; ++o) {
        for (int64_t i = 0; i < v.inner; ++i) {
            double s = 0.0;
            for (int64_t j = 0; j < v.d; ++j) s += x[o * v.d * v.inner + j * v.inner + i];
            y[o * v.inner + i] = s * inv;
        }
    }
    return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::SumAll;
    n.in = {a};
    n.value = Tensor::scalar(kernels::scalar_backend().sum(static_cast<size_t>(ta.size()), ta.data()));
    return push(std::move(n));
}

NodeId Graph::select(NodeId a, int64_t flat_index) {
    const Tensor& ta = value(a);
    if (flat_index < 0 || flat_index >= ta.size()) {
        throw UsageError("select index " + std::to_string(flat_index) + " out of range for " + ta.shape_str());
    }
    Node n;
    n.op = Op::Select;
    n.in = {a};
    n.attrs = {flat_index};
    n.value = Tensor::scalar(ta.data()[flat_index]);
    return push(std::move(n));
}

NodeId Graph::bce_multilabel(NodeId logits, const Tensor& targets) {
    const Tensor& tl = value(logits);
    if (tl.size() != targets.size()) {
        throw ShapeError("bce target shape " + targets.shape_str() + " does not match logits " + tl.shape_str());
    }
    const double* y = targets.data();
    for (int64_t i = 0; i < targets.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw UsageError("bce targets must be exactly 0 or 1");
    }
    const int64_t c = tl.size();
    const double* x = tl.data();
    double loss = 0.0;
    for (int64_t i = 0; i < c; ++i) {
        // stable sigmoid cross-entropy: max(x,0) - x*y + log1p(exp(-|x|))
        loss += std::max(x[i], 0.0) - x[i] * y[i] + std::log1p(std::exp(-std::abs(x[i])));
    }
    Node n;
    n.op = Op::BceLoss;
    n.in = {logits};
    n.value = Tensor::scalar(loss / static_cast<double>(c));
    n.saved = {targets};
    return push(std::move(n));
}

void Graph::backward(NodeId loss) {
    const Node& ln = node(loss);
    if (ln.value.size() != 1) {
        throw UsageError("backward requires a scalar loss, got shape " + ln.value.shape_str());
    }
    for (Node& n : nodes_) n.grad = Tensor();
    ensure_grad(loss).fill(1.0);
    for (NodeId id = loss; id >= 0; --id) {
        const Node& n = nodes_[static_cast<size_t>(id)];
        if (n.op == Op::Leaf || n.grad.empty() || !n.requires_grad) continue;
        backward_node(id);
    }
}

void Graph::backward_node(NodeId id) {
    Node& n = mut(id);
    const double* g = n.grad.data();
    const auto needs = [&](size_t slot) { return nodes_[static_cast<size_t>(n.in[slot])].requires_grad; };
    auto& K = kernels::active();

    switch (n.op) {
    case Op::Matmul: {
        const Tensor& a = value(n.in[0]);
        const Tensor& b = value(n.in[1]);
        const int64_t m = a.dim(0), k = a.dim(1), nn = b.dim(1);
        if (needs(0)) {
            K.gemm_nt(m, k, nn, g, nn, b.data(), nn, ensure_grad(n.in[0]).mutable_data(), k, true);
        }
        if (needs(1)) {
            K.gemm_tn(k, nn, m, a.data(), k, g, nn, ensure_grad(n.in[1]).mutable_data(), nn, true);
        }
        break;
    }
    case Op::Transpose: {
        if (!needs(0)) break;
        const int64_t m = n.value.dim(0), c = n.value.dim(1);
        double* da = ensure_grad(n.in[0]).mutable_data();
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < c; ++j) da[j * m + i] += g[i * c + j];
        }
        break;
    }
    case Op::Add: {
        const size_t sz = static_cast<size_t>(n.value.size());
        if (needs(0)) K.axpy(sz, 1.0, g, ensure_grad(n.in[0]).mutable_data());
        if (needs(1)) K.axpy(sz, 1.0, g, ensure_grad(n.in[1]).mutable_data());
        break;
    }
    case Op::AddBias: {
        const int64_t d = value(n.in[1]).dim(0);
        const int64_t rows = n.value.size() / d;
        if (needs(0)) {
            K.axpy(static_cast<size_t>(n.value.size()), 1.0, g, ensure_grad(n.in[0]).mutable_data());
        }
        if (needs(1)) {
            double* db = ensure_grad(n.in[1]).mutable_data();
            for (int64_t r = 0; r < rows; ++r) K.axpy(static_cast<size_t>(d), 1.0, g + r * d, db);
        }
        break;
    }
    case Op::Mul: {
        const size_t sz = static_cast<size_t>(n.value.size());
        const double* a = value(n.in[0]).data();
        const double* b = value(n.in[1]).data();
        if (needs(0)) {
            double* da = ensure_grad(n.in[0]).mutable_data();
            for (size_t i = 0; i < sz; ++i) da[i] += g[i] * b[i];
        }
        if (needs(1)) {
            double* db = ensure_grad(n.in[1]).mutable_data();
            for (size_t i = 0; i < sz; ++i) db[i] += g[i] * a[i];
        }
        break;
    }
    case Op::Scale: {
        if (needs(0)) {
            K.axpy(static_cast<size_t>(n.value.size()), n.fscalar, g, ensure_grad(n.in[0]).mutable_data());
        }
        break;
    }
    case Op::Softmax: {
        if (!needs(0)) break;
        const AxisView v = axis_view(n.value, n.attrs[0]);
        const double* y = n.value.data();
        double* dx = ensure_grad(n.in[0]).mutable_data();
        for (int64_t o = 0; o < v.outer; ++o) {
            for (int64_t i = 0; i < v.inner; ++i) {
                const int64_t base = o * v.d * v.inner + i;
                double dot = 0.0;
                for (int64_t j = 0; j < v.d; ++j) {
                    const int64_t idx = base + j * v.inner;
                    dot += g[idx] * y[idx];
                }
                for (int64_t j = 0; j < v.d; ++j) {
                    const int64_t idx = base + j * v.inner;
                    dx[idx] += (g[idx] - dot) * y[idx];
                }
            }
        }
        break;
    }
    case Op::LayerNorm: {
        const Tensor& xhat = n.saved[0];
        const Tensor& inv_std = n.saved[1];
        const double* hv = xhat.data();
        const double* iv = inv_std.data();
        const double* gv = value(n.in[1]).data();
        const int64_t d = value(n.in[1]).dim(0);
        const int64_t rows = n.value.size() / d;
        if (needs(1)) {
            double* dgamma = ensure_grad(n.in[1]).mutable_data();
            for (int64_t r = 0; r < rows; ++r) {
                for (int64_t j = 0; j < d; ++j) dgamma[j] += g[r * d + j] * hv[r * d + j];
            }
        }
        if (needs(2)) {
            double* dbeta = ensure_grad(n.in[2]).mutable_data();
            for (int64_t r = 0; r < rows; ++r) {
                for (int64_t j = 0; j < d; ++j) dbeta[j] += g[r * d + j];
            }
        }
        if (needs(0)) {
            double* dx = ensure_grad(n.in[0]).mutable_data();
            for (int64_t r = 0; r < rows; ++r) {
                double mean_dh = 0.0, mean_dh_h = 0.0;
                for (int64_t j = 0; j < d; ++j) {
                    const double dh = g[r * d + j] * gv[j];
                    mean_dh += dh;
                    mean_dh_h += dh * hv[r * d + j];
                }
                mean_dh /= static_cast<double>(d);
                mean_dh_h /= static_cast<double>(d);
                for (int64_t j = 0; j < d; ++j) {
                    const double dh = g[r * d + j] * gv[j];
                    dx[r * d + j] += iv[r] * (dh - mean_dh - hv[r * d + j] * mean_dh_h);
                }
            }
        }
        break;
    }
    case Op::Gelu: {
        if (!needs(0)) break;
        const double* x = value(n.in[0]).data();
        double* dx = ensure_grad(n.in[0]).mutable_data();
        for (int64_t i = 0; i < n.value.size(); ++i) {
            const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
            dx[i] += g[i] * (cdf + x[i] * pdf);
        }
        break;
    }
    case Op::Reshape: {
        if (needs(0)) {
            K.axpy(static_cast<size_t>(n.value.size()), 1.0, g, ensure_grad(n.in[0]).mutable_data());
        }
        break;
    }
    case Op::SliceRows: {
        if (!needs(0)) break;
        const int64_t c = n.value.dim(1);
        double* da = ensure_grad(n.in[0]).mutable_data();
        K.axpy(static_cast<size_t>(n.value.size()), 1.0, g, da + n.attrs[0] * c);
        break;
    }
    case Op::SliceCols: {
        if (!needs(0)) break;
        const int64_t m = n.value.dim(0), w = n.value.dim(1);
        const int64_t c = value(n.in[0]).dim(1);
        double* da = ensure_grad(n.in[0]).mutable_data();
        for (int64_t i = 0; i < m; ++i) {
            K.axpy(static_cast<size_t>(w), 1.0, g + i * w, da + i * c + n.attrs[0]);
        }
        break;
    }
    case Op::ConcatRows: {
        const int64_t na = value(n.in[0]).size();
        if (needs(0)) K.axpy(static_cast<size_t>(na), 1.0, g, ensure_grad(n.in[0]).mutable_data());
        if (needs(1)) {
            K.axpy(static_cast<size_t>(value(n.in[1]).size()), 1.0, g + na, ensure_grad(n.in[1]).mutable_data());
        }
        break;
    }
    case Op::ConcatCols: {
        const int64_t m = n.value.dim(0);
        const int64_t ca = value(n.in[0]).dim(1), cb = value(n.in[1]).dim(1);
        if (needs(0)) {
            double* da = ensure_grad(n.in[0]).mutable_data();
            for (int64_t i = 0; i < m; ++i) K.axpy(static_cast<size_t>(ca), 1.0, g + i * (ca + cb), da + i * ca);
        }
        if (needs(1)) {
            double* db = ensure_grad(n.in[1]).mutable_data();
            for (int64_t i = 0; i < m; ++i) {
                K.axpy(static_cast<size_t>(cb), 1.0, g + i * (ca + cb) + ca, db + i * cb);
            }
        }
        break;
    }
    case Op::MeanAxis: {
        if (!needs(0)) break;
        const AxisView v = axis_view(value(n.in[0]), n.attrs[0]);
        const double inv = 1.0 / static_cast<double>(v.d);
        double* da = ensure_grad(n.in[0]).mutable_data();
        for (int64_t o = 0; o < v.outer; ++o) {
            for (int64_t i = 0; i < v.inner; ++i) {
                const double gi = g[o * v.inner + i] * inv;
                for (int64_t j = 0; j < v.d; ++j) da[o * v.d * v.inner + j * v.inner + i] += gi;
            }
        }
        break;
    }
    case Op::SumAll: {
        if (!needs(0)) break;
        Tensor& da = ensure_grad(n.in[0]);
        double* p = da.mutable_data();
        const double gi = g[0];
        for (int64_t i = 0; i < da.size(); ++i) p[i] += gi;
        break;
    }
    case Op::Select: {
        if (needs(0)) ensure_grad(n.in[0]).mutable_data()[n.attrs[0]] += g[0];
        break;
    }
    case Op::BceLoss: {
        if (!needs(0)) break;
        const Tensor& logits = value(n.in[0]);
        const double* x = logits.data();
        const double* y = n.saved[0].data();
        const double inv_c = 1.0 / static_cast<double>(logits.size());
        double* dx = ensure_grad(n.in[0]).mutable_data();
        for (int64_t i = 0; i < logits.size(); ++i) {
            const double sig = 1.0 / (1.0 + std::exp(-x[i]));
            dx[i] += g[0] * (sig - y[i]) * inv_c;
        }
        break;
    }
    case Op::Leaf:
        break;
    }
}

void Graph::relprop(NodeId seed, const Tensor& seed_rel, double eps) {
    const Node& sn = node(seed);
    if (!sn.value.same_shape(seed_rel)) {
        throw UsageError("relevance seed shape " + seed_rel.shape_str() + " does not match node shape " +
                         sn.value.shape_str());
    }
    for (Node& n : nodes_) n.rel = Tensor();
    mut(seed).rel = seed_rel;
    for (NodeId id = seed; id >= 0; --id) {
        const Node& n = nodes_[static_cast<size_t>(id)];
        if (n.op == Op::Leaf || n.rel.empty()) continue;
        relprop_node(id, eps);
    }
}

void Graph::relprop_node(NodeId id, double eps) {
    Node& n = mut(id);
    const double* r = n.rel.data();
    const double* z = n.value.data();

    switch (n.op) {
    case Op::Matmul: {
        const Tensor& a = value(n.in[0]);
        const Tensor& b = value(n.in[1]);
        const int64_t m = a.dim(0), k = a.dim(1), nn = b.dim(1);
        const bool a_param = node(n.in[0]).is_param;
        const bool b_param = node(n.in[1]).is_param;
        Tensor s({m, nn});
        double* sv = s.mutable_data();
        for (int64_t i = 0; i < m * nn; ++i) sv[i] = r[i] / stab(z[i], eps);
        // z-rule through a linear layer: all relevance goes to the
        // activation side; a bilinear product splits it evenly.
        const double share = (a_param || b_param) ? 1.0 : 0.5;
        if (!a_param) {
            Tensor c({m, k});
            kernels::active().gemm_nt(m, k, nn, sv, nn, b.data(), nn, c.mutable_data(), k, false);
            double* ra = ensure_rel(n.in[0]).mutable_data();
            const double* av = a.data();
            const double* cv = c.data();
            for (int64_t i = 0; i < m * k; ++i) ra[i] += share * av[i] * cv[i];
        }
        if (!b_param) {
            Tensor c({k, nn});
            kernels::active().gemm_tn(k, nn, m, a.data(), k, sv, nn, c.mutable_data(), nn, false);
            double* rb = ensure_rel(n.in[1]).mutable_data();
            const double* bv = b.data();
            const double* cv = c.data();
            for (int64_t i = 0; i < k * nn; ++i) rb[i] += share * bv[i] * cv[i];
        }
        break;
    }
    case Op::Transpose: {
        const int64_t m = n.value.dim(0), c = n.value.dim(1);
        double* ra = ensure_rel(n.in[0]).mutable_data();
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < c; ++j) ra[j * m + i] += r[i * c + j];
        }
        break;
    }
    case Op::Add: {
        // split proportionally to each branch's forward contribution
        const double* a = value(n.in[0]).data();
        const double* b = value(n.in[1]).data();
        double* ra = ensure_rel(n.in[0]).mutable_data();
        double* rb = ensure_rel(n.in[1]).mutable_data();
        for (int64_t i = 0; i < n.value.size(); ++i) {
            const double s = r[i] / stab(z[i], eps);
            ra[i] += a[i] * s;
            rb[i] += b[i] * s;
        }
        break;
    }
    case Op::AddBias: // bias absorbs nothing
    case Op::Scale:
    case Op::Softmax:
    case Op::Gelu: {
        double* ra = ensure_rel(n.in[0]).mutable_data();
        kernels::active().axpy(static_cast<size_t>(n.value.size()), 1.0, r, ra);
        break;
    }
    case Op::LayerNorm: {
        double* rx = ensure_rel(n.in[0]).mutable_data();
        kernels::active().axpy(static_cast<size_t>(n.value.size()), 1.0, r, rx);
        break;
    }
    case Op::Mul: {
        // z-rule on a Hadamard product degenerates to an even split
        double* ra = ensure_rel(n.in[0]).mutable_data();
        double* rb = ensure_rel(n.in[1]).mutable_data();
        kernels::active().axpy(static_cast<size_t>(n.value.size()), 0.5, r, ra);
        kernels::active().axpy(static_cast<size_t>(n.value.size()), 0.5, r, rb);
        break;
    }
    case Op::Reshape: {
        double* ra = ensure_rel(n.in[0]).mutable_data();
        kernels::active().axpy(static_cast<size_t>(n.value.size()), 1.0, r, ra);
        break;
    }
    case Op::SliceRows: {
        const int64_t c = n.value.dim(1);
        double* ra = ensure_rel(n.in[0]).mutable_data();
        kernels::active().axpy(static_cast<size_t>(n.value.size()), 1.0, r, ra + n.attrs[0] * c);
        break;
    }
    case Op::SliceCols: {
        const int64_t m = n.value.dim(0), w = n.value.dim(1);
        const int64_t c = value(n.in[0]).dim(1);
        double* ra = ensure_rel(n.in[0]).mutable_data();
        for (int64_t i = 0; i < m; ++i) {
            kernels::active().axpy(static_cast<size_t>(w), 1.0, r + i * w, ra + i * c + n.attrs[0]);
        }
        break;
    }
    case Op::ConcatRows: {
        const int64_t na = value(n.in[0]).size();
        kernels::active().axpy(static_cast<size_t>(na), 1.0, r, ensure_rel(n.in[0]).mutable_data());
        kernels::active().axpy(static_cast<size_t>(value(n.in[1]).size()), 1.0, r + na,
                               ensure_rel(n.in[1]).mutable_data());
        break;
    }
    case Op::ConcatCols: {
        const int64_t m = n.value.dim(0);
        const int64_t ca = value(n.in[0]).dim(1), cb = value(n.in[1]).dim(1);
        double* ra = ensure_rel(n.in[0]).mutable_data();
        double* rb = ensure_rel(n.in[1]).mutable_data();
        for (int64_t i = 0; i < m; ++i) {
            kernels::active().axpy(static_cast<size_t>(ca), 1.0, r + i * (ca + cb), ra + i * ca);
            kernels::active().axpy(static_cast<size_t>(cb), 1.0, r + i * (ca + cb) + ca, rb + i * cb);
        }
        break;
    }
    case Op::MeanAxis: {
        const AxisView v = axis_view(value(n.in[0]), n.attrs[0]);
        const double inv = 1.0 / static_cast<double>(v.d);
        const double* a = value(n.in[0]).data();
        double* ra = ensure_rel(n.in[0]).mutable_data();
        for (int64_t o = 0; o < v.outer; ++o) {
            for (int64_t i = 0; i < v.inner; ++i) {
                const double s = r[o * v.inner + i] / stab(z[o * v.inner + i], eps) * inv;
                for (int64_t j = 0; j < v.d; ++j) {
                    const int64_t idx = o * v.d * v.inner + j * v.inner + i;
                    ra[idx] += a[idx] * s;
                }
            }
        }
        break;
    }
    case Op::SumAll: {
        const double s = r[0] / stab(z[0], eps);
        const double* a = value(n.in[0]).data();
        Tensor& rel = ensure_rel(n.in[0]);
        double* ra = rel.mutable_data();
        for (int64_t i = 0; i < rel.size(); ++i) ra[i] += a[i] * s;
        break;
    }
    case Op::Select: {
        ensure_rel(n.in[0]).mutable_data()[n.attrs[0]] += r[0];
        break;
    }
    case Op::BceLoss:
        throw UsageError("relevance propagation through a loss node is not defined");
    case Op::Leaf:
        break;
    }
}

} // namespace wegpipe
