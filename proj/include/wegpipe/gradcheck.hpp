#pragma once

#include <cmath>
#include <functional>

#include "wegpipe/graph.hpp"

namespace wegpipe {

// Gradient oracle. `build` realizes a deterministic scalar function of one
// tensor on a fresh graph; the analytic gradient comes from one backward
// pass, the reference from central differences using forward evaluations
// only. Returns max over entries of
//   |analytic - central| / (|central| + 1e-12).
inline double finite_diff_check(const std::function<NodeId(Graph&, NodeId)>& build, const Tensor& x,
                                double eps) {
    Tensor analytic;
    {
        Graph g;
        const NodeId xid = g.leaf(x, true);
        const NodeId loss = build(g, xid);
        g.backward(loss);
        analytic = g.grad(xid);
        if (analytic.empty()) analytic = Tensor::zeros(x.shape());
    }
    const auto eval = [&](const Tensor& probe) {
        Graph g;
        const NodeId xid = g.leaf(probe, false);
        return g.value(build(g, xid)).item();
    };
    Tensor probe = x;
    double* pv = probe.mutable_data();
    double max_err = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) {
        const double orig = pv[i];
        pv[i] = orig + eps;
        const double fp = eval(probe);
        pv[i] = orig - eps;
        const double fm = eval(probe);
        pv[i] = orig;
        const double central = (fp - fm) / (2.0 * eps);
        const double err = std::abs(analytic.data()[i] - central) / (std::abs(central) + 1e-12);
        max_err = std::max(max_err, err);
    }
    return max_err;
}

} // namespace wegpipe
