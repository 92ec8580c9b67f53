#include "wegpipe/refine.hpp"

#include <algorithm>
#include <cmath>

#include "wegpipe/kernels.hpp"

namespace wegpipe {
namespace {

void check_map(const Tensor& m, const char* what) {
    if (m.rank() != 2) throw ShapeError(std::string(what) + " expects a [H x W] map, got " + m.shape_str());
}

} // namespace

Tensor normalize01(const Tensor& map) {
    check_map(map, "normalize01");
    if (!map.all_finite()) throw NumericError("normalize01 input contains non-finite values");
    const double* x = map.data();
    double lo = x[0], hi = x[0];
    for (int64_t i = 1; i < map.size(); ++i) {
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
    }
    Tensor out(map.shape());
    if (hi == lo) return out; // no activation
    const double inv = 1.0 / (hi - lo);
    double* o = out.mutable_data();
    for (int64_t i = 0; i < map.size(); ++i) o[i] = (x[i] - lo) * inv;
    return out;
}

Tensor bilinear_resize(const Tensor& map, int64_t out_h, int64_t out_w) {
    check_map(map, "bilinear_resize");
    if (out_h <= 0 || out_w <= 0) throw ShapeError("bilinear_resize target must be positive");
    const int64_t in_h = map.dim(0), in_w = map.dim(1);
    if (in_h == out_h && in_w == out_w) return map;
    Tensor out({out_h, out_w});
    double* o = out.mutable_data();
    const double* src = map.data();
    const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
    for (int64_t y = 0; y < out_h; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
        const int64_t y0 = static_cast<int64_t>(fy);
        const int64_t y1 = std::min(y0 + 1, in_h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (int64_t x = 0; x < out_w; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
            const int64_t x0 = static_cast<int64_t>(fx);
            const int64_t x1 = std::min(x0 + 1, in_w - 1);
            const double wx = fx - static_cast<double>(x0);
            const double top = src[y0 * in_w + x0] * (1.0 - wx) + src[y0 * in_w + x1] * wx;
            const double bot = src[y1 * in_w + x0] * (1.0 - wx) + src[y1 * in_w + x1] * wx;
            o[y * out_w + x] = top * (1.0 - wy) + bot * wy;
        }
    }
    return out;
}

Tensor upsample_bilinear(const Tensor& map, int64_t out_h, int64_t out_w) {
    check_map(map, "upsample_bilinear");
    if (out_h < map.dim(0) || out_w < map.dim(1)) {
        throw UsageError("upsample_bilinear target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                         " smaller than source " + map.shape_str());
    }
    return bilinear_resize(map, out_h, out_w);
}

Tensor soft_erase(const Tensor& map, double soft_rate) {
    check_map(map, "soft_erase");
    if (!(soft_rate > 0.0 && soft_rate <= 1.0)) {
        throw UsageError("soft erase rate must lie in (0, 1], got " + std::to_string(soft_rate));
    }
    const size_t n = static_cast<size_t>(map.size());
    const double cap = soft_rate * kernels::active().max(n, map.data());
    Tensor out(map.shape());
    kernels::active().min_scalar(n, map.data(), cap, out.mutable_data());
    return out;
}

Tensor multi_scale_fuse(const std::vector<Tensor>& maps) {
    if (maps.empty()) throw UsageError("multi_scale_fuse requires at least one map");
    check_map(maps[0], "multi_scale_fuse");
    Tensor acc(maps[0].shape());
    const size_t n = static_cast<size_t>(acc.size());
    for (const Tensor& m : maps) {
        if (!m.same_shape(maps[0])) {
            throw ShapeError("multi_scale_fuse maps disagree: " + m.shape_str() + " vs " + maps[0].shape_str());
        }
        kernels::active().add(n, acc.data(), m.data(), acc.mutable_data());
    }
    Tensor mean(acc.shape());
    kernels::active().scale(n, 1.0 / static_cast<double>(maps.size()), acc.data(), mean.mutable_data());
    return normalize01(mean);
}

} // namespace wegpipe
