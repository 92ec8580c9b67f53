#include "wegpipe/label.hpp"

#include <algorithm>
#include <cmath>

namespace wegpipe {
namespace {

void check_inputs(const RefinedMaps& maps, const std::vector<int64_t>& present_classes) {
    if (maps.size() != present_classes.size()) {
        throw UsageError("attention maps must exist exactly for the present classes");
    }
    for (int64_t cls : present_classes) {
        if (cls <= 0 || cls >= kIgnoredLabel) throw UsageError("invalid class id " + std::to_string(cls));
        auto it = maps.find(cls);
        if (it == maps.end()) throw UsageError("missing attention map for class " + std::to_string(cls));
        if (it->second.rank() != 2) throw ShapeError("attention map for class " + std::to_string(cls) +
                                                     " must be [H x W], got " + it->second.shape_str());
        if (!it->second.same_shape(maps.begin()->second)) {
            throw ShapeError("attention maps disagree in size");
        }
    }
}

template <typename BackgroundRule>
PseudoLabel assemble(const RefinedMaps& maps, const std::vector<int64_t>& present_classes, int64_t h,
                     int64_t w, BackgroundRule&& is_background) {
    PseudoLabel out;
    out.grid = ByteImage(h, w);
    out.provenance = ByteImage(h, w, static_cast<uint8_t>(Provenance::Initial));
    std::vector<int64_t> classes = present_classes;
    std::sort(classes.begin(), classes.end());
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            double best = 0.0;
            int64_t best_cls = 0;
            for (int64_t cls : classes) {
                const double v = maps.at(cls).data()[y * w + x];
                if (v > best) { // strict: ties keep the lowest class id
                    best = v;
                    best_cls = cls;
                }
            }
            if (is_background(y, x, best)) best_cls = 0;
            out.grid.at(y, x) = static_cast<uint8_t>(best_cls);
        }
    }
    return out;
}

} // namespace

void EpomConfig::validate() const {
    if (fg_thr < 0.0 || fg_thr > 1.0 || tau_sal < 0.0 || tau_sal > 1.0) {
        throw ConfigError("EPOM thresholds must lie in [0, 1]");
    }
}

PseudoLabel initial_pseudo_label(const RefinedMaps& maps, const Tensor& saliency,
                                 const std::vector<int64_t>& present_classes, const EpomConfig& config) {
    config.validate();
    check_inputs(maps, present_classes);
    if (saliency.rank() != 2) throw ShapeError("saliency must be [H x W], got " + saliency.shape_str());
    if (!maps.empty() && !saliency.same_shape(maps.begin()->second)) {
        throw ShapeError("saliency size " + saliency.shape_str() + " does not match the attention maps");
    }
    const int64_t h = saliency.dim(0), w = saliency.dim(1);
    const double* sal = saliency.data();
    return assemble(maps, present_classes, h, w, [&](int64_t y, int64_t x, double best) {
        return sal[y * w + x] < config.tau_sal || best == 0.0;
    });
}

PseudoLabel initial_pseudo_label_no_saliency(const RefinedMaps& maps,
                                             const std::vector<int64_t>& present_classes,
                                             const EpomConfig& config) {
    config.validate();
    check_inputs(maps, present_classes);
    if (maps.empty()) throw UsageError("no-saliency assembly requires at least one class map");
    const int64_t h = maps.begin()->second.dim(0), w = maps.begin()->second.dim(1);
    return assemble(maps, present_classes, h, w,
                    [&](int64_t, int64_t, double best) { return best < config.fg_thr; });
}

double class_threshold(const PseudoLabel& label, const Tensor& map, int64_t class_id, double fg_thr) {
    const int64_t h = map.dim(0), w = map.dim(1);
    if (label.grid.h != h || label.grid.w != w) {
        throw ShapeError("pseudo label size does not match the attention map");
    }
    const double* a = map.data();
    std::vector<double> values;
    for (int64_t i = 0; i < h * w; ++i) {
        if (label.grid.pixels[static_cast<size_t>(i)] == class_id) values.push_back(a[i]);
    }
    if (!values.empty()) {
        std::sort(values.begin(), values.end());
        const size_t n = values.size();
        return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    }
    for (int64_t i = 0; i < h * w; ++i) {
        if (a[i] > fg_thr) values.push_back(a[i]);
    }
    if (values.empty()) return 1.0; // nothing can exceed the threshold
    std::sort(values.begin(), values.end());
    // first value inside the top quartile
    const size_t n = values.size();
    const size_t rank = std::min(static_cast<size_t>(0.75 * static_cast<double>(n)) + 1, n);
    return values[rank - 1];
}

PseudoLabel epom_refine(const PseudoLabel& label, const RefinedMaps& maps,
                        const std::vector<int64_t>& present_classes, const EpomConfig& config,
                        std::map<int64_t, double>* thresholds_out) {
    config.validate();
    check_inputs(maps, present_classes);
    std::vector<int64_t> classes = present_classes;
    std::sort(classes.begin(), classes.end());

    std::map<int64_t, double> thresholds;
    for (int64_t cls : classes) {
        thresholds[cls] = class_threshold(label, maps.at(cls), cls, config.fg_thr);
    }

    PseudoLabel out = label;
    const int64_t h = label.grid.h, w = label.grid.w;
    for (int64_t cls : classes) {
        const double thr = thresholds[cls];
        const double* a = maps.at(cls).data();
        for (int64_t i = 0; i < h * w; ++i) {
            if (label.grid.pixels[static_cast<size_t>(i)] == 0 && a[i] > thr) {
                out.grid.pixels[static_cast<size_t>(i)] = kIgnoredLabel;
                out.provenance.pixels[static_cast<size_t>(i)] = static_cast<uint8_t>(Provenance::EpomIgnored);
            }
        }
    }
    if (thresholds_out) *thresholds_out = std::move(thresholds);
    return out;
}

} // namespace wegpipe
