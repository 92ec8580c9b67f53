#pragma once

#include <map>
#include <vector>

#include "wegpipe/netpbm.hpp"
#include "wegpipe/tensor.hpp"

namespace wegpipe {

inline constexpr uint8_t kIgnoredLabel = 255;

struct EpomConfig {
    double fg_thr = 0.3;  // activation threshold for foreground extraction
    double tau_sal = 0.5; // saliency gate below which a pixel is background

    void validate() const;
};

enum class Provenance : uint8_t { Initial = 0, EpomIgnored = 1 };

// H x W grid of class ids; 0 = background, 255 = ignored. provenance tracks
// which stage decided each pixel.
struct PseudoLabel {
    ByteImage grid;
    ByteImage provenance;
};

// refined attention maps keyed by semantic class id (1..c)
using RefinedMaps = std::map<int64_t, Tensor>;

// Saliency-gated assembly: background where saliency < tau_sal, otherwise
// the arg-max class over the present classes' maps (ties to the lowest id;
// zero activation stays background).
PseudoLabel initial_pseudo_label(const RefinedMaps& maps, const Tensor& saliency,
                                 const std::vector<int64_t>& present_classes, const EpomConfig& config);

// Variant without saliency: background where the best activation falls
// below fg_thr.
PseudoLabel initial_pseudo_label_no_saliency(const RefinedMaps& maps,
                                             const std::vector<int64_t>& present_classes,
                                             const EpomConfig& config);

// Per-class dynamic threshold: the median of the map over pixels already
// labelled with the class, or, when the class never appears in the label,
// the first value inside the top quartile of the map over pixels above
// fg_thr (1 when that set is empty, so nothing can exceed it).
double class_threshold(const PseudoLabel& label, const Tensor& map, int64_t class_id, double fg_thr);

// Marks background pixels whose activation exceeds the class threshold as
// ignored. Thresholds are computed on the input label before any mutation,
// so the result is independent of class order; non-background pixels are
// never modified.
PseudoLabel epom_refine(const PseudoLabel& label, const RefinedMaps& maps,
                        const std::vector<int64_t>& present_classes, const EpomConfig& config,
                        std::map<int64_t, double>* thresholds_out = nullptr);

} // namespace wegpipe
