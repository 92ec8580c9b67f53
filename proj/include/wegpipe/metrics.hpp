#pragma once

#include <cstdint>
#include <vector>

#include "wegpipe/netpbm.hpp"

namespace wegpipe {

// (c+1) x (c+1) confusion counts over class ids 0..c (0 = background).
// Pixels where either side carries the ignore value 255 are excluded from
// the counts and tallied separately. Matrices merge by addition.
struct ConfusionMatrix {
    int64_t num_classes = 0; // foreground classes; grid side is num_classes + 1
    std::vector<int64_t> counts;
    int64_t total_ignored = 0;

    explicit ConfusionMatrix(int64_t num_foreground_classes);

    int64_t& at(int64_t gt, int64_t pred);
    int64_t at(int64_t gt, int64_t pred) const;
    int64_t total_counted() const;

    void accumulate(const ByteImage& pred, const ByteImage& gt);
    void merge(const ConfusionMatrix& other);
};

struct IouReport {
    std::vector<double> per_class_iou; // size c+1, NaN-free
    std::vector<bool> class_valid;     // false where the class has zero union
    bool defined = false;              // false when every class has zero union
    double miou = 0.0;
    double ignored_fraction = 0.0;
};

// IoU_k = TP / (TP + FP + FN); zero-union classes are excluded from the
// mean.
IouReport miou(const ConfusionMatrix& cm);

} // namespace wegpipe
