#include "wegpipe/metrics.hpp"

#include "wegpipe/label.hpp"

namespace wegpipe {

ConfusionMatrix::ConfusionMatrix(int64_t num_foreground_classes) : num_classes(num_foreground_classes) {
    if (num_classes < 1) throw ConfigError("confusion matrix needs at least one foreground class");
    counts.assign(static_cast<size_t>((num_classes + 1) * (num_classes + 1)), 0);
}

int64_t& ConfusionMatrix::at(int64_t gt, int64_t pred) {
    return counts[static_cast<size_t>(gt * (num_classes + 1) + pred)];
}

int64_t ConfusionMatrix::at(int64_t gt, int64_t pred) const {
    return counts[static_cast<size_t>(gt * (num_classes + 1) + pred)];
}

int64_t ConfusionMatrix::total_counted() const {
    int64_t n = 0;
    for (int64_t c : counts) n += c;
    return n;
}

void ConfusionMatrix::accumulate(const ByteImage& pred, const ByteImage& gt) {
    if (!pred.same_size(gt)) throw ShapeError("prediction and ground truth sizes differ");
    for (size_t i = 0; i < gt.pixels.size(); ++i) {
        const uint8_t g = gt.pixels[i];
        const uint8_t p = pred.pixels[i];
        if (g == kIgnoredLabel || p == kIgnoredLabel) {
            ++total_ignored;
            continue;
        }
        if (g > num_classes || p > num_classes) {
            throw UsageError("label value " + std::to_string(std::max(g, p)) + " exceeds class count " +
                             std::to_string(num_classes));
        }
        ++at(g, p);
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes != num_classes) throw UsageError("cannot merge confusion matrices of different sizes");
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    total_ignored += other.total_ignored;
}

IouReport miou(const ConfusionMatrix& cm) {
    IouReport rep;
    const int64_t k = cm.num_classes + 1;
    rep.per_class_iou.assign(static_cast<size_t>(k), 0.0);
    rep.class_valid.assign(static_cast<size_t>(k), false);
    double sum = 0.0;
    int64_t valid = 0;
    for (int64_t c = 0; c < k; ++c) {
        const int64_t tp = cm.at(c, c);
        int64_t fp = 0, fn = 0;
        for (int64_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const int64_t uni = tp + fp + fn;
        if (uni == 0) continue;
        const double iou = static_cast<double>(tp) / static_cast<double>(uni);
        rep.per_class_iou[static_cast<size_t>(c)] = iou;
        rep.class_valid[static_cast<size_t>(c)] = true;
        sum += iou;
        ++valid;
    }
    if (valid > 0) {
        rep.defined = true;
        rep.miou = sum / static_cast<double>(valid);
    }
    const int64_t total = cm.total_counted() + cm.total_ignored;
    if (total > 0) rep.ignored_fraction = static_cast<double>(cm.total_ignored) / static_cast<double>(total);
    return rep;
}

} // namespace wegpipe
