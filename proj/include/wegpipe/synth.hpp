#pragma once

#include <string>
#include <vector>

#include "wegpipe/netpbm.hpp"
#include "wegpipe/tensor.hpp"

namespace wegpipe {

// One training/evaluation sample. Mask values are semantic class ids
// (0 = background, 1..c = foreground); labels[k] corresponds to class id
// k+1. Saliency is a class-agnostic foreground map in [0,1], deliberately
// imperfect to mimic an offline detector.
struct Sample {
    Tensor image;                // [3 x H x W] in [0,1]
    std::vector<uint8_t> labels; // multi-hot, length num_classes
    ByteImage gt_mask;           // [H x W] class ids
    Tensor saliency;             // [H x W] in [0,1]
};

struct SynthConfig {
    int64_t image_size = 64;
    int64_t num_classes = 3; // 1=disk, 2=square, 3=triangle
    int64_t min_radius = 8;
    int64_t max_radius = 14;
    double saliency_noise = 0.15;
    int64_t min_clutter = 4; // background distractors per image
    int64_t max_clutter = 7;
    double colored_clutter = 0.4; // share of distractors borrowing a class color
};

// Deterministic in (config, seed); each image carries 1..3 non-overlapping
// shapes of distinct classes on a textured background. Sample i depends
// only on (seed, i), not on n.
std::vector<Sample> synth_dataset(int64_t n, const SynthConfig& config, uint64_t seed);

// Directory layout shared by generated and ingested datasets:
//   img_XXXX.ppm  (P6)   mask_XXXX.pgm (P5, class ids)
//   sal_XXXX.pgm  (P5)   labels.json   (name -> multi-hot)
std::string sample_name(int64_t index);
void export_dataset(const std::string& dir, const std::vector<Sample>& samples);

// Loads every sample listed in labels.json. Mask and saliency files are
// optional (absent files leave the fields empty) so prediction-only and
// real-image layouts load too.
std::vector<Sample> load_dataset(const std::string& dir, std::vector<std::string>* names_out = nullptr);

} // namespace wegpipe
