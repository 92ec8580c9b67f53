#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wegpipe/tensor.hpp"

namespace wegpipe {

// 8-bit grayscale grid used for masks, saliency and label images.
struct ByteImage {
    int64_t h = 0;
    int64_t w = 0;
    std::vector<uint8_t> pixels; // row-major

    ByteImage() = default;
    ByteImage(int64_t h_, int64_t w_, uint8_t fill = 0)
        : h(h_), w(w_), pixels(static_cast<size_t>(h_ * w_), fill) {}

    uint8_t at(int64_t y, int64_t x) const { return pixels[static_cast<size_t>(y * w + x)]; }
    uint8_t& at(int64_t y, int64_t x) { return pixels[static_cast<size_t>(y * w + x)]; }
    bool same_size(const ByteImage& o) const { return h == o.h && w == o.w; }
};

// Binary netpbm, maxval 255. write_* always emit the canonical header
// "P6\n<w> <h>\n255\n"; readers accept comments and arbitrary whitespace.
void write_ppm(const std::string& path, int64_t h, int64_t w, const std::vector<uint8_t>& rgb);
void write_pgm(const std::string& path, const ByteImage& img);
std::vector<uint8_t> read_ppm(const std::string& path, int64_t& h, int64_t& w);
ByteImage read_pgm(const std::string& path);

// [3 x H x W] tensor in [0,1] <-> interleaved 8-bit RGB
std::vector<uint8_t> tensor_to_rgb8(const Tensor& image);
Tensor rgb8_to_tensor(const std::vector<uint8_t>& rgb, int64_t h, int64_t w);

// [H x W] tensor in [0,1] <-> 8-bit grayscale
ByteImage tensor_to_gray8(const Tensor& map);
Tensor gray8_to_tensor(const ByteImage& img);

} // namespace wegpipe
