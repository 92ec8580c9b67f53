#include "wegpipe/netpbm.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

namespace wegpipe {
namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// next integer token, skipping whitespace and '#' comments
int64_t read_pnm_int(FILE* f, const std::string& path) {
    int ch = std::fgetc(f);
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = std::fgetc(f);
        } else if (std::isspace(ch)) {
            ch = std::fgetc(f);
        } else {
            break;
        }
    }
    if (ch == EOF || !std::isdigit(ch)) throw FormatError("malformed netpbm header in " + path);
    int64_t v = 0;
    while (ch != EOF && std::isdigit(ch)) {
        v = v * 10 + (ch - '0');
        ch = std::fgetc(f);
    }
    if (ch == EOF) throw FormatError("truncated netpbm header in " + path);
    return v; // ch consumed the single whitespace after the token
}

void write_pnm(const std::string& path, const char* magic, int64_t h, int64_t w,
               const std::vector<uint8_t>& payload) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open for writing: " + path);
    std::string header = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size() ||
        std::fwrite(payload.data(), 1, payload.size(), f.get()) != payload.size()) {
        throw IoError("short write: " + path);
    }
}

std::vector<uint8_t> read_pnm(const std::string& path, const char* magic, int64_t channels, int64_t& h,
                              int64_t& w) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open for reading: " + path);
    char m0 = static_cast<char>(std::fgetc(f.get()));
    char m1 = static_cast<char>(std::fgetc(f.get()));
    if (m0 != magic[0] || m1 != magic[1]) {
        throw FormatError("expected " + std::string(magic) + " file: " + path);
    }
    w = read_pnm_int(f.get(), path);
    h = read_pnm_int(f.get(), path);
    const int64_t maxval = read_pnm_int(f.get(), path);
    if (w <= 0 || h <= 0 || maxval != 255) throw FormatError("unsupported netpbm geometry in " + path);
    std::vector<uint8_t> data(static_cast<size_t>(h * w * channels));
    if (std::fread(data.data(), 1, data.size(), f.get()) != data.size()) {
        throw FormatError("truncated netpbm payload in " + path);
    }
    return data;
}

} // namespace

void write_ppm(const std::string& path, int64_t h, int64_t w, const std::vector<uint8_t>& rgb) {
    if (static_cast<int64_t>(rgb.size()) != h * w * 3) {
        throw ShapeError("rgb payload size does not match " + std::to_string(h) + "x" + std::to_string(w));
    }
    write_pnm(path, "P6", h, w, rgb);
}

void write_pgm(const std::string& path, const ByteImage& img) {
    write_pnm(path, "P5", img.h, img.w, img.pixels);
}

std::vector<uint8_t> read_ppm(const std::string& path, int64_t& h, int64_t& w) {
    return read_pnm(path, "P6", 3, h, w);
}

ByteImage read_pgm(const std::string& path) {
    ByteImage img;
    img.pixels = read_pnm(path, "P5", 1, img.h, img.w);
    return img;
}

std::vector<uint8_t> tensor_to_rgb8(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("expected [3 x H x W] image, got " + image.shape_str());
    }
    const int64_t h = image.dim(1), w = image.dim(2);
    std::vector<uint8_t> rgb(static_cast<size_t>(h * w * 3));
    const double* v = image.data();
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                const double val = std::clamp(v[c * h * w + y * w + x], 0.0, 1.0);
                rgb[static_cast<size_t>((y * w + x) * 3 + c)] = static_cast<uint8_t>(std::lround(val * 255.0));
            }
        }
    }
    return rgb;
}

Tensor rgb8_to_tensor(const std::vector<uint8_t>& rgb, int64_t h, int64_t w) {
    if (static_cast<int64_t>(rgb.size()) != h * w * 3) throw ShapeError("rgb payload size mismatch");
    Tensor t({3, h, w});
    double* v = t.mutable_data();
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                v[c * h * w + y * w + x] = rgb[static_cast<size_t>((y * w + x) * 3 + c)] / 255.0;
            }
        }
    }
    return t;
}

ByteImage tensor_to_gray8(const Tensor& map) {
    if (map.rank() != 2) throw ShapeError("expected [H x W] map, got " + map.shape_str());
    ByteImage img(map.dim(0), map.dim(1));
    const double* v = map.data();
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        img.pixels[i] = static_cast<uint8_t>(std::lround(std::clamp(v[i], 0.0, 1.0) * 255.0));
    }
    return img;
}

Tensor gray8_to_tensor(const ByteImage& img) {
    Tensor t({img.h, img.w});
    double* v = t.mutable_data();
    for (size_t i = 0; i < img.pixels.size(); ++i) v[i] = img.pixels[i] / 255.0;
    return t;
}

} // namespace wegpipe
