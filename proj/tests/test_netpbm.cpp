#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "wegpipe/netpbm.hpp"
#include "wegpipe/rng.hpp"

using namespace wegpipe;

namespace {
std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
} // namespace

TEST_CASE("ppm and pgm round-trips") {
    Rng rng(1);
    const int64_t h = 5, w = 7;
    std::vector<uint8_t> rgb(static_cast<size_t>(h * w * 3));
    for (auto& b : rgb) b = static_cast<uint8_t>(rng.uniform_int(256));
    const std::string ppm = temp_path("wegpipe_t.ppm");
    write_ppm(ppm, h, w, rgb);
    int64_t rh = 0, rw = 0;
    CHECK(read_ppm(ppm, rh, rw) == rgb);
    CHECK(rh == h);
    CHECK(rw == w);

    ByteImage img(4, 6);
    for (auto& b : img.pixels) b = static_cast<uint8_t>(rng.uniform_int(256));
    const std::string pgm = temp_path("wegpipe_t.pgm");
    write_pgm(pgm, img);
    ByteImage r = read_pgm(pgm);
    CHECK(r.pixels == img.pixels);
    std::remove(ppm.c_str());
    std::remove(pgm.c_str());
}

TEST_CASE("reader accepts comments, rejects bad files") {
    const std::string path = temp_path("wegpipe_c.pgm");
    {
        std::ofstream f(path, std::ios::binary);
        f << "P5\n# a comment\n2 2\n# another\n255\n";
        f.write("\x01\x02\x03\x04", 4);
    }
    ByteImage img = read_pgm(path);
    CHECK(img.w == 2);
    CHECK(img.pixels[3] == 4);

    {
        std::ofstream f(path, std::ios::binary);
        f << "P6\n2 2\n255\n";
    }
    CHECK_THROWS_AS(read_pgm(path), FormatError); // wrong magic
    {
        std::ofstream f(path, std::ios::binary);
        f << "P5\n2 2\n255\nxx";
    }
    CHECK_THROWS_AS(read_pgm(path), FormatError); // truncated payload
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_pgm(path), IoError);
}

TEST_CASE("tensor conversions quantize symmetrically") {
    Tensor map({2, 2}, {0.0, 0.5, 1.0, 2.0});
    ByteImage img = tensor_to_gray8(map);
    CHECK(img.pixels[0] == 0);
    CHECK(img.pixels[1] == 128);
    CHECK(img.pixels[2] == 255);
    CHECK(img.pixels[3] == 255); // clamped
    Tensor back = gray8_to_tensor(img);
    CHECK(back.at({0, 1}) == doctest::Approx(128.0 / 255.0));

    Tensor rgbt({3, 1, 2}, {0.1, 0.9, 0.2, 0.8, 0.3, 0.7});
    auto rgb = tensor_to_rgb8(rgbt);
    Tensor rt = rgb8_to_tensor(rgb, 1, 2);
    for (int64_t i = 0; i < rt.size(); ++i) {
        CHECK(std::abs(rt.data()[i] - rgbt.data()[i]) <= 0.5 / 255.0 + 1e-12);
    }
}
