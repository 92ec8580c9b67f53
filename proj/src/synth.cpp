#include "wegpipe/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "wegpipe/refine.hpp"
#include "wegpipe/rng.hpp"

namespace wegpipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Placed {
    int64_t cls;
    int64_t cx, cy, r;
};

bool boxes_clash(const Placed& a, const Placed& b) {
    const int64_t margin = 2;
    return std::abs(a.cx - b.cx) <= a.r + b.r + margin && std::abs(a.cy - b.cy) <= a.r + b.r + margin;
}

bool inside_shape(const Placed& p, int64_t x, int64_t y) {
    const double dx = static_cast<double>(x - p.cx);
    const double dy = static_cast<double>(y - p.cy);
    const double r = static_cast<double>(p.r);
    switch (p.cls) {
    case 1: // disk
        return dx * dx + dy * dy <= r * r;
    case 2: // axis-aligned square
        return std::abs(dx) <= 0.9 * r && std::abs(dy) <= 0.9 * r;
    default: { // upward triangle
        const double ax = 0.0, ay = -r;
        const double bx = -0.95 * r, by = 0.8 * r;
        const double cx = 0.95 * r, cy = 0.8 * r;
        const auto side = [&](double x0, double y0, double x1, double y1) {
            return (x1 - x0) * (dy - y0) - (y1 - y0) * (dx - x0);
        };
        const double s1 = side(ax, ay, bx, by);
        const double s2 = side(bx, by, cx, cy);
        const double s3 = side(cx, cy, ax, ay);
        const bool has_neg = (s1 < 0) || (s2 < 0) || (s3 < 0);
        const bool has_pos = (s1 > 0) || (s2 > 0) || (s3 > 0);
        return !(has_neg && has_pos);
    }
    }
}

constexpr double kBaseColor[4][3] = {
    {0.0, 0.0, 0.0},    // unused (background handled separately)
    {0.85, 0.15, 0.15}, // disk
    {0.15, 0.75, 0.20}, // square
    {0.15, 0.25, 0.85}, // triangle
};

// 5-wide box blur, run separably in both directions
void box_blur(Tensor& map) {
    const int64_t h = map.dim(0), w = map.dim(1);
    Tensor tmp(map.shape());
    double* t = tmp.mutable_data();
    const double* src = map.data();
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            double s = 0.0;
            int cnt = 0;
            for (int64_t k = -2; k <= 2; ++k) {
                const int64_t xx = x + k;
                if (xx < 0 || xx >= w) continue;
                s += src[y * w + xx];
                ++cnt;
            }
            t[y * w + x] = s / cnt;
        }
    }
    double* o = map.mutable_data();
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            double s = 0.0;
            int cnt = 0;
            for (int64_t k = -2; k <= 2; ++k) {
                const int64_t yy = y + k;
                if (yy < 0 || yy >= h) continue;
                s += t[yy * w + x];
                ++cnt;
            }
            o[y * w + x] = s / cnt;
        }
    }
}

// Desaturated background clutter. Distractors never enter the ground-truth
// mask or the saliency foreground; they exist so the classifier has
// something irrelevant to learn to ignore.
struct Distractor {
    int kind; // 0 bar, 1 ring, 2 blob
    double cx, cy;
    double len, thick, angle; // bar
    double r;                 // ring / blob
    std::array<double, 3> color;
};

Distractor make_distractor(const SynthConfig& cfg, Rng& rng) {
    Distractor d;
    d.kind = static_cast<int>(rng.uniform_int(3));
    d.cx = rng.uniform(2.0, static_cast<double>(cfg.image_size - 2));
    d.cy = rng.uniform(2.0, static_cast<double>(cfg.image_size - 2));
    d.len = rng.uniform(6.0, 16.0);
    d.thick = rng.uniform(1.0, 2.5);
    d.angle = rng.uniform(0.0, M_PI);
    d.r = rng.uniform(2.0, 6.0);
    // some clutter borrows a class color (thin bars only, so the geometry
    // stays unambiguous); presence of a color alone then no longer implies
    // the class and shallow color-driven attention lands on background
    const bool class_colored = rng.coin(cfg.colored_clutter);
    const int64_t borrowed = 1 + rng.uniform_int(cfg.num_classes);
    const double base = rng.uniform(0.15, 0.75);
    if (class_colored) {
        d.kind = 0;
        d.len = rng.uniform(6.0, 13.0);
        d.thick = rng.uniform(1.0, 2.0);
        for (int c = 0; c < 3; ++c) {
            d.color[static_cast<size_t>(c)] = kBaseColor[borrowed][c] + rng.uniform(-0.06, 0.06);
        }
    } else {
        for (int c = 0; c < 3; ++c) d.color[static_cast<size_t>(c)] = base + rng.uniform(-0.08, 0.08);
    }
    return d;
}

bool inside_distractor(const Distractor& d, int64_t x, int64_t y) {
    const double dx = static_cast<double>(x) - d.cx;
    const double dy = static_cast<double>(y) - d.cy;
    switch (d.kind) {
    case 0: { // bar
        const double along = dx * std::cos(d.angle) + dy * std::sin(d.angle);
        const double perp = -dx * std::sin(d.angle) + dy * std::cos(d.angle);
        return std::abs(along) <= 0.5 * d.len && std::abs(perp) <= 0.5 * d.thick;
    }
    case 1: { // ring
        const double dist = std::sqrt(dx * dx + dy * dy);
        return std::abs(dist - d.r) <= 1.2;
    }
    default: // blob
        return dx * dx + dy * dy <= 0.35 * d.r * d.r + 2.0;
    }
}

Sample make_sample(const SynthConfig& cfg, Rng& rng) {
    const int64_t sz = cfg.image_size;
    Sample s;
    s.labels.assign(static_cast<size_t>(cfg.num_classes), 0);
    s.gt_mask = ByteImage(sz, sz);

    // textured background: coarse value noise upsampled, plus fine jitter
    const int64_t coarse = 8;
    Tensor grid({coarse, coarse});
    {
        double* g = grid.mutable_data();
        for (int64_t i = 0; i < grid.size(); ++i) g[i] = rng.uniform(0.25, 0.50);
    }
    Tensor base = bilinear_resize(grid, sz, sz);

    std::vector<Distractor> clutter;
    if (cfg.max_clutter > 0) {
        const int64_t span = cfg.max_clutter - cfg.min_clutter + 1;
        const int64_t n_clutter = cfg.min_clutter + (span > 1 ? rng.uniform_int(span) : 0);
        for (int64_t i = 0; i < n_clutter; ++i) clutter.push_back(make_distractor(cfg, rng));
    }

    // choose 1..3 distinct classes and place them without overlap
    int64_t want = 1 + rng.uniform_int(std::min<int64_t>(3, cfg.num_classes));
    std::vector<int64_t> order(static_cast<size_t>(cfg.num_classes));
    for (int64_t i = 0; i < cfg.num_classes; ++i) order[static_cast<size_t>(i)] = i + 1;
    for (int64_t i = cfg.num_classes - 1; i > 0; --i) {
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(i + 1))]);
    }

    std::vector<Placed> placed;
    for (int64_t i = 0; i < want; ++i) {
        const int64_t cls = order[static_cast<size_t>(i)];
        bool ok = false;
        Placed cand{cls, 0, 0, 0};
        for (int attempt = 0; attempt < 80 && !ok; ++attempt) {
            const int64_t rlo = cfg.min_radius;
            const int64_t rhi = attempt < 40 ? cfg.max_radius : cfg.min_radius;
            cand.r = rlo + rng.uniform_int(rhi - rlo + 1);
            cand.cx = cand.r + 1 + rng.uniform_int(sz - 2 * cand.r - 2);
            cand.cy = cand.r + 1 + rng.uniform_int(sz - 2 * cand.r - 2);
            ok = true;
            for (const Placed& p : placed) {
                if (boxes_clash(cand, p)) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) {
            placed.push_back(cand);
            s.labels[static_cast<size_t>(cls - 1)] = 1;
        }
    }

    // per-instance color jitter, drawn before rasterization so the RNG
    // sequence does not depend on shape areas
    std::vector<std::array<double, 3>> colors;
    for (const Placed& p : placed) {
        std::array<double, 3> col{};
        for (int c = 0; c < 3; ++c) col[static_cast<size_t>(c)] = kBaseColor[p.cls][c] + rng.uniform(-0.06, 0.06);
        colors.push_back(col);
    }

    s.image = Tensor({3, sz, sz});
    double* im = s.image.mutable_data();
    const double* bg = base.data();
    for (int64_t y = 0; y < sz; ++y) {
        for (int64_t x = 0; x < sz; ++x) {
            int shape = -1;
            for (size_t i = 0; i < placed.size(); ++i) {
                if (inside_shape(placed[i], x, y)) {
                    shape = static_cast<int>(i);
                    break;
                }
            }
            int decal = -1;
            if (shape < 0) {
                for (size_t i = 0; i < clutter.size(); ++i) {
                    if (inside_distractor(clutter[i], x, y)) {
                        decal = static_cast<int>(i);
                        break;
                    }
                }
            }
            const double g = bg[y * sz + x] + rng.uniform(-0.04, 0.04);
            for (int64_t c = 0; c < 3; ++c) {
                double v;
                if (shape >= 0) {
                    v = colors[static_cast<size_t>(shape)][static_cast<size_t>(c)] + rng.uniform(-0.02, 0.02);
                } else if (decal >= 0) {
                    v = clutter[static_cast<size_t>(decal)].color[static_cast<size_t>(c)] +
                        rng.uniform(-0.02, 0.02);
                } else {
                    v = g + rng.uniform(-0.02, 0.02);
                }
                im[c * sz * sz + y * sz + x] = std::clamp(v, 0.0, 1.0);
            }
            if (shape >= 0) s.gt_mask.at(y, x) = static_cast<uint8_t>(placed[static_cast<size_t>(shape)].cls);
        }
    }

    // imperfect saliency: blurred foreground mask plus noise
    s.saliency = Tensor({sz, sz});
    double* sal = s.saliency.mutable_data();
    for (int64_t i = 0; i < sz * sz; ++i) sal[i] = s.gt_mask.pixels[static_cast<size_t>(i)] ? 1.0 : 0.0;
    box_blur(s.saliency);
    sal = s.saliency.mutable_data();
    for (int64_t i = 0; i < sz * sz; ++i) {
        sal[i] = std::clamp(sal[i] + rng.uniform(-cfg.saliency_noise, cfg.saliency_noise), 0.0, 1.0);
    }
    return s;
}

} // namespace

std::vector<Sample> synth_dataset(int64_t n, const SynthConfig& config, uint64_t seed) {
    if (config.num_classes < 2 || config.num_classes > 3) {
        throw ConfigError("synthetic generator defines classes 1..3; num_classes must be 2 or 3");
    }
    if (config.image_size < 4 * config.max_radius) {
        throw ConfigError("image_size too small for the configured shape radii");
    }
    if (config.min_clutter < 0 || config.max_clutter < config.min_clutter ||
        config.colored_clutter < 0.0 || config.colored_clutter > 1.0) {
        throw ConfigError("invalid clutter configuration");
    }
    std::vector<Sample> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        Rng rng(seed * 0x9e3779b97f4a7c15ull + static_cast<uint64_t>(i) + 1);
        out.push_back(make_sample(config, rng));
    }
    return out;
}

std::string sample_name(int64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%04lld", static_cast<long long>(index));
    return buf;
}

void export_dataset(const std::string& dir, const std::vector<Sample>& samples) {
    fs::create_directories(dir);
    json labels = json::object();
    for (size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        const std::string name = sample_name(static_cast<int64_t>(i));
        const std::string suffix = name.substr(4);
        write_ppm(dir + "/" + name + ".ppm", s.image.dim(1), s.image.dim(2), tensor_to_rgb8(s.image));
        write_pgm(dir + "/mask_" + suffix + ".pgm", s.gt_mask);
        write_pgm(dir + "/sal_" + suffix + ".pgm", tensor_to_gray8(s.saliency));
        labels[name] = s.labels;
    }
    std::ofstream f(dir + "/labels.json");
    if (!f) throw IoError("cannot write " + dir + "/labels.json");
    f << labels.dump(2) << "\n";
}

std::vector<Sample> load_dataset(const std::string& dir, std::vector<std::string>* names_out) {
    std::ifstream f(dir + "/labels.json");
    if (!f) throw IoError("cannot read " + dir + "/labels.json");
    json labels;
    try {
        labels = json::parse(f);
    } catch (const json::exception& e) {
        throw FormatError("corrupt labels.json in " + dir + ": " + e.what());
    }
    std::vector<Sample> out;
    for (auto it = labels.begin(); it != labels.end(); ++it) {
        const std::string& name = it.key();
        if (name.size() < 5 || name.substr(0, 4) != "img_") {
            throw FormatError("unexpected sample key '" + name + "' in labels.json");
        }
        const std::string suffix = name.substr(4);
        Sample s;
        s.labels = it.value().get<std::vector<uint8_t>>();
        int64_t h = 0, w = 0;
        auto rgb = read_ppm(dir + "/" + name + ".ppm", h, w);
        s.image = rgb8_to_tensor(rgb, h, w);
        const std::string mask_path = dir + "/mask_" + suffix + ".pgm";
        if (fs::exists(mask_path)) s.gt_mask = read_pgm(mask_path);
        const std::string sal_path = dir + "/sal_" + suffix + ".pgm";
        if (fs::exists(sal_path)) s.saliency = gray8_to_tensor(read_pgm(sal_path));
        if (names_out) names_out->push_back(name);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace wegpipe
