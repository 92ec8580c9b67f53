#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "wegpipe/gradcheck.hpp"
#include "wegpipe/rng.hpp"
#include "wegpipe/vit.hpp"

using namespace wegpipe;

namespace {

ViTConfig tiny_config() {
    ViTConfig c;
    c.image_size = 16;
    c.patch_size = 4;
    c.embed_dim = 16;
    c.num_heads = 2;
    c.num_blocks = 2;
    c.mlp_ratio = 2.0;
    c.num_classes = 3;
    return c;
}

Tensor random_image(Rng& rng, int64_t ch, int64_t size) {
    Tensor t({ch, size, size});
    double* v = t.mutable_data();
    for (int64_t i = 0; i < t.size(); ++i) v[i] = rng.uniform(0.0, 1.0);
    return t;
}

// straight-line re-implementation of the forward arithmetic; plain loops,
// no graph, no shared kernels
std::vector<double> oracle_forward(const ViTModel& model, const Tensor& image) {
    const ViTConfig& c = model.config;
    const int64_t p = c.patch_size, g = c.image_size / p, s = g * g, n = s + 1, d = c.embed_dim;
    const int64_t dh = d / c.num_heads, hidden = c.mlp_hidden();

    auto pv = [&](const char* name) { return model.param(name).data(); };
    auto bv = [&](const std::string& name) { return model.param(name).data(); };

    // patch embedding
    std::vector<double> x(static_cast<size_t>(n * d), 0.0);
    const double* wp = pv("patch_embed.weight");
    const double* bp = pv("patch_embed.bias");
    const double* im = image.data();
    for (int64_t py = 0; py < g; ++py) {
        for (int64_t px = 0; px < g; ++px) {
            const int64_t row = py * g + px;
            std::vector<double> patch;
            for (int64_t ch = 0; ch < 3; ++ch) {
                for (int64_t dy = 0; dy < p; ++dy) {
                    for (int64_t dx = 0; dx < p; ++dx) {
                        patch.push_back(
                            im[ch * c.image_size * c.image_size + (py * p + dy) * c.image_size + px * p + dx]);
                    }
                }
            }
            for (int64_t j = 0; j < d; ++j) {
                double acc = bp[j];
                for (size_t k = 0; k < patch.size(); ++k) {
                    acc += patch[k] * wp[k * static_cast<size_t>(d) + static_cast<size_t>(j)];
                }
                x[static_cast<size_t>((row + 1) * d + j)] = acc;
            }
        }
    }
    const double* cls = pv("cls_token");
    for (int64_t j = 0; j < d; ++j) x[static_cast<size_t>(j)] = cls[j];
    const double* pos = pv("pos_embed");
    for (int64_t i = 0; i < n * d; ++i) x[static_cast<size_t>(i)] += pos[i];

    auto layer_norm = [&](const std::vector<double>& in, const double* gamma, const double* beta) {
        std::vector<double> out(in.size());
        const int64_t rows = static_cast<int64_t>(in.size()) / d;
        for (int64_t r = 0; r < rows; ++r) {
            double mean = 0;
            for (int64_t j = 0; j < d; ++j) mean += in[static_cast<size_t>(r * d + j)];
            mean /= static_cast<double>(d);
            double var = 0;
            for (int64_t j = 0; j < d; ++j) {
                const double q = in[static_cast<size_t>(r * d + j)] - mean;
                var += q * q;
            }
            var /= static_cast<double>(d);
            const double inv = 1.0 / std::sqrt(var + 1e-6);
            for (int64_t j = 0; j < d; ++j) {
                out[static_cast<size_t>(r * d + j)] =
                    (in[static_cast<size_t>(r * d + j)] - mean) * inv * gamma[j] + beta[j];
            }
        }
        return out;
    };
    auto linear = [](const std::vector<double>& in, int64_t rows, int64_t din, int64_t dout, const double* w,
                     const double* b) {
        std::vector<double> out(static_cast<size_t>(rows * dout));
        for (int64_t r = 0; r < rows; ++r) {
            for (int64_t j = 0; j < dout; ++j) {
                double acc = b ? b[j] : 0.0;
                for (int64_t k = 0; k < din; ++k) {
                    acc += in[static_cast<size_t>(r * din + k)] * w[k * dout + j];
                }
                out[static_cast<size_t>(r * dout + j)] = acc;
            }
        }
        return out;
    };

    for (int64_t b = 0; b < c.num_blocks; ++b) {
        const std::string pre = "block" + std::to_string(b) + ".";
        auto ln1 = layer_norm(x, bv(pre + "ln1.gamma"), bv(pre + "ln1.beta"));
        auto q = linear(ln1, n, d, d, bv(pre + "attn.wq"), bv(pre + "attn.bq"));
        auto k = linear(ln1, n, d, d, bv(pre + "attn.wk"), bv(pre + "attn.bk"));
        auto v = linear(ln1, n, d, d, bv(pre + "attn.wv"), bv(pre + "attn.bv"));
        std::vector<double> ctx(static_cast<size_t>(n * d));
        for (int64_t hh = 0; hh < c.num_heads; ++hh) {
            for (int64_t i = 0; i < n; ++i) {
                std::vector<double> scores(static_cast<size_t>(n));
                double mx = -1e300;
                for (int64_t j = 0; j < n; ++j) {
                    double acc = 0;
                    for (int64_t e = 0; e < dh; ++e) {
                        acc += q[static_cast<size_t>(i * d + hh * dh + e)] *
                               k[static_cast<size_t>(j * d + hh * dh + e)];
                    }
                    scores[static_cast<size_t>(j)] = acc / std::sqrt(static_cast<double>(dh));
                    mx = std::max(mx, scores[static_cast<size_t>(j)]);
                }
                double denom = 0;
                for (int64_t j = 0; j < n; ++j) {
                    scores[static_cast<size_t>(j)] = std::exp(scores[static_cast<size_t>(j)] - mx);
                    denom += scores[static_cast<size_t>(j)];
                }
                for (int64_t e = 0; e < dh; ++e) {
                    double acc = 0;
                    for (int64_t j = 0; j < n; ++j) {
                        acc += scores[static_cast<size_t>(j)] / denom * v[static_cast<size_t>(j * d + hh * dh + e)];
                    }
                    ctx[static_cast<size_t>(i * d + hh * dh + e)] = acc;
                }
            }
        }
        auto proj = linear(ctx, n, d, d, bv(pre + "attn.wo"), bv(pre + "attn.bo"));
        for (int64_t i = 0; i < n * d; ++i) x[static_cast<size_t>(i)] += proj[static_cast<size_t>(i)];

        auto ln2 = layer_norm(x, bv(pre + "ln2.gamma"), bv(pre + "ln2.beta"));
        auto h1 = linear(ln2, n, d, hidden, bv(pre + "mlp.w1"), bv(pre + "mlp.b1"));
        for (double& e : h1) e = 0.5 * e * (1.0 + std::erf(e / std::sqrt(2.0)));
        auto h2 = linear(h1, n, hidden, d, bv(pre + "mlp.w2"), bv(pre + "mlp.b2"));
        for (int64_t i = 0; i < n * d; ++i) x[static_cast<size_t>(i)] += h2[static_cast<size_t>(i)];
    }

    auto f = layer_norm(x, bv("final_norm.gamma"), bv("final_norm.beta"));
    std::vector<double> cls_feat(f.begin(), f.begin() + d);
    return linear(cls_feat, 1, d, c.num_classes, bv("head.weight"), bv("head.bias"));
}

} // namespace

TEST_CASE("config arithmetic and validation") {
    ViTConfig c = tiny_config();
    c.embed_dim = 8;
    c.num_heads = 2;
    CHECK(c.head_dim() == 4);
    c.image_size = 32;
    c.patch_size = 16;
    CHECK(c.tokens() == 4);
    CHECK(c.seq_len() == 5);

    c.patch_size = 5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.num_heads = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.num_blocks = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("build_model is deterministic in the seed") {
    ViTModel a = build_model(tiny_config(), 9);
    ViTModel b = build_model(tiny_config(), 9);
    ViTModel c = build_model(tiny_config(), 10);
    REQUIRE(a.params.size() == b.params.size());
    bool any_diff = false;
    for (size_t i = 0; i < a.params.size(); ++i) {
        for (int64_t j = 0; j < a.params[i].size(); ++j) {
            CHECK(a.params[i].data()[j] == b.params[i].data()[j]);
            if (a.params[i].data()[j] != c.params[i].data()[j]) any_diff = true;
        }
    }
    CHECK(any_diff);
}

TEST_CASE("patchify raster order and reassembly") {
    // 1x2x2 image with patch 1: four rows of length 1 in raster order
    Tensor small({1, 2, 2}, {1, 2, 3, 4});
    Tensor rows = patchify(small, 1);
    REQUIRE(rows.shape() == std::vector<int64_t>{4, 1});
    for (int64_t i = 0; i < 4; ++i) CHECK(rows.data()[i] == static_cast<double>(i + 1));

    Tensor constant = Tensor::full({3, 8, 8}, 0.7);
    Tensor cp = patchify(constant, 4);
    for (int64_t r = 1; r < cp.dim(0); ++r) {
        for (int64_t j = 0; j < cp.dim(1); ++j) CHECK(cp.at({r, j}) == cp.at({0, j}));
    }

    Rng rng(77);
    Tensor img = random_image(rng, 3, 8);
    Tensor pr = patchify(img, 4);
    // reassemble and compare with the original
    for (int64_t py = 0; py < 2; ++py) {
        for (int64_t px = 0; px < 2; ++px) {
            int64_t k = 0;
            for (int64_t ch = 0; ch < 3; ++ch) {
                for (int64_t dy = 0; dy < 4; ++dy) {
                    for (int64_t dx = 0; dx < 4; ++dx) {
                        CHECK(pr.at({py * 2 + px, k}) == img.at({ch, py * 4 + dy, px * 4 + dx}));
                        ++k;
                    }
                }
            }
        }
    }
    CHECK_THROWS_AS(patchify(img, 3), ShapeError);
}

TEST_CASE("forward: trace rows are stochastic, logits ignore the recording flag") {
    ViTModel m = build_model(tiny_config(), 4);
    Rng rng(5);
    Tensor img = random_image(rng, 3, 16);

    ForwardResult with = vit_forward(m, img, true);
    ForwardResult without = vit_forward(m, img, false);
    REQUIRE(with.trace);
    CHECK(!without.trace);
    for (int64_t i = 0; i < with.logits.size(); ++i) CHECK(with.logits.data()[i] == without.logits.data()[i]);

    for (int64_t b = 0; b < 2; ++b) {
        Tensor attn = with.trace->attention(b);
        for (int64_t h = 0; h < 2; ++h) {
            for (int64_t i = 0; i < attn.dim(1); ++i) {
                double s = 0;
                for (int64_t j = 0; j < attn.dim(2); ++j) s += attn.at({h, i, j});
                CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }

    // pure function of (weights, image)
    ForwardResult again = vit_forward(m, img, false);
    for (int64_t i = 0; i < with.logits.size(); ++i) CHECK(again.logits.data()[i] == with.logits.data()[i]);

    Tensor zero({3, 16, 16});
    CHECK(vit_forward(m, zero, false).logits.data()[0] == vit_forward(m, zero, false).logits.data()[0]);
}

TEST_CASE("forward matches the straight-line oracle") {
    ViTModel m = build_model(tiny_config(), 21);
    Rng rng(22);
    Tensor img = random_image(rng, 3, 16);
    ForwardResult r = vit_forward(m, img, false);
    const std::vector<double> want = oracle_forward(m, img);
    REQUIRE(r.logits.size() == static_cast<int64_t>(want.size()));
    for (size_t i = 0; i < want.size(); ++i) {
        CHECK(r.logits.data()[i] == doctest::Approx(want[i]).epsilon(1e-9));
    }
}

TEST_CASE("class-score gradients match finite differences on selected weights") {
    ViTConfig cfg = tiny_config();
    ViTModel m = build_model(cfg, 33);
    Rng rng(34);
    Tensor img = random_image(rng, 3, 16);

    // analytic grads from one backward pass, numeric from forwards with
    // perturbed weights
    AttentionTrace tr = vit_build_graph(m, img, false);
    Graph& g = *tr.graph;
    g.backward(g.select(tr.logits_id, 1));

    Rng pick(35);
    for (const char* pname : {"head.weight", "block0.attn.wq", "block1.mlp.b2", "patch_embed.weight"}) {
        size_t pi = 0;
        while (m.names[pi] != pname) ++pi;
        const Tensor& analytic = g.grad(tr.param_ids[pi]);
        REQUIRE(!analytic.empty());
        for (int rep = 0; rep < 3; ++rep) {
            const int64_t j = pick.uniform_int(m.params[pi].size());
            const double eps = 1e-5;
            ViTModel probe = m;
            probe.params[pi].mutable_data()[j] += eps;
            const double fp = vit_forward(probe, img, false).logits.data()[1];
            probe.params[pi].mutable_data()[j] -= 2 * eps;
            const double fm = vit_forward(probe, img, false).logits.data()[1];
            const double central = (fp - fm) / (2 * eps);
            CHECK(std::abs(analytic.data()[j] - central) / (std::abs(central) + 1e-12) < 1e-4);
        }
    }
}

TEST_CASE("weights round-trip bit-exactly and reject corruption") {
    namespace fs = std::filesystem;
    const std::string prefix = (fs::temp_directory_path() / "wegpipe_model").string();
    ViTModel m = build_model(tiny_config(), 55);
    save_weights(m, prefix);
    ViTModel r = load_weights(prefix);
    CHECK(r.config.embed_dim == m.config.embed_dim);
    REQUIRE(r.params.size() == m.params.size());
    for (size_t i = 0; i < m.params.size(); ++i) {
        CHECK(r.names[i] == m.names[i]);
        for (int64_t j = 0; j < m.params[i].size(); ++j) {
            CHECK(std::memcmp(&r.params[i].data()[j], &m.params[i].data()[j], sizeof(double)) == 0);
        }
    }

    // truncated blob: no partial model
    {
        std::ifstream in(prefix + ".tnsr", std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(prefix + ".tnsr", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
    }
    CHECK_THROWS_AS(load_weights(prefix), FormatError);
    save_weights(m, prefix);

    // tampered manifest shape: error names the parameter
    {
        std::ifstream in(prefix + ".manifest.json");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const std::string needle = "\"name\": \"cls_token\",\n      \"offset\"";
        REQUIRE(text.find("cls_token") != std::string::npos);
        const size_t shape_pos = text.find("\"shape\"", text.find("cls_token"));
        REQUIRE(shape_pos != std::string::npos);
        text.replace(text.find('[', shape_pos), 1, "[99, ");
        std::ofstream out(prefix + ".manifest.json");
        out << text;
    }
    try {
        load_weights(prefix);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("cls_token") != std::string::npos);
    }
    std::remove((prefix + ".manifest.json").c_str());
    std::remove((prefix + ".tnsr").c_str());
}

TEST_CASE("positional embedding resize keeps the class token and the grid corners") {
    ViTModel m = build_model(tiny_config(), 66);
    ViTModel r = resize_for_image(m, 24); // 4x4 -> 6x6 grid
    CHECK(r.config.image_size == 24);
    const Tensor& p0 = m.param("pos_embed");
    const Tensor& p1 = r.param("pos_embed");
    REQUIRE(p1.dim(0) == 37);
    for (int64_t j = 0; j < 16; ++j) CHECK(p1.at({0, j}) == p0.at({0, j}));
    CHECK_THROWS_AS(resize_for_image(m, 23), ConfigError);

    Rng rng(67);
    Tensor img = random_image(rng, 3, 24);
    CHECK(vit_forward(r, img, false).logits.all_finite());
}
