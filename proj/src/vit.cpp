#include "wegpipe/vit.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "wegpipe/refine.hpp"
#include "wegpipe/rng.hpp"

namespace wegpipe {

using nlohmann::json;

void ViTConfig::validate() const {
    if (image_size <= 0 || patch_size <= 0 || embed_dim <= 0 || num_heads <= 0 || num_blocks <= 0 ||
        num_classes <= 0 || mlp_ratio <= 0.0) {
        throw ConfigError("all ViT config fields must be positive");
    }
    if (image_size % patch_size != 0) {
        throw ConfigError("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
                          std::to_string(patch_size));
    }
    if (embed_dim % num_heads != 0) {
        throw ConfigError("embed_dim " + std::to_string(embed_dim) + " not divisible by num_heads " +
                          std::to_string(num_heads));
    }
}

int64_t ViTConfig::mlp_hidden() const {
    return static_cast<int64_t>(std::llround(static_cast<double>(embed_dim) * mlp_ratio));
}

Tensor& ViTModel::param(const std::string& name) {
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return params[i];
    }
    throw UsageError("unknown parameter: " + name);
}

const Tensor& ViTModel::param(const std::string& name) const {
    return const_cast<ViTModel*>(this)->param(name);
}

int64_t ViTModel::total_elements() const {
    int64_t n = 0;
    for (const Tensor& t : params) n += t.size();
    return n;
}

namespace {

enum class Init { Projection, Bias, Embedding, LnGamma, LnBeta };

struct ParamSpec {
    std::string name;
    std::vector<int64_t> shape;
    Init init;
};

std::vector<ParamSpec> param_specs(const ViTConfig& c) {
    const int64_t d = c.embed_dim, h = c.mlp_hidden();
    std::vector<ParamSpec> specs;
    specs.push_back({"patch_embed.weight", {c.patch_dim(), d}, Init::Projection});
    specs.push_back({"patch_embed.bias", {d}, Init::Bias});
    specs.push_back({"cls_token", {1, d}, Init::Embedding});
    specs.push_back({"pos_embed", {c.seq_len(), d}, Init::Embedding});
    for (int64_t b = 0; b < c.num_blocks; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        specs.push_back({p + "ln1.gamma", {d}, Init::LnGamma});
        specs.push_back({p + "ln1.beta", {d}, Init::LnBeta});
        specs.push_back({p + "attn.wq", {d, d}, Init::Projection});
        specs.push_back({p + "attn.bq", {d}, Init::Bias});
        specs.push_back({p + "attn.wk", {d, d}, Init::Projection});
        specs.push_back({p + "attn.bk", {d}, Init::Bias});
        specs.push_back({p + "attn.wv", {d, d}, Init::Projection});
        specs.push_back({p + "attn.bv", {d}, Init::Bias});
        specs.push_back({p + "attn.wo", {d, d}, Init::Projection});
        specs.push_back({p + "attn.bo", {d}, Init::Bias});
        specs.push_back({p + "ln2.gamma", {d}, Init::LnGamma});
        specs.push_back({p + "ln2.beta", {d}, Init::LnBeta});
        specs.push_back({p + "mlp.w1", {d, h}, Init::Projection});
        specs.push_back({p + "mlp.b1", {h}, Init::Bias});
        specs.push_back({p + "mlp.w2", {h, d}, Init::Projection});
        specs.push_back({p + "mlp.b2", {d}, Init::Bias});
    }
    specs.push_back({"final_norm.gamma", {d}, Init::LnGamma});
    specs.push_back({"final_norm.beta", {d}, Init::LnBeta});
    specs.push_back({"head.weight", {d, c.num_classes}, Init::Projection});
    specs.push_back({"head.bias", {c.num_classes}, Init::Bias});
    return specs;
}

json config_to_json(const ViTConfig& c) {
    return json{{"image_size", c.image_size},   {"patch_size", c.patch_size}, {"embed_dim", c.embed_dim},
                {"num_heads", c.num_heads},     {"num_blocks", c.num_blocks}, {"mlp_ratio", c.mlp_ratio},
                {"num_classes", c.num_classes}};
}

ViTConfig config_from_json(const json& j) {
    ViTConfig c;
    c.image_size = j.at("image_size").get<int64_t>();
    c.patch_size = j.at("patch_size").get<int64_t>();
    c.embed_dim = j.at("embed_dim").get<int64_t>();
    c.num_heads = j.at("num_heads").get<int64_t>();
    c.num_blocks = j.at("num_blocks").get<int64_t>();
    c.mlp_ratio = j.at("mlp_ratio").get<double>();
    c.num_classes = j.at("num_classes").get<int64_t>();
    return c;
}

} // namespace

ViTModel build_model(const ViTConfig& config, uint64_t seed) {
    config.validate();
    ViTModel m;
    m.config = config;
    Rng rng(seed);
    for (const ParamSpec& spec : param_specs(config)) {
        Tensor t(spec.shape);
        double* v = t.mutable_data();
        switch (spec.init) {
        case Init::Projection:
            for (int64_t i = 0; i < t.size(); ++i) v[i] = rng.truncated_normal(0.02);
            break;
        case Init::Embedding:
            for (int64_t i = 0; i < t.size(); ++i) v[i] = rng.normal() * 0.02;
            break;
        case Init::LnGamma:
            t.fill(1.0);
            break;
        case Init::Bias:
        case Init::LnBeta:
            break; // zeros
        }
        m.names.push_back(spec.name);
        m.params.push_back(std::move(t));
    }
    return m;
}

Tensor patchify(const Tensor& image, int64_t patch_size) {
    if (image.rank() != 3) {
        throw ShapeError("patchify expects a [C x H x W] image, got " + image.shape_str());
    }
    const int64_t ch = image.dim(0);
    const int64_t h = image.dim(1), w = image.dim(2);
    if (h != w) throw ShapeError("patchify expects a square image, got " + image.shape_str());
    if (patch_size <= 0 || h % patch_size != 0) {
        throw ShapeError("image size " + std::to_string(h) + " not divisible by patch size " +
                         std::to_string(patch_size));
    }
    const int64_t g = h / patch_size;
    const int64_t s = g * g;
    const int64_t pd = ch * patch_size * patch_size;
    Tensor out({s, pd});
    double* o = out.mutable_data();
    const double* im = image.data();
    for (int64_t py = 0; py < g; ++py) {
        for (int64_t px = 0; px < g; ++px) {
            double* row = o + (py * g + px) * pd;
            int64_t k = 0;
            for (int64_t c = 0; c < ch; ++c) {
                for (int64_t dy = 0; dy < patch_size; ++dy) {
                    for (int64_t dx = 0; dx < patch_size; ++dx) {
                        row[k++] = im[c * h * w + (py * patch_size + dy) * w + (px * patch_size + dx)];
                    }
                }
            }
        }
    }
    return out;
}

AttentionTrace vit_build_graph(const ViTModel& model, const Tensor& image, bool record_attention) {
    const ViTConfig& c = model.config;
    if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != image.dim(2)) {
        throw ShapeError("forward expects a square [3 x H x W] image, got " + image.shape_str());
    }
    const int64_t img = image.dim(1);
    const int64_t g = img / c.patch_size;
    const int64_t n = g * g + 1;
    const int64_t d = c.embed_dim;
    const int64_t dh = c.head_dim();

    AttentionTrace tr;
    tr.graph = std::make_shared<Graph>();
    Graph& G = *tr.graph;
    tr.num_blocks = c.num_blocks;
    tr.num_heads = c.num_heads;
    tr.seq = n;

    tr.param_ids.reserve(model.params.size());
    for (const Tensor& p : model.params) tr.param_ids.push_back(G.param(p));
    auto pid = [&](const std::string& name) {
        for (size_t i = 0; i < model.names.size(); ++i) {
            if (model.names[i] == name) return tr.param_ids[i];
        }
        throw UsageError("unknown parameter: " + name);
    };

    tr.input_id = G.input(patchify(image, c.patch_size));
    if (G.value(pid("pos_embed")).dim(0) != n) {
        throw ShapeError("positional embedding covers " + std::to_string(G.value(pid("pos_embed")).dim(0)) +
                         " tokens but image yields " + std::to_string(n) + "; resize the model first");
    }

    NodeId tokens = G.add_bias(G.matmul(tr.input_id, pid("patch_embed.weight")), pid("patch_embed.bias"));
    NodeId x = G.add(G.concat_rows(pid("cls_token"), tokens), pid("pos_embed"));

    for (int64_t b = 0; b < c.num_blocks; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        NodeId ln1 = G.layer_norm(x, pid(p + "ln1.gamma"), pid(p + "ln1.beta"));
        NodeId q = G.add_bias(G.matmul(ln1, pid(p + "attn.wq")), pid(p + "attn.bq"));
        NodeId k = G.add_bias(G.matmul(ln1, pid(p + "attn.wk")), pid(p + "attn.bk"));
        NodeId v = G.add_bias(G.matmul(ln1, pid(p + "attn.wv")), pid(p + "attn.bv"));

        std::vector<NodeId> head_attn;
        NodeId ctx = -1;
        for (int64_t hh = 0; hh < c.num_heads; ++hh) {
            NodeId qh = G.slice_cols(q, hh * dh, (hh + 1) * dh);
            NodeId kh = G.slice_cols(k, hh * dh, (hh + 1) * dh);
            NodeId vh = G.slice_cols(v, hh * dh, (hh + 1) * dh);
            NodeId scores = G.scale(G.matmul(qh, G.transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
            NodeId attn = G.softmax(scores, 1);
            head_attn.push_back(attn);
            NodeId ctx_h = G.matmul(attn, vh);
            ctx = (hh == 0) ? ctx_h : G.concat_cols(ctx, ctx_h);
        }
        if (record_attention) tr.attn_nodes.push_back(std::move(head_attn));

        NodeId proj = G.add_bias(G.matmul(ctx, pid(p + "attn.wo")), pid(p + "attn.bo"));
        x = G.add(x, proj);

        NodeId ln2 = G.layer_norm(x, pid(p + "ln2.gamma"), pid(p + "ln2.beta"));
        NodeId h1 = G.gelu(G.add_bias(G.matmul(ln2, pid(p + "mlp.w1")), pid(p + "mlp.b1")));
        NodeId h2 = G.add_bias(G.matmul(h1, pid(p + "mlp.w2")), pid(p + "mlp.b2"));
        x = G.add(x, h2);
    }

    tr.features_id = G.layer_norm(x, pid("final_norm.gamma"), pid("final_norm.beta"));
    NodeId cls = G.slice_rows(tr.features_id, 0, 1);
    tr.logits_id = G.add_bias(G.matmul(cls, pid("head.weight")), pid("head.bias"));
    return tr;
}

ForwardResult vit_forward(const ViTModel& model, const Tensor& image, bool record_attention) {
    ForwardResult r;
    if (record_attention) {
        auto trace = std::make_shared<AttentionTrace>(vit_build_graph(model, image, true));
        r.logits = trace->logits();
        r.trace = std::move(trace);
    } else {
        AttentionTrace tr = vit_build_graph(model, image, false);
        r.logits = tr.logits();
    }
    return r;
}

Tensor AttentionTrace::attention(int64_t block) const {
    if (attn_nodes.empty()) throw UsageError("attention trace was not recorded");
    const auto& heads = attn_nodes.at(static_cast<size_t>(block));
    Tensor out({num_heads, seq, seq});
    double* o = out.mutable_data();
    for (int64_t h = 0; h < num_heads; ++h) {
        const Tensor& m = graph->value(heads[static_cast<size_t>(h)]);
        std::copy(m.data(), m.data() + m.size(), o + h * seq * seq);
    }
    return out;
}

Tensor AttentionTrace::attention_grad(int64_t block) const {
    if (attn_nodes.empty()) throw UsageError("attention trace was not recorded");
    const auto& heads = attn_nodes.at(static_cast<size_t>(block));
    Tensor out({num_heads, seq, seq});
    double* o = out.mutable_data();
    for (int64_t h = 0; h < num_heads; ++h) {
        const Tensor& m = graph->grad(heads[static_cast<size_t>(h)]);
        if (m.empty()) throw UsageError("attention gradients not available; run backward first");
        std::copy(m.data(), m.data() + m.size(), o + h * seq * seq);
    }
    return out;
}

Tensor AttentionTrace::attention_relevance(int64_t block) const {
    if (attn_nodes.empty()) throw UsageError("attention trace was not recorded");
    const auto& heads = attn_nodes.at(static_cast<size_t>(block));
    Tensor out({num_heads, seq, seq});
    double* o = out.mutable_data();
    for (int64_t h = 0; h < num_heads; ++h) {
        const Tensor& m = graph->relevance(heads[static_cast<size_t>(h)]);
        if (m.empty()) throw UsageError("attention relevance not available; run relevance propagation first");
        std::copy(m.data(), m.data() + m.size(), o + h * seq * seq);
    }
    return out;
}

const Tensor& AttentionTrace::logits() const { return graph->value(logits_id); }

const Tensor& AttentionTrace::token_features() const { return graph->value(features_id); }

ViTModel resize_for_image(const ViTModel& model, int64_t new_image_size) {
    const ViTConfig& c = model.config;
    if (new_image_size % c.patch_size != 0) {
        throw ConfigError("resized image size must stay divisible by the patch size");
    }
    ViTModel out = model;
    out.config.image_size = new_image_size;
    const int64_t g0 = c.grid();
    const int64_t g1 = new_image_size / c.patch_size;
    if (g0 == g1) return out;

    const Tensor& pos = model.param("pos_embed");
    const int64_t d = c.embed_dim;
    Tensor resized({g1 * g1 + 1, d});
    double* o = resized.mutable_data();
    const double* src = pos.data();
    std::copy(src, src + d, o); // class-token row
    Tensor plane({g0, g0});
    for (int64_t j = 0; j < d; ++j) {
        double* pv = plane.mutable_data();
        for (int64_t i = 0; i < g0 * g0; ++i) pv[i] = src[(i + 1) * d + j];
        Tensor rp = bilinear_resize(plane, g1, g1);
        const double* rv = rp.data();
        for (int64_t i = 0; i < g1 * g1; ++i) o[(i + 1) * d + j] = rv[i];
    }
    out.param("pos_embed") = std::move(resized);
    return out;
}

void save_weights(const ViTModel& model, const std::string& prefix) {
    json manifest;
    manifest["format"] = "wegpipe-vit";
    manifest["version"] = 1;
    manifest["config"] = config_to_json(model.config);
    json params = json::array();
    int64_t offset = 0;
    std::vector<double> blob;
    blob.reserve(static_cast<size_t>(model.total_elements()));
    for (size_t i = 0; i < model.params.size(); ++i) {
        const Tensor& t = model.params[i];
        params.push_back({{"name", model.names[i]}, {"shape", t.shape()}, {"offset", offset}});
        blob.insert(blob.end(), t.data(), t.data() + t.size());
        offset += t.size();
    }
    manifest["params"] = params;
    manifest["total"] = offset;

    std::ofstream mf(prefix + ".manifest.json");
    if (!mf) throw IoError("cannot write " + prefix + ".manifest.json");
    mf << manifest.dump(2) << "\n";
    mf.close();
    write_tnsr(prefix + ".tnsr", Tensor({offset}, std::move(blob)));
}

ViTModel load_weights(const std::string& prefix) {
    std::ifstream mf(prefix + ".manifest.json");
    if (!mf) throw IoError("cannot read " + prefix + ".manifest.json");
    json manifest;
    try {
        manifest = json::parse(mf);
    } catch (const json::exception& e) {
        throw FormatError("corrupt manifest " + prefix + ".manifest.json: " + e.what());
    }
    ViTConfig config;
    try {
        if (manifest.at("format").get<std::string>() != "wegpipe-vit") {
            throw FormatError("not a weight manifest: " + prefix);
        }
        config = config_from_json(manifest.at("config"));
    } catch (const json::exception& e) {
        throw FormatError("corrupt manifest " + prefix + ".manifest.json: " + e.what());
    }
    config.validate();

    const auto specs = param_specs(config);
    const auto& jp = manifest.at("params");
    if (jp.size() != specs.size()) {
        throw FormatError("manifest lists " + std::to_string(jp.size()) + " parameters, config implies " +
                          std::to_string(specs.size()));
    }

    Tensor blob = read_tnsr(prefix + ".tnsr");
    ViTModel m;
    m.config = config;
    int64_t expect_offset = 0;
    for (size_t i = 0; i < specs.size(); ++i) {
        const auto& entry = jp.at(i);
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int64_t> shape = entry.at("shape").get<std::vector<int64_t>>();
        const int64_t offset = entry.at("offset").get<int64_t>();
        if (name != specs[i].name) {
            throw FormatError("unexpected parameter '" + name + "', expected '" + specs[i].name + "'");
        }
        if (shape != specs[i].shape) {
            throw FormatError("parameter '" + name + "' has shape " + shape_to_string(shape) +
                              " but config implies " + shape_to_string(specs[i].shape));
        }
        if (offset != expect_offset) throw FormatError("parameter '" + name + "' has a bad blob offset");
        int64_t count = 1;
        for (int64_t dd : shape) count *= dd;
        if (offset + count > blob.size()) {
            throw FormatError("blob too small for parameter '" + name + "'");
        }
        std::vector<double> vals(blob.data() + offset, blob.data() + offset + count);
        m.names.push_back(name);
        m.params.emplace_back(shape, std::move(vals));
        expect_offset += count;
    }
    if (expect_offset != blob.size()) throw FormatError("weight blob size does not match manifest");
    for (const Tensor& t : m.params) {
        if (!t.all_finite()) throw FormatError("weight blob contains non-finite values");
    }
    return m;
}

} // namespace wegpipe
