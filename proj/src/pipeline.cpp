#include "wegpipe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wegpipe/parallel.hpp"
#include "wegpipe/refine.hpp"

namespace wegpipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Tensor resize_image(const Tensor& image, int64_t h, int64_t w) {
    if (image.dim(1) == h && image.dim(2) == w) return image;
    Tensor out({3, h, w});
    for (int64_t c = 0; c < 3; ++c) {
        Tensor plane({image.dim(1), image.dim(2)});
        std::copy(image.data() + c * image.dim(1) * image.dim(2),
                  image.data() + (c + 1) * image.dim(1) * image.dim(2), plane.mutable_data());
        Tensor rp = bilinear_resize(plane, h, w);
        std::copy(rp.data(), rp.data() + h * w, out.mutable_data() + c * h * w);
    }
    return out;
}

int64_t round_to_patch(int64_t size, int64_t patch) {
    const int64_t g = std::max<int64_t>(1, (size + patch / 2) / patch);
    return g * patch;
}

std::vector<int64_t> present_class_ids(const std::vector<uint8_t>& labels) {
    std::vector<int64_t> ids;
    for (size_t k = 0; k < labels.size(); ++k) {
        if (labels[k]) ids.push_back(static_cast<int64_t>(k) + 1);
    }
    return ids;
}

struct LabelEntry {
    std::string name; // "img_0000"
    std::string key;  // "0000"
    std::vector<uint8_t> labels;
};

std::vector<LabelEntry> load_label_index(const std::string& dir) {
    std::ifstream f(dir + "/labels.json");
    if (!f) throw IoError("cannot read " + dir + "/labels.json");
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw FormatError("corrupt labels.json in " + dir + ": " + e.what());
    }
    std::vector<LabelEntry> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        LabelEntry e;
        e.name = it.key();
        if (e.name.size() < 5 || e.name.substr(0, 4) != "img_") {
            throw FormatError("unexpected sample key '" + e.name + "' in labels.json");
        }
        e.key = e.name.substr(4);
        e.labels = it.value().get<std::vector<uint8_t>>();
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const LabelEntry& a, const LabelEntry& b) { return a.name < b.name; });
    return out;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << j.dump(2) << "\n";
}

} // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read config " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw FormatError("corrupt config " + path + ": " + e.what());
    }
    PipelineConfig c;
    c.dataset_dir = j.value("dataset_dir", c.dataset_dir);
    c.weights_prefix = j.value("weights_prefix", c.weights_prefix);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.pred_dir = j.value("pred_dir", c.pred_dir);
    c.gt_dir = j.value("gt_dir", c.gt_dir);
    c.out_file = j.value("out_file", c.out_file);
    if (j.contains("vit")) {
        const json& v = j["vit"];
        c.vit.image_size = v.value("image_size", c.vit.image_size);
        c.vit.patch_size = v.value("patch_size", c.vit.patch_size);
        c.vit.embed_dim = v.value("embed_dim", c.vit.embed_dim);
        c.vit.num_heads = v.value("num_heads", c.vit.num_heads);
        c.vit.num_blocks = v.value("num_blocks", c.vit.num_blocks);
        c.vit.mlp_ratio = v.value("mlp_ratio", c.vit.mlp_ratio);
        c.vit.num_classes = v.value("num_classes", c.vit.num_classes);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        c.train.epochs = t.value("epochs", c.train.epochs);
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
        c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
    }
    if (j.contains("synth")) {
        const json& s = j["synth"];
        c.synth.image_size = s.value("image_size", c.synth.image_size);
        c.synth.num_classes = s.value("num_classes", c.synth.num_classes);
        c.synth.min_radius = s.value("min_radius", c.synth.min_radius);
        c.synth.max_radius = s.value("max_radius", c.synth.max_radius);
        c.synth.saliency_noise = s.value("saliency_noise", c.synth.saliency_noise);
        c.synth.min_clutter = s.value("min_clutter", c.synth.min_clutter);
        c.synth.max_clutter = s.value("max_clutter", c.synth.max_clutter);
        c.synth.colored_clutter = s.value("colored_clutter", c.synth.colored_clutter);
    }
    c.gen_count = j.value("gen_count", c.gen_count);
    c.explainer = j.value("explainer", c.explainer);
    c.blocks = j.value("blocks", c.blocks);
    c.positive_clamp = j.value("positive_clamp", c.positive_clamp);
    c.soft_rate = j.value("soft_rate", c.soft_rate);
    c.epom.fg_thr = j.value("fg_thr", c.epom.fg_thr);
    c.epom.tau_sal = j.value("tau_sal", c.epom.tau_sal);
    c.use_epom = j.value("epom", c.use_epom);
    c.use_saliency = j.value("saliency", c.use_saliency);
    c.multi_scale = j.value("multi_scale", c.multi_scale);
    c.long_side = j.value("long_side", c.long_side);
    c.seed = j.value("seed", c.seed);
    return c;
}

std::vector<int64_t> parse_block_set(const std::string& spec, int64_t num_blocks) {
    if (spec == "last" || spec.empty()) return {num_blocks - 1};
    std::vector<int64_t> blocks;
    if (spec == "all") {
        for (int64_t b = 0; b < num_blocks; ++b) blocks.push_back(b);
        return blocks;
    }
    std::istringstream is(spec);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        size_t pos = 0;
        long v = 0;
        try {
            v = std::stol(tok, &pos);
        } catch (const std::exception&) {
            throw ConfigError("bad block list: " + spec);
        }
        if (pos != tok.size()) throw ConfigError("bad block list: " + spec);
        blocks.push_back(static_cast<int64_t>(v));
    }
    if (blocks.empty()) throw ConfigError("empty block list: " + spec);
    for (int64_t b : blocks) {
        if (b < 0 || b >= num_blocks) throw ConfigError("block index out of range in: " + spec);
    }
    return blocks;
}

PseudoLabel generate_pseudo_label(const ViTModel& model, const Sample& sample, const PipelineConfig& cfg,
                                  const std::string& explainer, RefinedMaps* maps_out,
                                  std::map<int64_t, double>* thresholds_out) {
    const int64_t out_h = sample.image.dim(1);
    const int64_t out_w = sample.image.dim(2);
    const std::vector<int64_t> present = present_class_ids(sample.labels);

    PseudoLabel label;
    if (present.empty()) {
        label.grid = ByteImage(out_h, out_w);
        label.provenance = ByteImage(out_h, out_w);
        if (thresholds_out) thresholds_out->clear();
        return label;
    }

    const int64_t patch = model.config.patch_size;
    const int64_t base_size = cfg.long_side > 0 ? round_to_patch(cfg.long_side, patch) : out_h;
    std::vector<double> scales = cfg.multi_scale ? std::vector<double>{0.75, 1.0, 1.25}
                                                 : std::vector<double>{1.0};

    RelevanceConfig relcfg;
    relcfg.positive_clamp = cfg.positive_clamp;
    relcfg.block_set = parse_block_set(cfg.blocks, model.config.num_blocks);

    // per class, the normalized+upsampled map at each scale
    std::map<int64_t, std::vector<Tensor>> scaled;
    for (double sc : scales) {
        const int64_t size = round_to_patch(static_cast<int64_t>(std::llround(base_size * sc)), patch);
        const Tensor image = resize_image(sample.image, size, size);
        const ViTModel scaled_model = resize_for_image(model, size);
        AttentionTrace trace = vit_build_graph(scaled_model, image, true);

        InitialAttentionMap shared; // rollout is class-agnostic
        if (explainer == "rollout") shared = rollout_attention(trace);
        for (int64_t cls : present) {
            const int64_t k = cls - 1;
            InitialAttentionMap m;
            if (explainer == "dtd") {
                m = dtd_attention(trace, k, relcfg);
            } else if (explainer == "rollout") {
                m = shared;
            } else if (explainer == "cam") {
                m = cam_attention(scaled_model, trace, k);
            } else {
                throw ConfigError("unknown explainer: " + explainer);
            }
            scaled[cls].push_back(upsample_bilinear(normalize01(m.grid), out_h, out_w));
        }
    }

    RefinedMaps maps;
    for (int64_t cls : present) {
        const auto& per_scale = scaled[cls];
        Tensor fused = per_scale.size() == 1 ? per_scale[0] : multi_scale_fuse(per_scale);
        maps[cls] = soft_erase(fused, cfg.soft_rate);
    }

    if (cfg.use_saliency) {
        if (sample.saliency.empty()) throw IoError("saliency map missing for sample");
        label = initial_pseudo_label(maps, sample.saliency, present, cfg.epom);
    } else {
        label = initial_pseudo_label_no_saliency(maps, present, cfg.epom);
    }
    if (cfg.use_epom) {
        label = epom_refine(label, maps, present, cfg.epom, thresholds_out);
    } else if (thresholds_out) {
        thresholds_out->clear();
    }
    if (maps_out) *maps_out = std::move(maps);
    return label;
}

int cmd_gen_data(const PipelineConfig& cfg) {
    if (cfg.dataset_dir.empty()) throw ConfigError("gen-data requires a dataset directory");
    const std::vector<Sample> samples = synth_dataset(cfg.gen_count, cfg.synth, cfg.seed);
    export_dataset(cfg.dataset_dir, samples);
    std::cout << "wrote " << samples.size() << " samples to " << cfg.dataset_dir << "\n";
    return 0;
}

int cmd_train(const PipelineConfig& cfg) {
    if (cfg.dataset_dir.empty() || cfg.weights_prefix.empty()) {
        throw ConfigError("train requires a dataset directory and a weights prefix");
    }
    const std::vector<Sample> dataset = load_dataset(cfg.dataset_dir);
    ViTModel model = build_model(cfg.vit, cfg.seed);
    std::vector<EpochStats> history;
    try {
        history = train(model, dataset, cfg.train);
    } catch (const TrainError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return 1;
    }
    const fs::path prefix(cfg.weights_prefix);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    save_weights(model, cfg.weights_prefix);

    json metrics = json::array();
    for (const EpochStats& st : history) {
        metrics.push_back({{"epoch", st.epoch}, {"loss", st.loss}, {"macro_accuracy", st.macro_accuracy}});
        std::cout << "epoch " << st.epoch << " loss " << st.loss << " macro_acc " << st.macro_accuracy << "\n";
    }
    const std::string metrics_path =
        cfg.out_file.empty() ? cfg.weights_prefix + ".metrics.json" : cfg.out_file;
    write_json_file(metrics_path, metrics);
    return 0;
}

int cmd_pseudo_label(const PipelineConfig& cfg) {
    if (cfg.dataset_dir.empty() || cfg.weights_prefix.empty() || cfg.out_dir.empty()) {
        throw ConfigError("pseudo-label requires dataset, weights and output directories");
    }
    const ViTModel model = load_weights(cfg.weights_prefix);
    const std::vector<LabelEntry> entries = load_label_index(cfg.dataset_dir);
    fs::create_directories(cfg.out_dir);

    std::vector<std::map<int64_t, double>> thresholds(entries.size());
    std::vector<std::string> failures(entries.size());

    parallel_for(static_cast<int64_t>(entries.size()), [&](int64_t i) {
        const LabelEntry& e = entries[static_cast<size_t>(i)];
        try {
            Sample s;
            s.labels = e.labels;
            int64_t h = 0, w = 0;
            auto rgb = read_ppm(cfg.dataset_dir + "/" + e.name + ".ppm", h, w);
            s.image = rgb8_to_tensor(rgb, h, w);
            if (cfg.use_saliency) {
                s.saliency = gray8_to_tensor(read_pgm(cfg.dataset_dir + "/sal_" + e.key + ".pgm"));
            }
            RefinedMaps maps;
            PseudoLabel label = generate_pseudo_label(model, s, cfg, cfg.explainer, &maps,
                                                      &thresholds[static_cast<size_t>(i)]);
            write_pgm(cfg.out_dir + "/plabel_" + e.key + ".pgm", label.grid);
            for (const auto& [cls, map] : maps) {
                write_pgm(cfg.out_dir + "/heat_" + e.key + "_c" + std::to_string(cls) + ".pgm",
                          tensor_to_gray8(map));
            }
        } catch (const std::exception& ex) {
            failures[static_cast<size_t>(i)] = ex.what();
        }
    });

    json thr = json::object();
    int64_t failed = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
        if (!failures[i].empty()) {
            std::cerr << entries[i].name << ": " << failures[i] << "\n";
            ++failed;
            continue;
        }
        json per_class = json::object();
        for (const auto& [cls, v] : thresholds[i]) per_class[std::to_string(cls)] = v;
        thr[entries[i].name] = per_class;
    }
    write_json_file(cfg.out_dir + "/thresholds.json", thr);
    std::cout << "labelled " << (entries.size() - static_cast<size_t>(failed)) << "/" << entries.size()
              << " images\n";
    return failed ? 1 : 0;
}

int cmd_eval(const PipelineConfig& cfg) {
    if (cfg.pred_dir.empty() || cfg.gt_dir.empty()) {
        throw ConfigError("eval requires prediction and ground-truth directories");
    }
    std::vector<std::string> keys;
    for (const auto& entry : fs::directory_iterator(cfg.gt_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("mask_", 0) == 0 && entry.path().extension() == ".pgm") {
            keys.push_back(name.substr(5, name.size() - 9));
        }
    }
    std::sort(keys.begin(), keys.end());
    if (keys.empty()) throw IoError("no mask_*.pgm files in " + cfg.gt_dir);

    std::vector<std::pair<ByteImage, ByteImage>> pairs; // (pred, gt)
    std::vector<std::string> missing;
    int64_t max_class = 1;
    for (const std::string& key : keys) {
        const ByteImage gt = read_pgm(cfg.gt_dir + "/mask_" + key + ".pgm");
        std::string pred_path = cfg.pred_dir + "/plabel_" + key + ".pgm";
        if (!fs::exists(pred_path)) pred_path = cfg.pred_dir + "/mask_" + key + ".pgm";
        if (!fs::exists(pred_path)) {
            missing.push_back(key);
            continue;
        }
        ByteImage pred = read_pgm(pred_path);
        for (uint8_t v : gt.pixels) {
            if (v != kIgnoredLabel) max_class = std::max<int64_t>(max_class, v);
        }
        for (uint8_t v : pred.pixels) {
            if (v != kIgnoredLabel) max_class = std::max<int64_t>(max_class, v);
        }
        pairs.emplace_back(std::move(pred), gt);
    }

    ConfusionMatrix cm(max_class);
    for (const auto& [pred, gt] : pairs) cm.accumulate(pred, gt);
    const IouReport rep = miou(cm);

    json out;
    out["pairs"] = pairs.size();
    out["missing"] = missing;
    out["defined"] = rep.defined;
    out["miou"] = rep.miou;
    out["ignored_fraction"] = rep.ignored_fraction;
    json per_class = json::object();
    for (size_t c = 0; c < rep.per_class_iou.size(); ++c) {
        if (rep.class_valid[c]) per_class[std::to_string(c)] = rep.per_class_iou[c];
    }
    out["per_class_iou"] = per_class;
    std::cout << out.dump(2) << "\n";
    if (!cfg.out_file.empty()) write_json_file(cfg.out_file, out);
    return missing.empty() ? 0 : 1;
}

int cmd_compare(const PipelineConfig& cfg) {
    if (cfg.dataset_dir.empty() || cfg.weights_prefix.empty()) {
        throw ConfigError("compare requires a dataset directory and weights");
    }
    const ViTModel model = load_weights(cfg.weights_prefix);
    const std::vector<Sample> dataset = load_dataset(cfg.dataset_dir);
    for (const Sample& s : dataset) {
        if (s.gt_mask.pixels.empty()) throw IoError("compare requires ground-truth masks in the dataset");
    }

    json out = json::object();
    for (const std::string explainer : {"dtd", "rollout", "cam"}) {
        std::vector<PseudoLabel> labels(dataset.size());
        parallel_for(static_cast<int64_t>(dataset.size()), [&](int64_t i) {
            labels[static_cast<size_t>(i)] =
                generate_pseudo_label(model, dataset[static_cast<size_t>(i)], cfg, explainer);
        });
        ConfusionMatrix cm(model.config.num_classes);
        for (size_t i = 0; i < dataset.size(); ++i) {
            cm.accumulate(labels[i].grid, dataset[i].gt_mask);
        }
        const IouReport rep = miou(cm);
        out[explainer] = rep.defined ? rep.miou : 0.0;
    }
    std::cout << out.dump(2) << "\n";
    if (!cfg.out_file.empty()) write_json_file(cfg.out_file, out);
    return 0;
}

namespace {

// Tracks raw CLI values so that only flags the user actually passed
// override the config file.
struct CliOverrides {
    std::string config;
    uint64_t seed = 0;
    std::string data, weights, out, pred, gt, out_file;
    int64_t n = 0, image_size = 0, classes = 0, long_side = 0;
    int64_t epochs = 0, batch = 0;
    double lr = 0, wd = 0, sr = 0, fg_thr = 0, tau_sal = 0;
    std::string explainer, blocks;
    bool no_epom = false, no_saliency = false, no_positive_clamp = false, multi_scale = false;
};

bool passed(const CLI::App* sub, const std::string& name) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt && opt->count() > 0;
}

void apply_common(const CLI::App* sub, const CliOverrides& o, PipelineConfig& cfg) {
    if (passed(sub, "--seed")) cfg.seed = o.seed;
    if (passed(sub, "--data")) cfg.dataset_dir = o.data;
    if (passed(sub, "--weights")) cfg.weights_prefix = o.weights;
    if (passed(sub, "--out") && sub->get_name() == "gen-data") cfg.dataset_dir = o.out;
    if (passed(sub, "--out") && sub->get_name() == "pseudo-label") cfg.out_dir = o.out;
    if (passed(sub, "--explainer")) cfg.explainer = o.explainer;
    if (passed(sub, "--blocks")) cfg.blocks = o.blocks;
    if (passed(sub, "--sr")) cfg.soft_rate = o.sr;
    if (passed(sub, "--fg-thr")) cfg.epom.fg_thr = o.fg_thr;
    if (passed(sub, "--tau-sal")) cfg.epom.tau_sal = o.tau_sal;
    if (passed(sub, "--no-epom")) cfg.use_epom = false;
    if (passed(sub, "--no-saliency")) cfg.use_saliency = false;
    if (passed(sub, "--no-positive-clamp")) cfg.positive_clamp = false;
    if (passed(sub, "--multi-scale")) cfg.multi_scale = true;
    if (passed(sub, "--long-side")) cfg.long_side = o.long_side;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"pseudo-label generation pipeline for a small vision transformer"};
    app.require_subcommand(1);
    CliOverrides o;

    auto add_shared = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON configuration file");
        sub->add_option("--seed", o.seed, "random seed");
    };
    auto add_stage_flags = [&](CLI::App* sub) {
        sub->add_option("--explainer", o.explainer, "dtd | rollout | cam");
        sub->add_option("--blocks", o.blocks, "attention blocks: last | all | comma list");
        sub->add_option("--sr", o.sr, "soft erase rate in (0,1]");
        sub->add_option("--fg-thr", o.fg_thr, "foreground extraction threshold");
        sub->add_option("--tau-sal", o.tau_sal, "saliency background gate");
        sub->add_flag("--no-epom", o.no_epom, "skip the EPOM refinement stage");
        sub->add_flag("--no-saliency", o.no_saliency, "assemble labels without saliency gating");
        sub->add_flag("--no-positive-clamp", o.no_positive_clamp, "keep negative grad*relevance terms");
        sub->add_flag("--multi-scale", o.multi_scale, "fuse maps over scales 0.75/1.0/1.25");
        sub->add_option("--long-side", o.long_side, "resize the long side before inference");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic shapes dataset");
    add_shared(gen);
    gen->add_option("--out", o.out, "output dataset directory")->required();
    gen->add_option("--n", o.n, "number of samples");
    gen->add_option("--image-size", o.image_size, "square image size in pixels");
    gen->add_option("--classes", o.classes, "number of foreground classes (2 or 3)");

    CLI::App* tr = app.add_subcommand("train", "train the multi-label classifier");
    add_shared(tr);
    tr->add_option("--data", o.data, "dataset directory")->required();
    tr->add_option("--weights", o.weights, "output weight file prefix")->required();
    tr->add_option("--out", o.out_file, "metrics JSON path");
    tr->add_option("--epochs", o.epochs, "training epochs");
    tr->add_option("--batch", o.batch, "batch size");
    tr->add_option("--lr", o.lr, "learning rate");
    tr->add_option("--wd", o.wd, "weight decay");

    CLI::App* pl = app.add_subcommand("pseudo-label", "generate pseudo segmentation labels");
    add_shared(pl);
    pl->add_option("--data", o.data, "dataset directory")->required();
    pl->add_option("--weights", o.weights, "weight file prefix")->required();
    pl->add_option("--out", o.out, "output directory")->required();
    add_stage_flags(pl);

    CLI::App* ev = app.add_subcommand("eval", "evaluate predictions against ground truth");
    add_shared(ev);
    ev->add_option("--pred", o.pred, "prediction directory")->required();
    ev->add_option("--gt", o.gt, "ground-truth directory")->required();
    ev->add_option("--out", o.out_file, "report JSON path");

    CLI::App* cp = app.add_subcommand("compare", "compare explainers by pseudo-label quality");
    add_shared(cp);
    cp->add_option("--data", o.data, "dataset directory with masks")->required();
    cp->add_option("--weights", o.weights, "weight file prefix")->required();
    cp->add_option("--out", o.out_file, "comparison JSON path");
    add_stage_flags(cp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        PipelineConfig cfg;
        if (sub->count("--config")) cfg = load_pipeline_config(o.config);
        apply_common(sub, o, cfg);
        const std::string name = sub->get_name();
        if (name == "gen-data") {
            if (sub->count("--n")) cfg.gen_count = o.n;
            if (sub->count("--image-size")) {
                cfg.synth.image_size = o.image_size;
                cfg.vit.image_size = o.image_size;
                // keep the default shape/image proportions at other sizes
                cfg.synth.min_radius = std::max<int64_t>(2, o.image_size / 8);
                cfg.synth.max_radius = std::max<int64_t>(cfg.synth.min_radius + 1, o.image_size * 14 / 64);
            }
            if (sub->count("--classes")) {
                cfg.synth.num_classes = o.classes;
                cfg.vit.num_classes = o.classes;
            }
            return cmd_gen_data(cfg);
        }
        if (name == "train") {
            if (sub->count("--epochs")) cfg.train.epochs = o.epochs;
            if (sub->count("--batch")) cfg.train.batch_size = o.batch;
            if (sub->count("--lr")) cfg.train.learning_rate = o.lr;
            if (sub->count("--wd")) cfg.train.weight_decay = o.wd;
            if (sub->count("--out")) cfg.out_file = o.out_file;
            cfg.train.seed = cfg.seed;
            return cmd_train(cfg);
        }
        if (name == "pseudo-label") return cmd_pseudo_label(cfg);
        if (name == "eval") {
            cfg.pred_dir = o.pred;
            cfg.gt_dir = o.gt;
            if (sub->count("--out")) cfg.out_file = o.out_file;
            return cmd_eval(cfg);
        }
        if (name == "compare") {
            if (sub->count("--out")) cfg.out_file = o.out_file;
            return cmd_compare(cfg);
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace wegpipe
