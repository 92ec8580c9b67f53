// Acceptance suite: runs every acceptance criterion end to end and prints
// one PASS/FAIL line per criterion (criterion 6 also reports its
// sub-checks). Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "json.hpp"
#include "relevance_oracle.hpp"
#include "wegpipe/parallel.hpp"
#include "wegpipe/pipeline.hpp"
#include "wegpipe/refine.hpp"
#include "wegpipe/rng.hpp"

using namespace wegpipe;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %-38s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor random_image(Rng& rng, int64_t size) {
    Tensor t({3, size, size});
    for (int64_t i = 0; i < t.size(); ++i) t.mutable_data()[i] = rng.uniform(0.0, 1.0);
    return t;
}

std::string workdir() {
    static const std::string dir = (fs::temp_directory_path() / "wegpipe_acceptance").string();
    return dir;
}

// ---- criterion 1: full-model gradient check on a two-block toy config ----

void criterion_gradients() {
    const auto t0 = Clock::now();
    ViTConfig cfg;
    cfg.image_size = 8;
    cfg.patch_size = 4;
    cfg.embed_dim = 8;
    cfg.num_heads = 2;
    cfg.num_blocks = 2;
    cfg.mlp_ratio = 2.0;
    cfg.num_classes = 2;
    ViTModel model = build_model(cfg, 101);
    Rng rng(102);
    Tensor img = random_image(rng, 8);
    const int64_t cls = 1;

    AttentionTrace tr = vit_build_graph(model, img, false);
    Graph& g = *tr.graph;
    g.backward(g.select(tr.logits_id, cls));

    double max_err = 0.0;
    int64_t checked = 0;
    const double eps = 1e-5;
    for (size_t pi = 0; pi < model.params.size(); ++pi) {
        const Tensor& analytic = g.grad(tr.param_ids[pi]);
        ViTModel probe = model;
        for (int64_t j = 0; j < model.params[pi].size(); ++j) {
            const double orig = model.params[pi].data()[j];
            probe.params[pi].mutable_data()[j] = orig + eps;
            const double fp = vit_forward(probe, img, false).logits.data()[cls];
            probe.params[pi].mutable_data()[j] = orig - eps;
            const double fm = vit_forward(probe, img, false).logits.data()[cls];
            probe.params[pi].mutable_data()[j] = orig;
            const double central = (fp - fm) / (2 * eps);
            const double a = analytic.empty() ? 0.0 : analytic.data()[j];
            max_err = std::max(max_err, std::abs(a - central) / (std::abs(central) + 1e-12));
            ++checked;
        }
    }
    const double dt = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "max rel err %.3e over %lld weights in %.1fs (< 1e-4, < 60s)",
                  max_err, static_cast<long long>(checked), dt);
    report("1 gradient-correctness", max_err < 1e-4 && dt < 60.0, detail);
}

// ---- criterion 2: relevance rules ----------------------------------------

void criterion_relevance() {
    Rng rng(201);
    double worst_cons = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int64_t m = 1 + rng.uniform_int(4), k = 2 + rng.uniform_int(6), n = 2 + rng.uniform_int(5);
        Graph g;
        Tensor x({m, k}), w({k, n});
        for (int64_t i = 0; i < x.size(); ++i) x.mutable_data()[i] = rng.uniform(0.2, 1.5);
        for (int64_t i = 0; i < w.size(); ++i) w.mutable_data()[i] = rng.uniform(0.2, 1.5);
        NodeId xi = g.leaf(x, true);
        NodeId y = g.matmul(xi, g.param(w));
        Tensor seed({m, n});
        for (int64_t i = 0; i < seed.size(); ++i) seed.mutable_data()[i] = rng.uniform(-1.0, 1.0);
        g.relprop(y, seed, 0.0);
        double in = 0, out = 0;
        for (int64_t i = 0; i < seed.size(); ++i) out += seed.data()[i];
        const Tensor& rx = g.relevance(xi);
        for (int64_t i = 0; i < rx.size(); ++i) in += rx.data()[i];
        worst_cons = std::max(worst_cons, std::abs(in - out) / std::max(1e-12, std::abs(out)));
    }

    ViTConfig cfg;
    cfg.image_size = 8;
    cfg.patch_size = 4;
    cfg.embed_dim = 8;
    cfg.num_heads = 2;
    cfg.num_blocks = 1;
    cfg.mlp_ratio = 2.0;
    cfg.num_classes = 2;
    ViTModel model = build_model(cfg, 202);
    Tensor img = random_image(rng, 8);
    AttentionTrace tr = vit_build_graph(model, img, true);
    RelevanceConfig rc;
    double worst_oracle = 0.0;
    for (int64_t cls = 0; cls < 2; ++cls) {
        relevance_propagate(tr, cls, rc);
        const Tensor got = tr.attention_relevance(0);
        const oracle::OracleResult want = oracle::oracle_relevance(model, img, cls, rc.eps);
        for (int64_t h = 0; h < 2; ++h) {
            for (int64_t i = 0; i < tr.seq; ++i) {
                for (int64_t j = 0; j < tr.seq; ++j) {
                    worst_oracle = std::max(
                        worst_oracle,
                        std::abs(got.at({h, i, j}) - want.rel_attn[static_cast<size_t>(h)].at(i, j)));
                }
            }
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "conservation rel err %.2e (< 1e-6); one-block oracle dev %.2e (< 1e-9)", worst_cons,
                  worst_oracle);
    report("2 relevance-rule-correctness", worst_cons < 1e-6 && worst_oracle < 1e-9, detail);
}

// ---- criterion 3: soft-erase contract ------------------------------------

void criterion_soft_erase() {
    Rng rng(301);
    bool ok = true;
    std::string why = "1000 maps x {0.25, 0.55, 1.0}";
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const int64_t h = 2 + rng.uniform_int(7), w = 2 + rng.uniform_int(7);
        Tensor x({h, w});
        for (int64_t i = 0; i < x.size(); ++i) x.mutable_data()[i] = rng.uniform(0.0, 1.0);
        for (double sr : {0.25, 0.55, 1.0}) {
            Tensor e = soft_erase(x, sr);
            double xmax = 0, emax = 0;
            for (int64_t i = 0; i < x.size(); ++i) {
                if (e.data()[i] > x.data()[i] + 1e-15) {
                    ok = false;
                    why = "pointwise A <= Ahat violated";
                }
                xmax = std::max(xmax, x.data()[i]);
                emax = std::max(emax, e.data()[i]);
            }
            if (xmax > 0 && std::abs(emax - sr * xmax) > 1e-12) {
                ok = false;
                why = "max(A) != S_r * max(Ahat)";
            }
            for (int64_t i = 0; i < x.size() && ok; ++i) {
                for (int64_t j = 0; j < x.size(); ++j) {
                    if (x.data()[i] <= x.data()[j] && e.data()[i] > e.data()[j] + 1e-15) {
                        ok = false;
                        why = "order preservation violated";
                    }
                }
            }
            if (sr == 1.0) {
                for (int64_t i = 0; i < x.size(); ++i) {
                    if (e.data()[i] != x.data()[i]) {
                        ok = false;
                        why = "S_r=1 is not the identity";
                    }
                }
            }
        }
    }
    report("3 soft-erase-contract", ok, why);
}

// ---- criterion 4: EPOM contract -------------------------------------------

void criterion_epom() {
    bool ok = true;
    std::string why = "worked example + 200 randomized instances";

    EpomConfig cfg;
    RefinedMaps maps{{1, Tensor({2, 2}, {0.9, 0.95, 0.3, 0.1})}};
    PseudoLabel p;
    p.grid = ByteImage(2, 2);
    p.grid.at(0, 0) = 1;
    p.provenance = ByteImage(2, 2);
    PseudoLabel r = epom_refine(p, maps, {1}, cfg);
    const std::vector<uint8_t> want{1, 255, 0, 0};
    if (r.grid.pixels != want) {
        ok = false;
        why = "worked example mismatch";
    }

    Rng rng(401);
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const int64_t h = 3 + rng.uniform_int(6), w = 3 + rng.uniform_int(6);
        std::vector<int64_t> classes{1, 2, 3};
        RefinedMaps rmaps;
        for (int64_t cls : classes) {
            Tensor t({h, w});
            for (int64_t i = 0; i < t.size(); ++i) t.mutable_data()[i] = rng.uniform(0.0, 1.0);
            rmaps[cls] = t;
        }
        PseudoLabel q;
        q.grid = ByteImage(h, w);
        q.provenance = ByteImage(h, w);
        for (auto& px : q.grid.pixels) {
            const int64_t roll = rng.uniform_int(6);
            px = roll < 3 ? 0 : static_cast<uint8_t>(roll - 2);
        }
        PseudoLabel a = epom_refine(q, rmaps, {1, 2, 3}, cfg);
        PseudoLabel b = epom_refine(q, rmaps, {3, 2, 1}, cfg);
        PseudoLabel c = epom_refine(q, rmaps, {2, 3, 1}, cfg);
        if (a.grid.pixels != b.grid.pixels || a.grid.pixels != c.grid.pixels) {
            ok = false;
            why = "class order changed the result";
        }
        for (size_t i = 0; i < q.grid.pixels.size(); ++i) {
            if (q.grid.pixels[i] != 0 && a.grid.pixels[i] != q.grid.pixels[i]) {
                ok = false;
                why = "foreground pixel modified";
            }
        }
    }
    report("4 epom-contract", ok, why);
}

// ---- criterion 5: mIoU oracle equivalence ----------------------------------

void criterion_miou() {
    Rng rng(501);
    bool ok = true;
    std::string why = "100 randomized grids with 255 pixels, exact equality";
    for (int trial = 0; trial < 100 && ok; ++trial) {
        const int64_t c = 1 + rng.uniform_int(4);
        const int64_t h = 2 + rng.uniform_int(8), w = 2 + rng.uniform_int(8);
        ConfusionMatrix cm(c);
        ByteImage pred(h, w), gt(h, w);
        for (auto& v : pred.pixels) v = rng.coin(0.2) ? 255 : static_cast<uint8_t>(rng.uniform_int(c + 1));
        for (auto& v : gt.pixels) v = rng.coin(0.2) ? 255 : static_cast<uint8_t>(rng.uniform_int(c + 1));
        cm.accumulate(pred, gt);
        IouReport rep = miou(cm);

        // brute-force per-pixel counting oracle
        double sum = 0;
        int64_t valid = 0;
        bool defined = false;
        for (int64_t k = 0; k <= c; ++k) {
            int64_t tp = 0, fp = 0, fn = 0;
            for (size_t i = 0; i < gt.pixels.size(); ++i) {
                const uint8_t gv = gt.pixels[i], pv = pred.pixels[i];
                if (gv == 255 || pv == 255) continue;
                if (gv == k && pv == k) ++tp;
                if (gv != k && pv == k) ++fp;
                if (gv == k && pv != k) ++fn;
            }
            if (tp + fp + fn == 0) {
                if (rep.class_valid[static_cast<size_t>(k)]) ok = false;
                continue;
            }
            defined = true;
            const double iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
            if (rep.per_class_iou[static_cast<size_t>(k)] != iou) ok = false;
            sum += iou;
            ++valid;
        }
        if (defined != rep.defined) ok = false;
        if (defined && rep.miou != sum / static_cast<double>(valid)) ok = false;
        if (!ok) why = "mismatch vs the counting oracle";
    }
    report("5 miou-oracle-equivalence", ok, why);
}

// ---- criterion 6: end-to-end synthetic run ---------------------------------

double pseudo_label_miou(const ViTModel& model, const std::vector<Sample>& val, const PipelineConfig& cfg,
                         const std::string& explainer) {
    std::vector<PseudoLabel> labels(val.size());
    parallel_for(static_cast<int64_t>(val.size()), [&](int64_t i) {
        labels[static_cast<size_t>(i)] = generate_pseudo_label(model, val[static_cast<size_t>(i)], cfg, explainer);
    });
    ConfusionMatrix cm(model.config.num_classes);
    for (size_t i = 0; i < val.size(); ++i) cm.accumulate(labels[i].grid, val[i].gt_mask);
    const IouReport rep = miou(cm);
    return rep.defined ? rep.miou : 0.0;
}

void criterion_end_to_end() {
    const auto t0 = Clock::now();
    const std::string train_dir = workdir() + "/train";
    const std::string val_dir = workdir() + "/val";
    const std::string weights = workdir() + "/model";

    PipelineConfig cfg;
    cfg.seed = 11;
    cfg.dataset_dir = train_dir;
    cfg.gen_count = 2000;
    if (cmd_gen_data(cfg) != 0) {
        report("6 end-to-end", false, "training dataset generation failed");
        return;
    }
    PipelineConfig vcfg = cfg;
    vcfg.seed = 77;
    vcfg.dataset_dir = val_dir;
    vcfg.gen_count = 200;
    if (cmd_gen_data(vcfg) != 0) {
        report("6 end-to-end", false, "validation dataset generation failed");
        return;
    }

    PipelineConfig tcfg = cfg;
    tcfg.weights_prefix = weights;
    tcfg.train.seed = 3;
    tcfg.seed = 3;
    if (cmd_train(tcfg) != 0) {
        report("6 end-to-end", false, "training failed");
        return;
    }

    double final_acc = 0.0;
    {
        std::ifstream f(weights + ".metrics.json");
        json metrics = json::parse(f);
        final_acc = metrics.back().at("macro_accuracy").get<double>();
    }
    char d1[128];
    std::snprintf(d1, sizeof(d1), "macro accuracy %.4f (>= 0.95)", final_acc);
    report("6.acc multi-label-accuracy", final_acc >= 0.95, d1);

    const ViTModel model = load_weights(weights);
    const std::vector<Sample> val = load_dataset(val_dir);
    PipelineConfig pcfg; // pipeline defaults: dtd, last block, sr 0.55, epom, saliency

    const double miou_dtd = pseudo_label_miou(model, val, pcfg, "dtd");
    const double miou_rollout = pseudo_label_miou(model, val, pcfg, "rollout");
    const double miou_cam = pseudo_label_miou(model, val, pcfg, "cam");
    char d2[160];
    std::snprintf(d2, sizeof(d2), "dtd %.4f (>= 0.50)", miou_dtd);
    report("6.miou dtd-pseudo-label-quality", miou_dtd >= 0.50, d2);
    std::snprintf(d2, sizeof(d2), "dtd %.4f > rollout %.4f and > cam %.4f", miou_dtd, miou_rollout, miou_cam);
    report("6.a dtd-beats-baselines", miou_dtd > miou_rollout && miou_dtd > miou_cam, d2);

    PipelineConfig all_cfg = pcfg;
    all_cfg.blocks = "all";
    const double miou_all = pseudo_label_miou(model, val, all_cfg, "dtd");
    std::snprintf(d2, sizeof(d2), "last %.4f vs all %.4f (expected last >= all)", miou_dtd, miou_all);
    report("6.b last-block-vs-all-blocks", miou_dtd >= miou_all, d2);

    PipelineConfig nosal_cfg = pcfg;
    nosal_cfg.use_saliency = false;
    const double miou_nosal = pseudo_label_miou(model, val, nosal_cfg, "dtd");
    std::snprintf(d2, sizeof(d2), "with saliency %.4f >= without %.4f", miou_dtd, miou_nosal);
    report("6.c saliency-gating-helps", miou_dtd >= miou_nosal, d2);

    PipelineConfig nose_cfg = pcfg;
    nose_cfg.soft_rate = 1.0;
    const double miou_nose = pseudo_label_miou(model, val, nose_cfg, "dtd");
    std::snprintf(d2, sizeof(d2), "soft erase on %.4f >= off %.4f - 0.02", miou_dtd, miou_nose);
    report("6.d soft-erase-non-degradation", miou_dtd >= miou_nose - 0.02, d2);

    // module-level expectation for the dtd maps themselves: attention mass
    // concentrates inside the ground-truth object region
    {
        std::vector<int> inside_wins(val.size(), 0), total(val.size(), 0);
        RelevanceConfig rc;
        parallel_for(static_cast<int64_t>(val.size()), [&](int64_t i) {
            const Sample& s = val[static_cast<size_t>(i)];
            AttentionTrace tr = vit_build_graph(model, s.image, true);
            for (size_t k = 0; k < s.labels.size(); ++k) {
                if (!s.labels[k]) continue;
                InitialAttentionMap m = dtd_attention(tr, static_cast<int64_t>(k), rc);
                Tensor up = upsample_bilinear(normalize01(m.grid), s.gt_mask.h, s.gt_mask.w);
                double in = 0, out = 0;
                for (int64_t px = 0; px < up.size(); ++px) {
                    if (s.gt_mask.pixels[static_cast<size_t>(px)] == k + 1) {
                        in += up.data()[px];
                    } else {
                        out += up.data()[px];
                    }
                }
                ++total[static_cast<size_t>(i)];
                if (in > out) ++inside_wins[static_cast<size_t>(i)];
            }
        });
        int64_t wins = 0, cnt = 0;
        for (size_t i = 0; i < val.size(); ++i) {
            wins += inside_wins[i];
            cnt += total[i];
        }
        const double frac = static_cast<double>(wins) / static_cast<double>(cnt);
        std::snprintf(d2, sizeof(d2), "mass inside gt region wins for %.1f%% of maps (>= 90%%)", 100 * frac);
        report("6.e attention-mass-concentration", frac >= 0.9, d2);
    }

    const double dt = seconds_since(t0);
    std::snprintf(d2, sizeof(d2), "wall time %.0fs (< 1800s)", dt);
    report("6.t end-to-end-runtime", dt < 1800.0, d2);
}

// ---- criterion 7: determinism ----------------------------------------------

bool dirs_identical(const std::string& a, const std::string& b) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const std::string& n : names) {
        std::ifstream fa(a + "/" + n, std::ios::binary), fb(b + "/" + n, std::ios::binary);
        if (!fa || !fb) return false;
        std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        if (ba != bb) return false;
    }
    return true;
}

bool files_identical(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return ba == bb;
}

void criterion_determinism() {
    bool ok = true;
    std::string why = "gen-data, train, pseudo-label re-runs byte-identical";

    // dataset generation
    PipelineConfig g1;
    g1.seed = 55;
    g1.gen_count = 40;
    g1.dataset_dir = workdir() + "/det_ds1";
    PipelineConfig g2 = g1;
    g2.dataset_dir = workdir() + "/det_ds2";
    if (cmd_gen_data(g1) != 0 || cmd_gen_data(g2) != 0 ||
        !dirs_identical(g1.dataset_dir, g2.dataset_dir)) {
        ok = false;
        why = "gen-data re-run differs";
    }

    // training (reduced epochs, same command path)
    if (ok) {
        PipelineConfig t1;
        t1.dataset_dir = g1.dataset_dir;
        t1.weights_prefix = workdir() + "/det_w1";
        t1.train.epochs = 2;
        t1.train.seed = 9;
        PipelineConfig t2 = t1;
        t2.weights_prefix = workdir() + "/det_w2";
        if (cmd_train(t1) != 0 || cmd_train(t2) != 0 ||
            !files_identical(t1.weights_prefix + ".tnsr", t2.weights_prefix + ".tnsr") ||
            !files_identical(t1.weights_prefix + ".metrics.json", t2.weights_prefix + ".metrics.json")) {
            ok = false;
            why = "train re-run differs";
        }
    }

    // pseudo labelling with the trained acceptance model (falls back to the
    // small determinism model when criterion 6 was filtered out)
    if (ok) {
        const bool have_main = fs::exists(workdir() + "/model.manifest.json");
        PipelineConfig p1;
        p1.dataset_dir = have_main ? workdir() + "/val" : workdir() + "/det_ds1";
        p1.weights_prefix = have_main ? workdir() + "/model" : workdir() + "/det_w1";
        p1.out_dir = workdir() + "/det_pl1";
        PipelineConfig p2 = p1;
        p2.out_dir = workdir() + "/det_pl2";
        if (cmd_pseudo_label(p1) != 0 || cmd_pseudo_label(p2) != 0 ||
            !dirs_identical(p1.out_dir, p2.out_dir)) {
            ok = false;
            why = "pseudo-label re-run differs";
        }
    }
    report("7 determinism", ok, why);
}

} // namespace

int main(int argc, char** argv) {
    // optional criterion filter: pass numbers to run a subset
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

    fs::remove_all(workdir());
    fs::create_directories(workdir());

    if (wanted(1)) criterion_gradients();
    if (wanted(2)) criterion_relevance();
    if (wanted(3)) criterion_soft_erase();
    if (wanted(4)) criterion_epom();
    if (wanted(5)) criterion_miou();
    if (wanted(6)) criterion_end_to_end();
    if (wanted(7)) criterion_determinism();

    if (g_failures) std::printf("%d criterion check(s) failed\n", g_failures);
    return g_failures ? 1 : 0;
}
