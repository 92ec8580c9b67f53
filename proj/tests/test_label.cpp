#include "doctest.h"

#include <algorithm>

#include "wegpipe/label.hpp"
#include "wegpipe/rng.hpp"

using namespace wegpipe;

namespace {

Tensor map_of(std::vector<int64_t> shape, std::vector<double> v) { return Tensor(std::move(shape), std::move(v)); }

RefinedMaps random_maps(Rng& rng, const std::vector<int64_t>& classes, int64_t h, int64_t w) {
    RefinedMaps maps;
    for (int64_t cls : classes) {
        Tensor t({h, w});
        for (int64_t i = 0; i < t.size(); ++i) t.mutable_data()[i] = rng.uniform(0.0, 1.0);
        maps[cls] = t;
    }
    return maps;
}

} // namespace

TEST_CASE("initial pseudo label: saliency gate and arg-max") {
    EpomConfig cfg;
    RefinedMaps maps{{1, Tensor::full({2, 2}, 0.8)}};

    PseudoLabel bg = initial_pseudo_label(maps, Tensor({2, 2}), {1}, cfg);
    for (uint8_t v : bg.grid.pixels) CHECK(v == 0);

    PseudoLabel fg = initial_pseudo_label(maps, Tensor::full({2, 2}, 1.0), {1}, cfg);
    for (uint8_t v : fg.grid.pixels) CHECK(v == 1);

    RefinedMaps two{{1, map_of({1, 2}, {0.9, 0.1})}, {2, map_of({1, 2}, {0.2, 0.8})}};
    PseudoLabel l = initial_pseudo_label(two, Tensor::full({1, 2}, 1.0), {1, 2}, cfg);
    CHECK(l.grid.at(0, 0) == 1);
    CHECK(l.grid.at(0, 1) == 2);

    // zero activation stays background; exact ties go to the lower id
    RefinedMaps tie{{1, map_of({1, 2}, {0.0, 0.5})}, {2, map_of({1, 2}, {0.0, 0.5})}};
    PseudoLabel lt = initial_pseudo_label(tie, Tensor::full({1, 2}, 1.0), {1, 2}, cfg);
    CHECK(lt.grid.at(0, 0) == 0);
    CHECK(lt.grid.at(0, 1) == 1);

    CHECK_THROWS_AS(initial_pseudo_label(two, Tensor::full({1, 2}, 1.0), {1, 2, 3}, cfg), UsageError);
    RefinedMaps extra = two;
    extra[3] = map_of({1, 2}, {0.1, 0.1});
    CHECK_THROWS_AS(initial_pseudo_label(extra, Tensor::full({1, 2}, 1.0), {1, 2}, cfg), UsageError);
}

TEST_CASE("no-saliency variant thresholds the best activation") {
    EpomConfig cfg;
    cfg.fg_thr = 0.3;
    RefinedMaps maps{{2, map_of({1, 3}, {0.1, 0.3, 0.6})}};
    PseudoLabel l = initial_pseudo_label_no_saliency(maps, {2}, cfg);
    CHECK(l.grid.at(0, 0) == 0); // below
    CHECK(l.grid.at(0, 1) == 2); // 0.3 >= fg_thr
    CHECK(l.grid.at(0, 2) == 2);
}

TEST_CASE("class_threshold: median and top-quartile branches") {
    EpomConfig cfg;
    // singleton median
    {
        PseudoLabel p;
        p.grid = ByteImage(1, 2);
        p.grid.at(0, 0) = 1;
        CHECK(class_threshold(p, map_of({1, 2}, {0.9, 0.2}), 1, cfg.fg_thr) == 0.9);
    }
    // odd-count median
    {
        PseudoLabel p;
        p.grid = ByteImage(1, 3, 1);
        CHECK(class_threshold(p, map_of({1, 3}, {0.2, 1.0, 0.6}), 1, cfg.fg_thr) == 0.6);
    }
    // even-count median: mean of the middle pair
    {
        PseudoLabel p;
        p.grid = ByteImage(1, 4, 1);
        CHECK(class_threshold(p, map_of({1, 4}, {0.1, 0.3, 0.5, 0.7}), 1, cfg.fg_thr) ==
              doctest::Approx(0.4).epsilon(1e-15));
    }
    // absent class: first value inside the top quartile of pixels above fg_thr
    {
        PseudoLabel p;
        p.grid = ByteImage(1, 6);
        CHECK(class_threshold(p, map_of({1, 6}, {0.5, 0.6, 0.8, 0.9, 0.1, 0.2}), 1, 0.3) == 0.9);
    }
    // absent class, nothing above fg_thr: nothing can exceed the threshold
    {
        PseudoLabel p;
        p.grid = ByteImage(1, 3);
        CHECK(class_threshold(p, map_of({1, 3}, {0.1, 0.2, 0.25}), 1, 0.3) == 1.0);
    }
}

TEST_CASE("epom_refine worked example and fixed points") {
    EpomConfig cfg;
    RefinedMaps maps{{1, map_of({2, 2}, {0.9, 0.95, 0.3, 0.1})}};
    PseudoLabel p;
    p.grid = ByteImage(2, 2);
    p.grid.at(0, 0) = 1;
    p.provenance = ByteImage(2, 2);

    std::map<int64_t, double> thr;
    PseudoLabel r = epom_refine(p, maps, {1}, cfg, &thr);
    CHECK(thr[1] == 0.9);
    CHECK(r.grid.at(0, 0) == 1);
    CHECK(r.grid.at(0, 1) == kIgnoredLabel);
    CHECK(r.grid.at(1, 0) == 0);
    CHECK(r.grid.at(1, 1) == 0);
    CHECK(r.provenance.at(0, 1) == static_cast<uint8_t>(Provenance::EpomIgnored));
    CHECK(r.provenance.at(0, 0) == static_cast<uint8_t>(Provenance::Initial));

    // all activations at or below the threshold: unchanged
    RefinedMaps low{{1, map_of({2, 2}, {0.9, 0.9, 0.3, 0.1})}};
    PseudoLabel r2 = epom_refine(p, low, {1}, cfg);
    CHECK(r2.grid.pixels == p.grid.pixels);

    // no background pixels: nothing eligible
    PseudoLabel full;
    full.grid = ByteImage(2, 2, 1);
    full.provenance = ByteImage(2, 2);
    PseudoLabel r3 = epom_refine(full, maps, {1}, cfg);
    CHECK(r3.grid.pixels == full.grid.pixels);
}

TEST_CASE("epom_refine properties on randomized multi-class instances") {
    Rng rng(31);
    EpomConfig cfg;
    for (int trial = 0; trial < 40; ++trial) {
        const int64_t h = 6, w = 7;
        std::vector<int64_t> classes{1, 2, 3};
        RefinedMaps maps = random_maps(rng, classes, h, w);
        PseudoLabel p;
        p.grid = ByteImage(h, w);
        p.provenance = ByteImage(h, w);
        for (auto& px : p.grid.pixels) {
            const int64_t roll = rng.uniform_int(6);
            px = roll < 3 ? 0 : static_cast<uint8_t>(roll - 2); // half background
        }

        std::map<int64_t, double> thr;
        PseudoLabel r = epom_refine(p, maps, classes, cfg, &thr);

        // thresholds were computed on the input
        for (int64_t cls : classes) {
            CHECK(thr[cls] == class_threshold(p, maps[cls], cls, cfg.fg_thr));
        }
        for (size_t i = 0; i < p.grid.pixels.size(); ++i) {
            if (p.grid.pixels[i] != 0) {
                CHECK(r.grid.pixels[i] == p.grid.pixels[i]); // non-background is a fixed point
            } else {
                bool exceeded = false;
                for (int64_t cls : classes) {
                    exceeded |= maps[cls].data()[static_cast<int64_t>(i)] > thr[cls];
                }
                CHECK(r.grid.pixels[i] == (exceeded ? kIgnoredLabel : 0));
            }
        }

        // class order cannot matter
        std::vector<int64_t> shuffled{3, 1, 2};
        PseudoLabel r2 = epom_refine(p, maps, shuffled, cfg);
        CHECK(r2.grid.pixels == r.grid.pixels);
    }
}
