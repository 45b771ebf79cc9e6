#include <doctest.h>

#include <cmath>
#include <random>

#include "samslr/fusion.hpp"

using namespace samslr;

namespace {

LogitMatrix make_mod(const std::string& name, int S, int C, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    LogitMatrix m;
    m.modality = name;
    m.data = NdArray({S, C});
    for (int64_t i = 0; i < m.data.size(); ++i) m.data[i] = dist(rng);
    return m;
}

int argmax_row(const NdArray& a, int s) {
    int best = 0;
    for (int c = 1; c < a.dim(1); ++c)
        if (a.at({s, c}) > a.at({s, best})) best = c;
    return best;
}

// Benchmark with complementary modalities: modality 0 separates even/odd
// class pairs, modality 1 separates within the pair, and both are needed
// for full accuracy. A third modality is pure noise.
struct Benchmark {
    std::vector<LogitMatrix> mods;
    std::vector<int> labels;
};

Benchmark complementary_benchmark(int per_class, unsigned seed) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 0.35);
    const int C = 4, S = C * per_class;
    Benchmark b;
    LogitMatrix pair{"pair", NdArray({S, C}), {}};
    LogitMatrix within{"within", NdArray({S, C}), {}};
    LogitMatrix junk{"junk", NdArray({S, C}), {}};
    for (int s = 0; s < S; ++s) {
        const int y = s % C;
        b.labels.push_back(y);
        for (int c = 0; c < C; ++c) {
            // "pair" scores the {0,1} vs {2,3} grouping only
            pair.data.at({s, c}) = ((c / 2) == (y / 2) ? 2.0 : -2.0) + noise(rng);
            // "within" scores even vs odd index only
            within.data.at({s, c}) = ((c % 2) == (y % 2) ? 2.0 : -2.0) + noise(rng);
            junk.data.at({s, c}) = 5.0 * noise(rng);
        }
    }
    b.mods = {pair, within, junk};
    return b;
}

}  // namespace

TEST_CASE("fuse_fixed is an exact weighted sum") {
    Rng rng(1);
    const int S = 6, C = 5;
    std::vector<LogitMatrix> mods{make_mod("a", S, C, rng), make_mod("b", S, C, rng), make_mod("c", S, C, rng)};
    const std::vector<double> alpha{0.7, -0.3, 1.5};
    LogitMatrix fused = fuse_fixed(mods, alpha);
    REQUIRE(fused.data.shape() == Shape{S, C});
    for (int s = 0; s < S; ++s)
        for (int c = 0; c < C; ++c) {
            double expect = 0.0;
            for (size_t m = 0; m < mods.size(); ++m) expect += alpha[m] * mods[m].data.at({s, c});
            CHECK(fused.data.at({s, c}) == doctest::Approx(expect).epsilon(1e-6));
        }

    SUBCASE("linearity in the inputs") {
        std::vector<LogitMatrix> doubled = mods;
        for (auto& m : doubled)
            for (int64_t i = 0; i < m.data.size(); ++i) m.data[i] *= 2.0;
        LogitMatrix f2 = fuse_fixed(doubled, alpha);
        for (int64_t i = 0; i < f2.data.size(); ++i)
            CHECK(f2.data[i] == doctest::Approx(2.0 * fused.data[i]).epsilon(1e-6));
    }

    SUBCASE("single modality with weight 1 is the identity") {
        LogitMatrix f1 = fuse_fixed({mods[0]}, {1.0});
        CHECK(max_abs_diff(f1.data, mods[0].data) == 0.0);
    }

    SUBCASE("scaling all weights by a positive constant keeps every argmax") {
        LogitMatrix scaled = fuse_fixed(mods, {0.7 * 3.0, -0.3 * 3.0, 1.5 * 3.0});
        for (int s = 0; s < S; ++s) CHECK(argmax_row(scaled.data, s) == argmax_row(fused.data, s));
    }
}

TEST_CASE("published four- and six-stream weight vectors") {
    // the fixed weight vectors used by the released model configurations
    const std::vector<double> w4{1.0, 0.9, 0.4, 0.4};
    const std::vector<double> w6{1.0, 0.9, 0.4, 0.4, 0.4, 0.1};
    Rng rng(2);
    const int S = 4, C = 6;

    std::vector<LogitMatrix> mods4, mods6;
    for (int m = 0; m < 6; ++m) {
        LogitMatrix lm = make_mod("m" + std::to_string(m), S, C, rng);
        if (m < 4) mods4.push_back(lm);
        mods6.push_back(lm);
    }
    LogitMatrix f4 = fuse_fixed(mods4, w4);
    LogitMatrix f6 = fuse_fixed(mods6, w6);
    for (int s = 0; s < S; ++s)
        for (int c = 0; c < C; ++c) {
            double e4 = 0.0, e6 = 0.0;
            for (int m = 0; m < 4; ++m) e4 += w4[static_cast<size_t>(m)] * mods4[static_cast<size_t>(m)].data.at({s, c});
            for (int m = 0; m < 6; ++m) e6 += w6[static_cast<size_t>(m)] * mods6[static_cast<size_t>(m)].data.at({s, c});
            CHECK(f4.data.at({s, c}) == doctest::Approx(e4).epsilon(1e-12));
            CHECK(f6.data.at({s, c}) == doctest::Approx(e6).epsilon(1e-12));
        }
}

TEST_CASE("alignment and weight validation") {
    Rng rng(3);
    LogitMatrix a = make_mod("joint", 4, 3, rng);
    LogitMatrix b = make_mod("bone", 4, 3, rng);

    SUBCASE("shape mismatch names both modalities") {
        LogitMatrix bad = make_mod("bone", 5, 3, rng);
        try {
            fuse_fixed({a, bad}, {1.0, 1.0});
            FAIL("expected fusion error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Fusion);
            const std::string msg = e.what();
            CHECK(msg.find("joint") != std::string::npos);
            CHECK(msg.find("bone") != std::string::npos);
        }
    }

    SUBCASE("manifest mismatch is a fusion error") {
        a.sample_ids = {"s0", "s1", "s2", "s3"};
        b.sample_ids = {"s0", "s1", "s3", "s2"};
        CHECK_THROWS_AS(fuse_fixed({a, b}, {1.0, 1.0}), Error);
    }

    SUBCASE("weight-count mismatch, all-zero and non-finite weights") {
        CHECK_THROWS_AS(fuse_fixed({a, b}, {1.0}), Error);
        CHECK_THROWS_AS(fuse_fixed({a, b}, {0.0, 0.0}), Error);
        CHECK_THROWS_AS(fuse_fixed({a, b}, {1.0, std::nan("")}), Error);
        CHECK_THROWS_AS(fuse_fixed({}, {}), Error);
    }
}

TEST_CASE("GEM model contracts") {
    GEMConfig cfg;
    cfg.modalities = 3;
    cfg.classes = 4;
    cfg.conv_filters = 8;
    cfg.hidden = 16;
    cfg.hidden_layers = 1;
    Rng rng(4);
    GEMModel model(cfg, rng);

    Rng drng(5);
    std::vector<LogitMatrix> mods{make_mod("a", 6, 4, drng), make_mod("b", 6, 4, drng), make_mod("c", 6, 4, drng)};

    SUBCASE("weights are [S,M], fused is [S,C], eval deterministic") {
        GEMModel::Output o1 = model.predict(mods);
        CHECK(o1.weights.shape() == Shape{6, 3});
        CHECK(o1.fused.shape() == Shape{6, 4});
        CHECK(o1.weights.all_finite());
        GEMModel::Output o2 = model.predict(mods);
        CHECK(max_abs_diff(o1.fused, o2.fused) == 0.0);
    }

    SUBCASE("fused logits equal the per-sample weighted sum of the inputs") {
        GEMModel::Output o = model.predict(mods);
        for (int s = 0; s < 6; ++s)
            for (int c = 0; c < 4; ++c) {
                double expect = 0.0;
                for (int m = 0; m < 3; ++m)
                    expect += o.weights.at({s, m}) * mods[static_cast<size_t>(m)].data.at({s, c});
                CHECK(o.fused.at({s, c}) == doctest::Approx(expect).epsilon(1e-9));
            }
    }

    SUBCASE("identical inputs across modalities give identical per-modality weights") {
        std::vector<LogitMatrix> same{mods[0], mods[0], mods[0]};
        same[1].modality = "b";
        same[2].modality = "c";
        GEMModel::Output o = model.predict(same);
        for (int s = 0; s < 6; ++s) {
            CHECK(o.weights.at({s, 0}) == doctest::Approx(o.weights.at({s, 1})).epsilon(1e-12));
            CHECK(o.weights.at({s, 0}) == doctest::Approx(o.weights.at({s, 2})).epsilon(1e-12));
            // fused argmax therefore matches the single shared modality
            CHECK(argmax_row(o.fused, s) == argmax_row(mods[0].data, s));
        }
    }

    SUBCASE("global averaging makes every sample share one weight vector") {
        GEMConfig gcfg = cfg;
        gcfg.global_weights = true;
        Rng grng(4);
        GEMModel gmodel(gcfg, grng);
        GEMModel::Output o = gmodel.predict(mods);
        for (int m = 0; m < 3; ++m)
            for (int s = 1; s < 6; ++s) CHECK(o.weights.at({s, m}) == o.weights.at({0, m}));
    }

    SUBCASE("wrong modality count or class count is a configuration error") {
        CHECK_THROWS_AS(model.predict({mods[0], mods[1]}), Error);
        Rng r2(6);
        std::vector<LogitMatrix> wide{make_mod("a", 6, 5, r2), make_mod("b", 6, 5, r2), make_mod("c", 6, 5, r2)};
        CHECK_THROWS_AS(model.predict(wide), Error);
    }

    SUBCASE("gradient check through the fused objective") {
        const std::vector<int> labels{0, 1, 2, 3, 0, 1};
        const auto loss = [&]() {
            Tape t;
            Tape::Id fused = model.fused_forward(t, mods);
            Tape::Id l = t.smoothed_ce(fused, labels, 0.1);
            t.backward(l);
            return t.value(l)[0];
        };
        CHECK(grad_check(loss, model.params(), 1e-4, 6, 77) < 1e-3);
    }
}

TEST_CASE("GEM training beats single modalities on a complementary benchmark") {
    Benchmark bench = complementary_benchmark(/*per_class=*/12, /*seed=*/100);

    // singles and the equal fixed combination
    double best_single = 0.0;
    for (const auto& m : bench.mods) best_single = std::max(best_single, evaluate(m.data, bench.labels).top1);
    const double equal_fixed =
        evaluate(fuse_fixed(bench.mods, {1.0, 1.0, 1.0}).data, bench.labels).top1;
    // sanity: the pair/within split means no single modality can exceed 50%
    CHECK(best_single <= 0.60);

    GEMConfig cfg;
    cfg.modalities = 3;
    cfg.classes = 4;
    cfg.conv_filters = 16;
    cfg.hidden = 32;
    cfg.hidden_layers = 2;
    cfg.global_weights = true;  // average per-sample weights at eval time
    Rng rng(7);
    GEMModel model(cfg, rng);

    GEMTrainConfig tc;
    tc.epochs = 400;
    tc.lr = 0.1;
    tc.seed = 3;
    GEMTrainResult res = gem_train(model, bench.mods, bench.labels, tc);
    CHECK(res.best_epoch >= 0);
    CHECK(res.train_losses.size() == 400);

    const double gem_top1 = evaluate(model.predict(bench.mods).fused, bench.labels).top1;
    CHECK(gem_top1 > best_single);
    CHECK(gem_top1 >= equal_fixed);

    SUBCASE("adding noise on top of informative streams costs at most 1%") {
        // informative-only model vs informative+junk model
        std::vector<LogitMatrix> informative{bench.mods[0], bench.mods[1]};
        GEMConfig cfg2 = cfg;
        cfg2.modalities = 2;
        Rng r2(7);
        GEMModel m2(cfg2, r2);
        gem_train(m2, informative, bench.labels, tc);
        const double two_top1 = evaluate(m2.predict(informative).fused, bench.labels).top1;
        CHECK(gem_top1 >= two_top1 - 0.01);
    }
}

TEST_CASE("gem_train edge cases") {
    Benchmark bench = complementary_benchmark(4, 200);
    GEMConfig cfg;
    cfg.modalities = 3;
    cfg.classes = 4;
    cfg.conv_filters = 4;
    cfg.hidden = 8;
    cfg.hidden_layers = 1;

    SUBCASE("zero epochs leaves parameters untouched") {
        Rng rng(8);
        GEMModel model(cfg, rng);
        std::vector<NdArray> before;
        for (const auto& p : model.params().items) before.push_back(p->value);
        GEMTrainConfig tc;
        tc.epochs = 0;
        GEMTrainResult res = gem_train(model, bench.mods, bench.labels, tc);
        CHECK(res.best_epoch == -1);
        for (size_t i = 0; i < before.size(); ++i)
            CHECK(max_abs_diff(before[i], model.params().items[i]->value) == 0.0);
    }

    SUBCASE("a singleton class is a data error naming the class") {
        Rng rng(9);
        GEMModel model(cfg, rng);
        std::vector<int> labels = bench.labels;
        // collapse all but one sample of class 3 into class 2
        bool kept_one = false;
        for (auto& y : labels)
            if (y == 3) {
                if (kept_one) y = 2;
                kept_one = true;
            }
        try {
            GEMTrainConfig tc;
            gem_train(model, bench.mods, labels, tc);
            FAIL("expected data error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Data);
            CHECK(std::string(e.what()).find("3") != std::string::npos);
        }
    }
}

TEST_CASE("sensitivity sweep semantics") {
    Benchmark bench = complementary_benchmark(8, 300);
    const std::vector<double> base{1.0, 1.0, 1.0};

    SUBCASE("row count and base-value reproduction") {
        const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0};
        SweepResult res = sensitivity_sweep(bench.mods, bench.labels, base, grid);
        REQUIRE(res.rows.size() == 15);
        REQUIRE(res.best_weight_per_modality.size() == 3);
        const double base_top1 = evaluate(fuse_fixed(bench.mods, base).data, bench.labels).top1;
        for (const auto& row : res.rows)
            if (row.weight == 1.0) CHECK(row.top1 == doctest::Approx(base_top1).epsilon(1e-12));
    }

    SUBCASE("weight 0 equals exact leave-one-out fusion") {
        const std::vector<double> grid{0.0};
        SweepResult res = sensitivity_sweep(bench.mods, bench.labels, base, grid);
        for (size_t mi = 0; mi < 3; ++mi) {
            std::vector<LogitMatrix> rest;
            for (size_t j = 0; j < 3; ++j)
                if (j != mi) rest.push_back(bench.mods[j]);
            const double loo = evaluate(fuse_fixed(rest, {1.0, 1.0}).data, bench.labels).top1;
            CHECK(res.rows[mi].top1 == doctest::Approx(loo).epsilon(1e-12));
        }
    }

    SUBCASE("upweighting the noise modality never helps") {
        const std::vector<double> grid{0.0, 0.4, 0.8, 1.2, 1.6, 2.0};
        SweepResult res = sensitivity_sweep(bench.mods, bench.labels, base, grid);
        // modality 2 is junk: its best weight is the smallest grid value
        // (ties break toward the earlier grid entry)
        double top_at_zero = -1.0, best = -1.0;
        for (const auto& row : res.rows)
            if (row.modality == 2) {
                if (row.weight == 0.0) top_at_zero = row.top1;
                best = std::max(best, row.top1);
            }
        CHECK(top_at_zero == doctest::Approx(best).epsilon(1e-12));
    }

    SUBCASE("bad arguments") {
        CHECK_THROWS_AS(sensitivity_sweep(bench.mods, bench.labels, base, {}), Error);
        CHECK_THROWS_AS(sensitivity_sweep(bench.mods, bench.labels, {1.0}, {0.5}), Error);
    }
}
