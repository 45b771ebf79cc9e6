#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "samslr/sstcn.hpp"
#include "samslr/train.hpp"

using namespace samslr;

namespace {

NdArray random_array(Shape s, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    NdArray a(std::move(s));
    for (int64_t i = 0; i < a.size(); ++i) a[i] = dist(rng);
    return a;
}

SSTCNConfig mini_config(int classes) {
    SSTCNConfig c;
    c.frames = 4;
    c.joints = 4;
    c.height = c.width = 8;
    c.classes = classes;
    c.hidden = 16;
    c.dropout = 0.0;
    return c;
}

}  // namespace

TEST_CASE("the 33-joint subset is valid") {
    const auto& idx = feature_joint_indices();
    std::set<int> seen(idx.begin(), idx.end());
    CHECK(seen.size() == idx.size());  // no duplicates
    CHECK(*seen.begin() >= 0);
    CHECK(*seen.rbegin() <= 132);
    CHECK(idx.size() == 33);  // 1 nose + 4 mouth + 6 upper body + 22 hands
}

TEST_CASE("prepare_features channel selection and pooling oracles") {
    Rng rng(1);

    SUBCASE("raw already 60x133x24x24 -> pure channel selection") {
        NdArray raw = random_array({60, 133, 24, 24}, rng);
        NdArray out = prepare_features(raw);
        CHECK(out.shape() == Shape{60, 33, 24, 24});
        const auto& idx = feature_joint_indices();
        for (int t = 0; t < 60; t += 13)
            for (int j = 0; j < 33; ++j)
                for (int h = 0; h < 24; h += 7)
                    for (int w = 0; w < 24; w += 7)
                        CHECK(out.at({t, j, h, w}) == raw.at({t, idx[static_cast<size_t>(j)], h, w}));
    }

    SUBCASE("constant heatmaps stay constant under max pooling") {
        NdArray raw = NdArray::full({60, 133, 48, 48}, 3.25);
        NdArray out = prepare_features(raw);
        for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == 3.25);
    }

    SUBCASE("48x48 input: every cell is the max of its 2x2 block") {
        NdArray raw = random_array({2, 133, 48, 48}, rng);
        NdArray out = prepare_features(raw, /*target_frames=*/60, /*target_size=*/24);
        const auto& idx = feature_joint_indices();
        for (int t = 0; t < 60; ++t) {
            const int src_t = t % 2;  // tiled frames
            for (int j = 0; j < 33; j += 11)
                for (int h = 0; h < 24; ++h)
                    for (int w = 0; w < 24; ++w) {
                        const int sj = idx[static_cast<size_t>(j)];
                        const double expect =
                            std::max(std::max(raw.at({src_t, sj, 2 * h, 2 * w}), raw.at({src_t, sj, 2 * h, 2 * w + 1})),
                                     std::max(raw.at({src_t, sj, 2 * h + 1, 2 * w}),
                                              raw.at({src_t, sj, 2 * h + 1, 2 * w + 1})));
                        CHECK(out.at({t, j, h, w}) == expect);
                    }
        }
    }

    SUBCASE("too-small heatmaps -> format error") {
        NdArray raw = NdArray::zeros({3, 133, 16, 16});
        CHECK_THROWS_AS(prepare_features(raw), Error);
        try {
            prepare_features(raw);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Format);
        }
    }
}

TEST_CASE("stage-1 reshape puts element (t,j,h,w) at (t, j*H + h, w)") {
    // reshape bijection oracle by index arithmetic, plus exact round trip
    const int F = 3, J = 2, H = 4, W = 5;
    Rng rng(2);
    NdArray x = random_array({1, F, J, H, W}, rng);
    NdArray flat = x.reshaped({1, F, J * H, W});
    for (int t = 0; t < F; ++t)
        for (int j = 0; j < J; ++j)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w)
                    CHECK(flat.at({0, t, j * H + h, w}) == x.at({0, t, j, h, w}));
    NdArray back = flat.reshaped({1, F, J, H, W});
    CHECK(max_abs_diff(back, x) == 0.0);  // bit-for-bit round trip
}

TEST_CASE("grouped convolution with group count 1 equals dense convolution") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const int C = 4, Co = 6, H = 5, W = 5;
        NdArray x = random_array({2, C, H, W}, rng);
        NdArray k = random_array({Co, C, 3, 3}, rng);
        Tape t;
        Tape::Id dense = t.conv2d(t.constant(x), t.constant(k), 1, 1);
        // oracle: direct dense loop
        const NdArray& y = t.value(dense);
        for (int n = 0; n < 2; ++n)
            for (int co = 0; co < Co; ++co)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        double acc = 0.0;
                        for (int c = 0; c < C; ++c)
                            for (int i = -1; i <= 1; ++i)
                                for (int j = -1; j <= 1; ++j) {
                                    const int hh = h + i, ww = w + j;
                                    if (hh < 0 || hh >= H || ww < 0 || ww >= W) continue;
                                    acc += x.at({n, c, hh, ww}) * k.at({co, c, i + 1, j + 1});
                                }
                        CHECK(y.at({n, co, h, w}) == doctest::Approx(acc).epsilon(1e-5));
                    }
    }

    // grouped (g=2) equals running two dense halves
    const int C = 4, Co = 4, H = 4, W = 4;
    NdArray x = random_array({1, C, H, W}, rng);
    NdArray k = random_array({Co, C / 2, 3, 3}, rng);
    Tape t;
    Tape::Id grouped = t.conv2d(t.constant(x), t.constant(k), 2, 1);
    // build dense equivalent with zeros across groups
    NdArray kd = NdArray::zeros({Co, C, 3, 3});
    for (int co = 0; co < Co; ++co) {
        const int g = co / (Co / 2);
        for (int cl = 0; cl < C / 2; ++cl)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) kd.at({co, g * (C / 2) + cl, i, j}) = k.at({co, cl, i, j});
    }
    Tape t2;
    Tape::Id dense = t2.conv2d(t2.constant(x), t2.constant(kd), 1, 1);
    CHECK(max_abs_diff(t.value(grouped), t2.value(dense)) < 1e-5);
}

TEST_CASE("swish oracle values and global minimum") {
    CHECK(swish(0.0) == 0.0);
    CHECK(swish(1.0) == doctest::Approx(0.731058578).epsilon(1e-6));
    // dense grid scan: swish is bounded below by its global minimum ~ -0.2785
    double min_seen = 0.0;
    for (double x = -20.0; x <= 20.0; x += 0.001) min_seen = std::min(min_seen, swish(x));
    CHECK(min_seen >= -0.27847);
    CHECK(min_seen <= -0.27845);
    // derivative identity sigma(x) + x*sigma(x)*(1-sigma(x)) via tape
    ParamSet params;
    auto w = params.make("w", NdArray({1}, {0.7}));
    Tape t;
    auto y = t.swish(t.param(w));
    t.backward(y);
    const double s = sigmoid(0.7);
    CHECK(w->grad[0] == doctest::Approx(s + 0.7 * s * (1 - s)).epsilon(1e-12));
}

TEST_CASE("untrained forward produces finite logits; eval ignores dropout") {
    SSTCNConfig cfg = mini_config(3);
    cfg.dropout = 0.5;
    Rng rng(4);
    SSTCNModel model(cfg, rng);
    NdArray x = random_array({2, 4, 4, 8, 8}, rng);
    NdArray a = model.predict(x);
    CHECK(a.shape() == Shape{2, 3});
    CHECK(a.all_finite());
    CHECK(max_abs_diff(a, model.predict(x)) == 0.0);  // eval deterministic, no RNG

    // wrong input shape -> staged configuration error naming stage 0
    CHECK_THROWS_WITH_AS(model.predict(random_array({1, 4, 4, 7, 8}, rng)),
                         doctest::Contains("stage 0"), Error);
}

TEST_CASE("dropout rate 0 makes training forward deterministic") {
    SSTCNConfig cfg = mini_config(2);
    Rng rng(5);
    SSTCNModel model(cfg, rng);
    NdArray x = random_array({1, 4, 4, 8, 8}, rng);
    Tape t1, t2;
    NdArray y1 = t1.value(model.forward(t1, x, true, nullptr));
    NdArray y2 = t2.value(model.forward(t2, x, true, nullptr));
    CHECK(max_abs_diff(y1, y2) == 0.0);
}

TEST_CASE("miniature SSTCN gradient check (rel error < 1e-3)") {
    SSTCNConfig cfg = mini_config(2);
    Rng rng(6);
    SSTCNModel model(cfg, rng);
    NdArray x = random_array({2, 4, 4, 8, 8}, rng);
    const std::vector<int> labels{0, 1};
    const auto loss = [&]() {
        Tape t;
        Tape::Id logits = model.forward(t, x, /*training=*/true);
        Tape::Id l = t.smoothed_ce(logits, labels, 0.1);
        t.backward(l);
        return t.value(l)[0];
    };
    const double err = grad_check(loss, model.params(), 1e-4, 5, 1234);
    CHECK(err < 1e-3);
}

TEST_CASE("SSTCN overfits an 8-sample 2-class synthetic feature set") {
    SSTCNConfig cfg = mini_config(2);
    Rng rng(7);
    SSTCNModel model(cfg, rng);

    std::vector<NdArray> samples;
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
        const int cls = i % 2;
        NdArray x({4, 4, 8, 8});
        for (int f = 0; f < 4; ++f)
            for (int j = 0; j < 4; ++j)
                for (int h = 0; h < 8; ++h)
                    for (int w = 0; w < 8; ++w) {
                        const double blob = cls == 0 ? std::exp(-0.3 * ((h - 2.0) * (h - 2.0) + (w - 2.0) * (w - 2.0)))
                                                     : std::exp(-0.3 * ((h - 6.0) * (h - 6.0) + (w - 6.0) * (w - 6.0)));
                        x.at({f, j, h, w}) = blob + 0.01 * i;
                    }
        samples.push_back(x);
        labels.push_back(cls);
    }

    TrainConfig tc;
    tc.steps = 200;
    tc.batch_size = 8;
    tc.lr = 0.05;
    tc.seed = 3;
    const auto fwd = [&](Tape& t, const NdArray& batch, bool training, Rng* r) {
        return model.forward(t, batch, training, r);
    };
    TrainResult res = train_model(fwd, model.params(), samples, labels, tc);
    CHECK(res.train_metrics.top1 == doctest::Approx(1.0));
}
