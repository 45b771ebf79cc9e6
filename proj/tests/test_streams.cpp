#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "samslr/streams.hpp"

using namespace samslr;

namespace {

KeypointSequence random_reduced_seq(int T, Rng& rng, bool normalized = true) {
    KeypointSequence seq;
    seq.frame_w = 512;
    seq.frame_h = 512;
    seq.data = NdArray({T, kReducedNodeCount, 3});
    std::uniform_real_distribution<double> coord(normalized ? -1.0 : 0.0, normalized ? 1.0 : 512.0);
    std::uniform_real_distribution<double> conf(0.0, 1.0);
    for (int t = 0; t < T; ++t)
        for (int n = 0; n < kReducedNodeCount; ++n) {
            seq.data.at({t, n, 0}) = coord(rng);
            seq.data.at({t, n, 1}) = coord(rng);
            seq.data.at({t, n, 2}) = conf(rng);
        }
    return seq;
}

std::map<int, int> tree_parent_map(const SkeletonGraph& g) {
    std::map<int, int> parent;
    for (auto [p, c] : g.edges) parent[c] = p;
    return parent;
}

}  // namespace

TEST_CASE("normalize_coords formula oracles") {
    KeypointSequence seq;
    seq.frame_w = 200;
    seq.frame_h = 100;
    seq.data = NdArray({1, 3, 3});
    seq.data.at({0, 0, 0}) = 100;  // W/2 -> 0
    seq.data.at({0, 0, 1}) = 50;   // H/2 -> 0
    seq.data.at({0, 1, 0}) = 0;    // -> -1
    seq.data.at({0, 1, 1}) = 100;  // -> +1
    seq.data.at({0, 2, 0}) = 200;  // -> +1
    seq.data.at({0, 2, 2}) = 0.42;
    KeypointSequence out = normalize_coords(seq, 200, 100);
    CHECK(out.data.at({0, 0, 0}) == doctest::Approx(0.0));
    CHECK(out.data.at({0, 0, 1}) == doctest::Approx(0.0));
    CHECK(out.data.at({0, 1, 0}) == doctest::Approx(-1.0));
    CHECK(out.data.at({0, 1, 1}) == doctest::Approx(1.0));
    CHECK(out.data.at({0, 2, 0}) == doctest::Approx(1.0));
    CHECK(out.data.at({0, 2, 2}) == 0.42);  // s untouched

    Rng rng(1);
    KeypointSequence r = random_reduced_seq(4, rng, false);
    KeypointSequence rn = normalize_coords(r, r.frame_w, r.frame_h);
    for (int t = 0; t < 4; ++t)
        for (int n = 0; n < 27; ++n) {
            CHECK(rn.data.at({t, n, 0}) ==
                  doctest::Approx(2.0 * r.data.at({t, n, 0}) / r.frame_w - 1.0).epsilon(1e-12));
            CHECK(rn.data.at({t, n, 1}) ==
                  doctest::Approx(2.0 * r.data.at({t, n, 1}) / r.frame_h - 1.0).epsilon(1e-12));
            CHECK(std::fabs(rn.data.at({t, n, 0})) <= 1.0 + 1e-12);
        }
}

TEST_CASE("sample_frames tiling and windows") {
    Rng rng(2);

    // mark frame identity in the x coordinate of node 0
    const auto tagged = [&](int T) {
        KeypointSequence s = random_reduced_seq(T, rng);
        for (int t = 0; t < T; ++t) s.data.at({t, 0, 0}) = t;
        return s;
    };

    // L == T: identity in eval mode
    KeypointSequence s150 = tagged(150);
    KeypointSequence out150 = sample_frames(s150, 150, false, rng);
    CHECK(max_abs_diff(out150.data, s150.data) == 0.0);

    // L=60 -> pattern [0..59, 0..59, 0..29]
    KeypointSequence s60 = tagged(60);
    KeypointSequence out = sample_frames(s60, 150, false, rng);
    REQUIRE(out.frames() == 150);
    for (int t = 0; t < 150; ++t) CHECK(out.data.at({t, 0, 0}) == doctest::Approx(t % 60));

    // L=300 eval: centered window 75..224
    KeypointSequence s300 = tagged(300);
    KeypointSequence win = sample_frames(s300, 150, false, rng);
    REQUIRE(win.frames() == 150);
    for (int t = 0; t < 150; ++t) CHECK(win.data.at({t, 0, 0}) == doctest::Approx(75 + t));

    // training: random offset still yields contiguous window of the right length
    KeypointSequence tw = sample_frames(s300, 150, true, rng);
    REQUIRE(tw.frames() == 150);
    const double off = tw.data.at({0, 0, 0});
    CHECK(off >= 0);
    CHECK(off <= 150);
    for (int t = 0; t < 150; ++t) CHECK(tw.data.at({t, 0, 0}) == doctest::Approx(off + t));

    // any L >= 1 gives exactly T frames
    for (int L : {1, 2, 7, 149, 151}) CHECK(sample_frames(tagged(L), 150, false, rng).frames() == 150);
}

TEST_CASE("augment identity and mirror involution") {
    Rng rng(3);
    KeypointSequence seq = random_reduced_seq(8, rng);

    KeypointSequence same = augment(seq, AugmentationConfig::identity(), rng);
    CHECK(max_abs_diff(same.data, seq.data) == 0.0);

    // mirror with prob 1 twice -> original
    AugmentationConfig mirror = AugmentationConfig::identity();
    mirror.mirror_prob = 1.0;
    KeypointSequence once = augment(seq, mirror, rng);
    CHECK(max_abs_diff(once.data, seq.data) > 0.0);
    KeypointSequence twice = augment(once, mirror, rng);
    CHECK(max_abs_diff(twice.data, seq.data) < 1e-12);

    // s channel untouched by any augmentation
    AugmentationConfig heavy;
    heavy.mirror_prob = 1.0;
    KeypointSequence aug = augment(seq, heavy, rng);
    for (int t = 0; t < 8; ++t)
        for (int n = 0; n < 27; ++n) {
            bool found = false;  // mirrored nodes carry swapped-partner confidence
            for (int m = 0; m < 27; ++m) found = found || aug.data.at({t, n, 2}) == seq.data.at({t, m, 2});
            CHECK(found);
        }
}

TEST_CASE("rotation convention: 90 degrees maps (1,0) to (0,1)") {
    // rotation is counter-clockwise about the origin
    KeypointSequence seq;
    seq.frame_w = seq.frame_h = 2;
    seq.data = NdArray({1, kReducedNodeCount, 3});
    seq.data.at({0, 0, 0}) = 1.0;
    seq.data.at({0, 0, 1}) = 0.0;

    // drive the uniform rotation draw to its extreme by sampling many times
    // with range 90: instead, verify via the augment contract on a fixed rng
    // by using range 0 vs the rotation matrix oracle on range 90 draws.
    AugmentationConfig cfg = AugmentationConfig::identity();
    cfg.rotation_range_deg = 90.0;
    for (int trial = 0; trial < 40; ++trial) {
        Rng rng(40 + trial);
        Rng rng_copy = rng;
        KeypointSequence out = augment(seq, cfg, rng);
        // reproduce the angle with the same generator state
        std::uniform_real_distribution<double> sym(-1.0, 1.0);
        const double a = cfg.rotation_range_deg * sym(rng_copy) * M_PI / 180.0;
        CHECK(out.data.at({0, 0, 0}) == doctest::Approx(std::cos(a)).epsilon(1e-9));
        CHECK(out.data.at({0, 0, 1}) == doctest::Approx(std::sin(a)).epsilon(1e-9));
    }
}

TEST_CASE("derive_bones oracles") {
    const SkeletonGraph g = reduced_graph();
    Rng rng(5);
    KeypointSequence seq = random_reduced_seq(6, rng);
    StreamTensor joint = to_stream(seq);
    StreamTensor bone = derive_bones(joint, g);
    CHECK(bone.kind == StreamKind::Bone);
    CHECK(bone.data.shape() == joint.data.shape());

    const auto parent = tree_parent_map(g);
    for (int t = 0; t < 6; ++t) {
        // root bone is zero with root confidence
        CHECK(bone.data.at({0, t, g.root}) == 0.0);
        CHECK(bone.data.at({1, t, g.root}) == 0.0);
        CHECK(bone.data.at({2, t, g.root}) == joint.data.at({2, t, g.root}));
        for (auto [c, p] : parent) {
            CHECK(bone.data.at({0, t, c}) ==
                  doctest::Approx(joint.data.at({0, t, c}) - joint.data.at({0, t, p})).epsilon(1e-12));
            CHECK(bone.data.at({1, t, c}) ==
                  doctest::Approx(joint.data.at({1, t, c}) - joint.data.at({1, t, p})).epsilon(1e-12));
            // confidence = child confidence
            CHECK(bone.data.at({2, t, c}) == joint.data.at({2, t, c}));
        }
    }

    // path-sum reconstruction: summing bones along root-to-leaf path gives leaf - root
    for (int leaf = 0; leaf < 27; ++leaf) {
        double sx = 0.0, sy = 0.0;
        int node = leaf;
        while (node != g.root) {
            sx += bone.data.at({0, 0, node});
            sy += bone.data.at({1, 0, node});
            node = parent.at(node);
        }
        CHECK(sx == doctest::Approx(joint.data.at({0, 0, leaf}) - joint.data.at({0, 0, g.root})).epsilon(1e-6));
        CHECK(sy == doctest::Approx(joint.data.at({1, 0, leaf}) - joint.data.at({1, 0, g.root})).epsilon(1e-6));
    }

    // non-tree graph -> validation error
    SkeletonGraph bad = g;
    bad.edges.push_back({5, 6});  // second parent for node 6
    CHECK_THROWS_AS(derive_bones(joint, bad), Error);
}

TEST_CASE("derive_motion oracles") {
    // 1-D positions [0,1,3] -> motion [1,2,0]
    KeypointSequence seq;
    seq.frame_w = seq.frame_h = 2;
    seq.data = NdArray({3, kReducedNodeCount, 3});
    for (int t = 0; t < 3; ++t) {
        seq.data.at({t, 0, 0}) = (t == 0 ? 0.0 : t == 1 ? 1.0 : 3.0);
        for (int n = 0; n < 27; ++n) seq.data.at({t, n, 2}) = 0.5 + 0.1 * t;
    }
    StreamTensor joint = to_stream(seq);
    StreamTensor motion = derive_motion(joint);
    CHECK(motion.data.shape() == joint.data.shape());  // shape preserved
    CHECK(motion.data.at({0, 0, 0}) == doctest::Approx(1.0));
    CHECK(motion.data.at({0, 1, 0}) == doctest::Approx(2.0));
    CHECK(motion.data.at({0, 2, 0}) == doctest::Approx(0.0));  // last frame zero
    // confidence copied from frame t
    CHECK(motion.data.at({2, 0, 0}) == doctest::Approx(0.5));
    CHECK(motion.data.at({2, 2, 0}) == doctest::Approx(0.7));

    // static sequence -> all-zero coordinates
    Rng rng(6);
    KeypointSequence stat = random_reduced_seq(1, rng);
    KeypointSequence rep;
    rep.frame_w = rep.frame_h = stat.frame_w;
    rep.data = NdArray({4, 27, 3});
    for (int t = 0; t < 4; ++t)
        for (int n = 0; n < 27; ++n)
            for (int c = 0; c < 3; ++c) rep.data.at({t, n, c}) = stat.data.at({0, n, c});
    StreamTensor sm = derive_motion(to_stream(rep));
    for (int t = 0; t < 4; ++t)
        for (int n = 0; n < 27; ++n) {
            CHECK(sm.data.at({0, t, n}) == 0.0);
            CHECK(sm.data.at({1, t, n}) == 0.0);
        }

    // T < 2 -> input error
    CHECK_THROWS_AS(derive_motion(to_stream(stat)), Error);
}

TEST_CASE("mirroring commutes with bone derivation up to the index swap") {
    const SkeletonGraph g = reduced_graph();
    AugmentationConfig mirror = AugmentationConfig::identity();
    mirror.mirror_prob = 1.0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(70 + trial);
        KeypointSequence seq = random_reduced_seq(3, rng);
        Rng r1(1), r2(1);
        // bones of mirrored joints
        StreamTensor bones_of_mirror = derive_bones(to_stream(augment(seq, mirror, r1)), g);
        // mirrored bones: negate x of bones, swap left/right columns
        StreamTensor bones = derive_bones(to_stream(seq), g);
        NdArray expect = bones.data;
        for (int t = 0; t < 3; ++t) {
            for (int n = 0; n < 27; ++n) expect.at({0, t, n}) = -expect.at({0, t, n});
            for (auto [l, r] : reduced_mirror_pairs())
                for (int c = 0; c < 3; ++c) std::swap(expect.at({c, t, l}), expect.at({c, t, r}));
        }
        CHECK(max_abs_diff(bones_of_mirror.data, expect) < 1e-9);
    }
}

TEST_CASE("derive_all_streams produces the four consistent kinds") {
    Rng rng(8);
    KeypointSequence seq = random_reduced_seq(5, rng);
    StreamTensor joint = to_stream(seq);
    FourStreams fs = derive_all_streams(joint, reduced_graph());
    CHECK(fs.joint.kind == StreamKind::Joint);
    CHECK(fs.bone.kind == StreamKind::Bone);
    CHECK(fs.joint_motion.kind == StreamKind::JointMotion);
    CHECK(fs.bone_motion.kind == StreamKind::BoneMotion);
    CHECK(max_abs_diff(fs.joint.data, joint.data) == 0.0);
    CHECK(max_abs_diff(fs.joint_motion.data, derive_motion(joint).data) == 0.0);
    CHECK(max_abs_diff(fs.bone_motion.data, derive_motion(fs.bone).data) == 0.0);
    for (StreamKind k :
         {StreamKind::Joint, StreamKind::Bone, StreamKind::JointMotion, StreamKind::BoneMotion})
        CHECK(fs.by_kind(k).kind == k);
}

TEST_CASE("stream kind names round-trip") {
    for (StreamKind k :
         {StreamKind::Joint, StreamKind::Bone, StreamKind::JointMotion, StreamKind::BoneMotion})
        CHECK(stream_kind_from_name(stream_kind_name(k)) == k);
    CHECK_THROWS_AS(stream_kind_from_name("nope"), Error);
}
